#include "ltlrl/product.hpp"

#include <sstream>

#include <json.hpp>

#include "ltlrl/error.hpp"

namespace ltlrl {

void RewardConfig::validate() const {
  if (!(goal > bad && bad > 0.0)) throw Error("rewards must satisfy r_G > r_B > 0");
  if (!(deadlock < other && other <= 0.0)) throw Error("rewards must satisfy r_d < r_o <= 0");
}

RewardClass classify_reward(const PrunedDra& dra, StateId q) {
  if (dra.dra().in_good(q)) return RewardClass::Goal;
  if (dra.is_deadlock(q)) return RewardClass::Deadlock;
  if (dra.dra().in_bad(q)) return RewardClass::Bad;
  return RewardClass::Other;
}

double reward_of(const PrunedDra& dra, StateId q, const RewardConfig& cfg) {
  switch (classify_reward(dra, q)) {
    case RewardClass::Goal: return cfg.goal;
    case RewardClass::Deadlock: return cfg.deadlock;
    case RewardClass::Bad: return cfg.bad;
    case RewardClass::Other: break;
  }
  return cfg.other;
}

ProductMdp::ProductMdp(const Environment& env, const PrunedDra& dra, RewardConfig rewards)
    : env_(&env), dra_(&dra), rewards_(rewards), labeler_(env, dra.atoms()) {
  rewards_.validate();
}

StepResult ProductMdp::step(const ProductState& s, std::size_t action, Rng& rng) const {
  StepResult r;
  r.next.x = step_dynamics(*env_, s.x, action, rng);
  r.label = labeler_(r.next.x);
  r.next.q = dra_->step(s.q, r.label);
  r.reward = reward_of(*dra_, r.next.q, rewards_);
  r.terminal = dra_->is_deadlock(r.next.q);
  return r;
}

double discounted_return(const std::vector<double>& rewards, double gamma) {
  double g = 0.0, discount = 1.0;
  for (double r : rewards) {
    g += discount * r;
    discount *= gamma;
  }
  return g;
}

EpisodeTrace run_episode(const ProductMdp& mdp, const Policy& policy, const AgentState& x0, std::size_t horizon,
                         Rng& rng, double gamma) {
  if (horizon == 0) throw Error("episode horizon must be at least 1");
  EpisodeTrace trace;
  trace.gamma = gamma;
  trace.visit_counts.assign(mdp.dra().num_states(), 0);
  ProductState s = mdp.initial_state(x0);
  ++trace.visit_counts[s.q];
  double discount = 1.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    const std::size_t a = policy(s);
    const StepResult r = mdp.step(s, a, rng);
    trace.steps.push_back({s, a, r.reward, r.next, r.terminal});
    ++trace.visit_counts[r.next.q];
    trace.discounted_return += discount * r.reward;
    discount *= gamma;
    s = r.next;
    if (r.terminal) {
      trace.cause = Termination::Deadlock;
      break;
    }
  }
  return trace;
}

bool classify_success(const EpisodeTrace& trace, const PrunedDra& dra) {
  return is_accepting_run_prefix(dra, trace.visit_counts);
}

std::string trace_to_jsonl(const EpisodeTrace& trace) {
  std::ostringstream out;
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    const Transition& tr = trace.steps[t];
    nlohmann::json j = {{"t", t},
                        {"x", {tr.state.x.x, tr.state.x.y, tr.state.x.theta}},
                        {"q", tr.state.q},
                        {"a", tr.action},
                        {"r", tr.reward},
                        {"x_next", {tr.next.x.x, tr.next.x.y, tr.next.x.theta}},
                        {"q_next", tr.next.q},
                        {"terminal", tr.terminal}};
    out << j.dump() << "\n";
  }
  return out.str();
}

}  // namespace ltlrl
