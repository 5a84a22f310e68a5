#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "ltlrl/automaton.hpp"
#include "ltlrl/random.hpp"
#include "ltlrl/world.hpp"

namespace ltlrl {

struct RewardConfig {
  double goal = 100.0;      // r_G
  double bad = 10.0;        // r_B
  double other = -0.01;     // r_o
  double deadlock = -100.0; // r_d

  // Throws Error unless r_G > r_B > 0 and r_d < r_o <= 0.
  void validate() const;
};

struct ProductState {
  AgentState x;
  StateId q = 0;
};

enum class RewardClass { Goal, Bad, Deadlock, Other };

// Class of the reward paid on arrival at q. Deadlock takes precedence over B.
RewardClass classify_reward(const PrunedDra& dra, StateId q);
double reward_of(const PrunedDra& dra, StateId q, const RewardConfig& cfg = {});

struct StepResult {
  ProductState next;
  Symbol label = 0;
  double reward = 0.0;
  bool terminal = false;
};

// Synchronized simulator and automaton. Holds references; env and dra must outlive it.
class ProductMdp {
 public:
  ProductMdp(const Environment& env, const PrunedDra& dra, RewardConfig rewards = {});

  const Environment& env() const noexcept { return *env_; }
  const PrunedDra& dra() const noexcept { return *dra_; }
  const RewardConfig& rewards() const noexcept { return rewards_; }

  ProductState initial_state(const AgentState& x) const { return {x, dra_->initial()}; }

  // x' from the dynamics, q' = δ(q, L(x')).
  StepResult step(const ProductState& s, std::size_t action, Rng& rng) const;

  Symbol label(const AgentState& x) const { return labeler_(x); }

 private:
  const Environment* env_;
  const PrunedDra* dra_;
  RewardConfig rewards_;
  Labeler labeler_;
};

struct Transition {
  ProductState state;
  std::size_t action = 0;
  double reward = 0.0;
  ProductState next;
  bool terminal = false;
};

enum class Termination { Horizon, Deadlock };

struct EpisodeTrace {
  std::vector<Transition> steps;
  Termination cause = Termination::Horizon;
  // Visits per automaton state, counting the initial state.
  std::vector<std::size_t> visit_counts;
  double gamma = 0.99;
  double discounted_return = 0.0;
};

using Policy = std::function<std::size_t(const ProductState&)>;

// Σ_t γ^t r_t.
double discounted_return(const std::vector<double>& rewards, double gamma);

EpisodeTrace run_episode(const ProductMdp& mdp, const Policy& policy, const AgentState& x0, std::size_t horizon,
                         Rng& rng, double gamma = 0.99);

bool classify_success(const EpisodeTrace& trace, const PrunedDra& dra);

// One JSON object per transition.
std::string trace_to_jsonl(const EpisodeTrace& trace);

}  // namespace ltlrl
