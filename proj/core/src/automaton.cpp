#include "ltlrl/automaton.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <sstream>

#include "ltlrl/error.hpp"

namespace ltlrl {

// ---------------------------------------------------------------------------
// Guard

Guard Guard::from_minterms(std::vector<Symbol> minterms, std::size_t num_atoms) {
  std::sort(minterms.begin(), minterms.end());
  minterms.erase(std::unique(minterms.begin(), minterms.end()), minterms.end());
  if (minterms.empty()) return Guard{};
  const Symbol full = static_cast<Symbol>((std::size_t{1} << num_atoms) - 1);
  if (minterms.size() == (std::size_t{1} << num_atoms)) return Guard::always();

  // Prime implicants by repeated merging of cubes that differ in one literal.
  auto less = [](const Cube& a, const Cube& b) { return std::tie(a.pos, a.neg) < std::tie(b.pos, b.neg); };
  std::set<Cube, decltype(less)> current(less);
  for (Symbol m : minterms) current.insert(Cube{m, static_cast<Symbol>(~m & full)});
  std::vector<Cube> primes;
  while (!current.empty()) {
    std::set<Cube, decltype(less)> next(less);
    std::set<Cube, decltype(less)> merged(less);
    for (auto i = current.begin(); i != current.end(); ++i) {
      for (auto j = std::next(i); j != current.end(); ++j) {
        if ((i->pos | i->neg) != (j->pos | j->neg)) continue;
        const Symbol diff = i->pos ^ j->pos;
        if (diff == 0 || (diff & (diff - 1)) != 0) continue;
        next.insert(Cube{static_cast<Symbol>(i->pos & ~diff), static_cast<Symbol>(i->neg & ~diff)});
        merged.insert(*i);
        merged.insert(*j);
      }
    }
    for (const auto& c : current)
      if (!merged.count(c)) primes.push_back(c);
    current = std::move(next);
  }

  // Greedy cover of the minterms by prime implicants.
  std::vector<Symbol> uncovered = minterms;
  std::vector<Cube> cover;
  while (!uncovered.empty()) {
    std::size_t best = 0, best_count = 0;
    for (std::size_t k = 0; k < primes.size(); ++k) {
      const auto count = static_cast<std::size_t>(
          std::count_if(uncovered.begin(), uncovered.end(), [&](Symbol m) { return primes[k].matches(m); }));
      if (count > best_count) {
        best = k;
        best_count = count;
      }
    }
    cover.push_back(primes[best]);
    std::erase_if(uncovered, [&](Symbol m) { return primes[best].matches(m); });
  }
  std::sort(cover.begin(), cover.end(), less);
  return Guard(std::move(cover));
}

std::string Guard::to_hoa(std::size_t num_atoms) const {
  if (cubes_.empty()) return "f";
  std::string out;
  for (std::size_t k = 0; k < cubes_.size(); ++k) {
    if (k) out += " | ";
    const Cube& c = cubes_[k];
    if (c.pos == 0 && c.neg == 0) return "t";
    bool first = true;
    for (std::size_t i = 0; i < num_atoms; ++i) {
      const Symbol b = Symbol{1} << i;
      if (!(c.pos & b) && !(c.neg & b)) continue;
      if (!first) out += '&';
      if (c.neg & b) out += '!';
      out += std::to_string(i);
      first = false;
    }
  }
  return out;
}

std::string Guard::to_text(const AtomTable& atoms) const {
  if (cubes_.empty()) return "false";
  std::string out;
  for (std::size_t k = 0; k < cubes_.size(); ++k) {
    if (k) out += " | ";
    const Cube& c = cubes_[k];
    if (c.pos == 0 && c.neg == 0) return "true";
    bool first = true;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      const Symbol b = Symbol{1} << i;
      if (!(c.pos & b) && !(c.neg & b)) continue;
      if (!first) out += " & ";
      if (c.neg & b) out += '!';
      out += atoms.name(i);
      first = false;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dra

std::pair<DraDefect, std::string> find_defect(const std::vector<std::vector<Edge>>& edges, std::size_t num_atoms) {
  const std::size_t letters = std::size_t{1} << num_atoms;
  for (std::size_t q = 0; q < edges.size(); ++q) {
    for (std::size_t s = 0; s < letters; ++s) {
      std::size_t hits = 0;
      for (const auto& e : edges[q])
        if (e.guard.eval(static_cast<Symbol>(s))) ++hits;
      if (hits > 1) {
        return {DraDefect::Nondeterministic,
                "state " + std::to_string(q) + " has overlapping guards on letter " + std::to_string(s)};
      }
      if (hits == 0) {
        return {DraDefect::Incomplete, "state " + std::to_string(q) + " has no edge for letter " + std::to_string(s)};
      }
    }
  }
  return {DraDefect::None, {}};
}

Dra::Dra(AtomTable atoms, std::vector<std::vector<Edge>> edges, StateId initial, std::vector<RabinPair> pairs,
         std::vector<std::string> state_names)
    : atoms_(std::move(atoms)),
      edges_(std::move(edges)),
      initial_(initial),
      pairs_(std::move(pairs)),
      names_(std::move(state_names)) {
  const std::size_t n = edges_.size();
  if (n == 0) throw Error("automaton needs at least one state");
  if (initial_ >= n) throw Error("initial state out of range");
  if (pairs_.empty()) throw Error("automaton needs at least one accepting pair");
  for (const auto& out : edges_)
    for (const auto& e : out)
      if (e.target >= n) throw Error("edge target out of range");
  good_.assign(n, 0);
  bad_.assign(n, 0);
  for (auto& p : pairs_) {
    std::sort(p.good.begin(), p.good.end());
    std::sort(p.bad.begin(), p.bad.end());
    for (StateId q : p.good) {
      if (q >= n) throw Error("accepting set refers to unknown state");
      good_[q] = 1;
    }
    for (StateId q : p.bad) {
      if (q >= n) throw Error("rejecting set refers to unknown state");
      bad_[q] = 1;
    }
  }
  if (auto [defect, why] = find_defect(edges_, atoms_.size()); defect != DraDefect::None) throw Error(why);
  if (names_.size() != n) {
    names_.resize(n);
    for (std::size_t q = 0; q < n; ++q)
      if (names_[q].empty()) names_[q] = "q" + std::to_string(q);
  }
}

StateId Dra::step(StateId q, Symbol s) const {
  for (const auto& e : edges_.at(q))
    if (e.guard.eval(s)) return e.target;
  throw Error("no transition (automaton is complete by construction)");
}

bool Dra::accepts(const LassoWord& word) const {
  if (word.cycle.empty()) throw Error("lasso word needs a nonempty cycle");
  StateId q = initial_;
  for (Symbol s : word.prefix) q = step(q, s);
  // The state at the start of each cycle iteration is eventually periodic.
  std::map<StateId, std::size_t> seen;
  std::vector<std::vector<StateId>> visited_per_lap;
  while (!seen.count(q)) {
    seen[q] = visited_per_lap.size();
    std::vector<StateId> lap;
    for (Symbol s : word.cycle) {
      lap.push_back(q);
      q = step(q, s);
    }
    visited_per_lap.push_back(std::move(lap));
  }
  std::vector<char> inf(num_states(), 0);
  for (std::size_t k = seen[q]; k < visited_per_lap.size(); ++k)
    for (StateId v : visited_per_lap[k]) inf[v] = 1;
  for (const auto& p : pairs_) {
    const bool hits_good = std::any_of(p.good.begin(), p.good.end(), [&](StateId v) { return inf[v]; });
    const bool hits_bad = std::any_of(p.bad.begin(), p.bad.end(), [&](StateId v) { return inf[v]; });
    if (hits_good && !hits_bad) return true;
  }
  return false;
}

std::string Dra::to_dot() const {
  std::ostringstream os;
  os << "digraph dra {\n  rankdir=LR;\n  init [shape=point];\n";
  for (std::size_t q = 0; q < num_states(); ++q) {
    os << "  s" << q << " [label=\"" << q << "\\n" << names_[q] << "\"";
    if (good_[q]) os << ", shape=doublecircle";
    else if (bad_[q]) os << ", shape=box, color=red";
    else os << ", shape=circle";
    os << "];\n";
  }
  os << "  init -> s" << initial_ << ";\n";
  for (std::size_t q = 0; q < num_states(); ++q)
    for (const auto& e : edges_[q])
      os << "  s" << q << " -> s" << e.target << " [label=\"" << e.guard.to_text(atoms_) << "\"];\n";
  os << "}\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Fragment compilation

namespace {

struct Templates {
  std::vector<Symbol> reach;                     // F a
  Symbol forbidden = 0;                          // G !a (union)
  std::vector<std::pair<Symbol, Symbol>> until;  // (!a U b)
  std::vector<Symbol> recurrence;                // G F a
  std::vector<std::string> reach_names, until_names, recurrence_names;
};

void flatten_conjunction(const Formula& f, std::vector<Formula>& out) {
  if (f.op() == Op::And) {
    flatten_conjunction(f.lhs(), out);
    flatten_conjunction(f.rhs(), out);
  } else {
    out.push_back(f);
  }
}

bool is_atom(const Formula& f) { return f.op() == Op::Atom; }

Templates classify(const Formula& f, const AtomTable& atoms) {
  std::vector<Formula> conjuncts;
  flatten_conjunction(f, conjuncts);
  Templates t;
  for (const auto& c : conjuncts) {
    if (c.op() == Op::True) continue;
    if (c.op() == Op::Eventually && is_atom(c.lhs())) {
      t.reach.push_back(atoms.bit(c.lhs().name()));
      t.reach_names.push_back(c.lhs().name());
      continue;
    }
    if (c.op() == Op::Always && c.lhs().op() == Op::Not && is_atom(c.lhs().lhs())) {
      t.forbidden |= atoms.bit(c.lhs().lhs().name());
      continue;
    }
    if (c.op() == Op::Always && c.lhs().op() == Op::Eventually && is_atom(c.lhs().lhs())) {
      t.recurrence.push_back(atoms.bit(c.lhs().lhs().name()));
      t.recurrence_names.push_back(c.lhs().lhs().name());
      continue;
    }
    if (c.op() == Op::Until && c.lhs().op() == Op::Not && is_atom(c.lhs().lhs()) && is_atom(c.rhs())) {
      t.until.emplace_back(atoms.bit(c.lhs().lhs().name()), atoms.bit(c.rhs().name()));
      t.until_names.push_back(c.lhs().lhs().name() + "U" + c.rhs().name());
      continue;
    }
    throw UnsupportedFragment(c.to_string());
  }
  return t;
}

// Synchronized state of all template monitors.
struct MonitorState {
  bool sink = false;
  std::uint32_t reached = 0;    // bit k: reach template k satisfied
  std::uint32_t released = 0;   // bit k: until template k satisfied
  std::uint32_t counter = 0;    // next recurrence template awaited
  bool completed = false;       // recurrence counter wrapped on the last letter

  std::uint64_t key() const {
    if (sink) return ~std::uint64_t{0};
    return (std::uint64_t{reached}) | (std::uint64_t{released} << 16) | (std::uint64_t{counter} << 32) |
           (std::uint64_t{completed} << 48);
  }
};

class MonitorProduct {
 public:
  explicit MonitorProduct(const Templates& t) : t_(t) {
    if (t_.reach.size() > 16 || t_.until.size() > 16 || t_.recurrence.size() > 0xffff) {
      throw Error("too many temporal templates");
    }
  }

  MonitorState step(const MonitorState& m, Symbol s) const {
    if (m.sink || (s & t_.forbidden)) return MonitorState{true};
    MonitorState n = m;
    for (std::size_t k = 0; k < t_.until.size(); ++k) {
      if (n.released & (1u << k)) continue;
      const auto [hold_off, release] = t_.until[k];
      if (s & release) n.released |= 1u << k;
      else if (s & hold_off) return MonitorState{true};
    }
    for (std::size_t k = 0; k < t_.reach.size(); ++k)
      if (s & t_.reach[k]) n.reached |= 1u << k;
    n.completed = false;
    if (!t_.recurrence.empty()) {
      while (s & t_.recurrence[n.counter]) {
        if (++n.counter == t_.recurrence.size()) {
          n.counter = 0;
          n.completed = true;
          break;
        }
      }
    }
    return n;
  }

  bool accepting(const MonitorState& m) const {
    if (m.sink) return false;
    const bool all_set = m.reached == mask(t_.reach.size()) && m.released == mask(t_.until.size());
    return all_set && (t_.recurrence.empty() || m.completed);
  }

  std::string describe(const MonitorState& m) const {
    if (m.sink) return "violation";
    std::string out;
    auto add = [&](const std::string& item) {
      if (!out.empty()) out += ' ';
      out += item;
    };
    for (std::size_t k = 0; k < t_.reach.size(); ++k)
      if (m.reached & (1u << k)) add("F" + t_.reach_names[k]);
    for (std::size_t k = 0; k < t_.until.size(); ++k)
      if (m.released & (1u << k)) add(t_.until_names[k]);
    if (!t_.recurrence.empty()) add("GF#" + std::to_string(m.counter) + (m.completed ? "!" : ""));
    return out.empty() ? "init" : out;
  }

 private:
  static std::uint32_t mask(std::size_t n) { return n >= 32 ? ~0u : ((1u << n) - 1); }
  const Templates& t_;
};

}  // namespace

Dra compile_dra(const Formula& f, const AtomTable& atoms) {
  for (const auto& a : f.atoms())
    if (!atoms.contains(a)) throw UnknownAtomError(a);
  const Templates t = classify(f, atoms);
  const MonitorProduct product(t);
  const std::size_t letters = atoms.alphabet_size();

  std::map<std::uint64_t, StateId> index;
  std::vector<MonitorState> states;
  std::deque<StateId> frontier;
  auto intern = [&](const MonitorState& m) {
    auto [it, fresh] = index.emplace(m.key(), static_cast<StateId>(states.size()));
    if (fresh) {
      states.push_back(m);
      frontier.push_back(it->second);
    }
    return it->second;
  };
  intern(MonitorState{});

  std::vector<std::vector<StateId>> successor;  // [state][letter]
  while (!frontier.empty()) {
    const StateId q = frontier.front();
    frontier.pop_front();
    std::vector<StateId> row(letters);
    for (std::size_t s = 0; s < letters; ++s) {
      const MonitorState from = states[q];
      row[s] = intern(product.step(from, static_cast<Symbol>(s)));
    }
    if (successor.size() <= q) successor.resize(q + 1);
    successor[q] = std::move(row);
  }

  std::vector<std::vector<Edge>> edges(states.size());
  for (StateId q = 0; q < states.size(); ++q) {
    std::map<StateId, std::vector<Symbol>> by_target;
    for (std::size_t s = 0; s < letters; ++s) by_target[successor[q][s]].push_back(static_cast<Symbol>(s));
    for (auto& [target, minterms] : by_target)
      edges[q].push_back(Edge{Guard::from_minterms(std::move(minterms), atoms.size()), target});
  }

  RabinPair pair;
  std::vector<std::string> names;
  for (StateId q = 0; q < states.size(); ++q) {
    if (product.accepting(states[q])) pair.good.push_back(q);
    if (states[q].sink) pair.bad.push_back(q);
    names.push_back(product.describe(states[q]));
  }
  return Dra(atoms, std::move(edges), 0, {std::move(pair)}, std::move(names));
}

// ---------------------------------------------------------------------------
// Pruning and distance

MutexGroups default_mutex_groups(const AtomTable& atoms, std::string_view obstacle_atom) {
  std::vector<std::string> regions;
  for (const auto& n : atoms.names())
    if (n != obstacle_atom) regions.push_back(n);
  MutexGroups groups;
  if (regions.size() >= 2) groups.push_back(regions);
  if (atoms.contains(obstacle_atom))
    for (const auto& r : regions) groups.push_back({std::string(obstacle_atom), r});
  return groups;
}

PrunedDra::PrunedDra(Dra dra, MutexGroups mutex_groups) : dra_(std::move(dra)), groups_(std::move(mutex_groups)) {
  const std::size_t letters = dra_.atoms().alphabet_size();
  for (std::size_t s = 0; s < letters; ++s)
    if (is_feasible(static_cast<Symbol>(s))) feasible_.push_back(static_cast<Symbol>(s));

  const std::size_t n = dra_.num_states();
  transitions_.resize(n);
  std::vector<std::vector<StateId>> predecessors(n);
  for (StateId q = 0; q < n; ++q) {
    for (Symbol s : feasible_) {
      const StateId t = dra_.step(q, s);
      transitions_[q].emplace_back(s, t);
      predecessors[t].push_back(q);
    }
  }

  distance_.assign(n, kInfiniteDistance);
  std::deque<StateId> queue;
  for (StateId q = 0; q < n; ++q) {
    if (dra_.in_good(q)) {
      distance_[q] = 0;
      queue.push_back(q);
    }
  }
  while (!queue.empty()) {
    const StateId v = queue.front();
    queue.pop_front();
    for (StateId u : predecessors[v]) {
      if (distance_[u] == kInfiniteDistance) {
        distance_[u] = distance_[v] + 1;
        queue.push_back(u);
      }
    }
  }
}

bool PrunedDra::is_feasible(Symbol s) const {
  for (const auto& group : groups_) {
    int present = 0;
    for (const auto& atom : group) {
      auto i = dra_.atoms().index_of(atom);
      if (i && (s & (Symbol{1} << *i))) ++present;
    }
    if (present >= 2) return false;
  }
  return true;
}

PrunedDra prune(const Dra& dra, const MutexGroups& mutex_groups) {
  PrunedDra pruned(dra, mutex_groups);
  if (pruned.is_deadlock(pruned.initial())) {
    throw InfeasibleTask("initial automaton state cannot reach acceptance under the mutual-exclusion assumptions");
  }
  return pruned;
}

bool is_accepting_run_prefix(const PrunedDra& dra, std::span<const std::size_t> visit_counts) {
  if (visit_counts.size() != dra.num_states()) throw Error("visit counts must cover every automaton state");
  for (StateId q = 0; q < visit_counts.size(); ++q)
    if (visit_counts[q] > 0 && dra.is_deadlock(q)) return false;
  for (const auto& p : dra.dra().pairs()) {
    std::size_t total = 0;
    for (StateId q : p.good) total += visit_counts[q];
    if (total >= 2) return true;
  }
  return false;
}

}  // namespace ltlrl
