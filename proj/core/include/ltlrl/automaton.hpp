#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ltlrl/atoms.hpp"
#include "ltlrl/ltl.hpp"

namespace ltlrl {

using StateId = std::uint32_t;

// d_φ value of states that cannot reach an accepting set.
inline constexpr std::uint32_t kInfiniteDistance = std::numeric_limits<std::uint32_t>::max();

// Conjunction of literals: every atom of `pos` holds and no atom of `neg` holds.
struct Cube {
  Symbol pos = 0;
  Symbol neg = 0;

  bool matches(Symbol s) const noexcept { return (s & pos) == pos && (s & neg) == 0; }
  bool operator==(const Cube&) const = default;
};

// Edge label: a boolean formula over AP in disjunctive normal form.
class Guard {
 public:
  Guard() = default;  // unsatisfiable
  explicit Guard(std::vector<Cube> cubes) : cubes_(std::move(cubes)) {}

  static Guard always() { return Guard({Cube{}}); }
  // Compact DNF covering exactly the given letters of 2^AP with |AP| = num_atoms.
  static Guard from_minterms(std::vector<Symbol> minterms, std::size_t num_atoms);

  bool eval(Symbol s) const noexcept {
    for (const auto& c : cubes_)
      if (c.matches(s)) return true;
    return false;
  }

  const std::vector<Cube>& cubes() const noexcept { return cubes_; }

  // HOA label body, e.g. "0&!1 | 2", "t" or "f".
  std::string to_hoa(std::size_t num_atoms) const;
  // Human readable, e.g. "r1 & !obs".
  std::string to_text(const AtomTable& atoms) const;

 private:
  std::vector<Cube> cubes_;
};

struct Edge {
  Guard guard;
  StateId target = 0;
};

// Rabin pair (G_i, B_i): accept iff G_i is visited infinitely often and B_i finitely often.
struct RabinPair {
  std::vector<StateId> good;
  std::vector<StateId> bad;
};

// Deterministic Rabin automaton over 2^AP with guarded edges.
// Construction validates that the transition relation is deterministic and complete.
class Dra {
 public:
  Dra(AtomTable atoms, std::vector<std::vector<Edge>> edges, StateId initial, std::vector<RabinPair> pairs,
      std::vector<std::string> state_names = {});

  const AtomTable& atoms() const noexcept { return atoms_; }
  std::size_t num_states() const noexcept { return edges_.size(); }
  StateId initial() const noexcept { return initial_; }
  const std::vector<Edge>& edges(StateId q) const { return edges_.at(q); }
  const std::vector<RabinPair>& pairs() const noexcept { return pairs_; }
  const std::string& state_name(StateId q) const { return names_.at(q); }

  // δ_D(q, σ).
  StateId step(StateId q, Symbol s) const;

  bool in_good(StateId q) const { return good_[q] != 0; }
  bool in_bad(StateId q) const { return bad_[q] != 0; }

  // Runs the automaton on prefix · cycle^ω and applies the Rabin condition to the states
  // visited infinitely often.
  bool accepts(const LassoWord& word) const;

  // Graphviz rendering; accepting states double-circled, rejecting states boxed.
  std::string to_dot() const;

 private:
  AtomTable atoms_;
  std::vector<std::vector<Edge>> edges_;
  StateId initial_;
  std::vector<RabinPair> pairs_;
  std::vector<std::string> names_;
  std::vector<char> good_;
  std::vector<char> bad_;
};

enum class DraDefect { None, Nondeterministic, Incomplete };

// First determinism or completeness violation of an edge table, with a description.
std::pair<DraDefect, std::string> find_defect(const std::vector<std::vector<Edge>>& edges, std::size_t num_atoms);

// Compiles a conjunction of the templates F a, G !a, G F a and (!a U b) into a DRA with a
// single Rabin pair. Throws UnsupportedFragment naming the first conjunct outside the fragment.
Dra compile_dra(const Formula& f, const AtomTable& atoms);

using MutexGroups = std::vector<std::vector<std::string>>;

// Region atoms pairwise exclusive; the obstacle atom exclusive with each region atom.
MutexGroups default_mutex_groups(const AtomTable& atoms, std::string_view obstacle_atom = "obs");

// DRA restricted to physically feasible letters, with hop distance to acceptance.
class PrunedDra {
 public:
  PrunedDra(Dra dra, MutexGroups mutex_groups);

  const Dra& dra() const noexcept { return dra_; }
  const AtomTable& atoms() const noexcept { return dra_.atoms(); }
  const MutexGroups& mutex_groups() const noexcept { return groups_; }
  std::size_t num_states() const noexcept { return dra_.num_states(); }
  StateId initial() const noexcept { return dra_.initial(); }

  const std::vector<Symbol>& feasible_symbols() const noexcept { return feasible_; }
  bool is_feasible(Symbol s) const;
  // (σ, δ_D(q, σ)) for every feasible σ.
  const std::vector<std::pair<Symbol, StateId>>& feasible_transitions(StateId q) const { return transitions_.at(q); }

  // d_φ(q); kInfiniteDistance when acceptance is unreachable.
  std::uint32_t distance(StateId q) const { return distance_.at(q); }
  const std::vector<std::uint32_t>& distances() const noexcept { return distance_; }
  bool is_deadlock(StateId q) const { return distance_.at(q) == kInfiniteDistance; }
  bool is_accepting(StateId q) const { return dra_.in_good(q); }

  // Uses the unpruned δ_D, so any runtime label is accepted.
  StateId step(StateId q, Symbol s) const { return dra_.step(q, s); }

 private:
  Dra dra_;
  MutexGroups groups_;
  std::vector<Symbol> feasible_;
  std::vector<std::vector<std::pair<Symbol, StateId>>> transitions_;
  std::vector<std::uint32_t> distance_;
};

// Prunes infeasible letters and computes d_φ by reverse breadth-first search from the union
// of the accepting sets. Throws InfeasibleTask when the initial state has infinite distance.
PrunedDra prune(const Dra& dra, const MutexGroups& mutex_groups);

// Finite-horizon success: some pair's accepting set visited at least twice in total and no
// deadlock state visited. visit_counts is indexed by state.
bool is_accepting_run_prefix(const PrunedDra& dra, std::span<const std::size_t> visit_counts);

}  // namespace ltlrl
