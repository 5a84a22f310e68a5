#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "ltlrl/atoms.hpp"

namespace ltlrl {

enum class Op { True, Atom, Not, And, Or, Implies, Next, Until, Eventually, Always };

std::size_t arity(Op op) noexcept;

// Immutable LTL abstract syntax tree. Copies share structure.
class Formula {
 public:
  static Formula truth();
  static Formula atom(std::string name);
  static Formula negation(Formula f);
  static Formula conjunction(Formula a, Formula b);
  static Formula disjunction(Formula a, Formula b);
  static Formula implication(Formula a, Formula b);
  static Formula next(Formula f);
  static Formula until(Formula a, Formula b);
  static Formula eventually(Formula f);
  static Formula always(Formula f);

  Op op() const noexcept;
  // Atom name; empty for non-atoms.
  const std::string& name() const noexcept;
  // First operand of a unary or binary node.
  const Formula& lhs() const;
  // Second operand of a binary node.
  const Formula& rhs() const;

  std::size_t depth() const;
  // Names of all atoms, in first-occurrence order.
  std::vector<std::string> atoms() const;

  // Fully parenthesized ASCII rendering; parse(to_string()) rebuilds the same tree.
  std::string to_string() const;

  bool operator==(const Formula& other) const;

  // Identity of the shared node; stable for the lifetime of the tree.
  const void* id() const noexcept { return node_.get(); }

 private:
  struct Node;
  explicit Formula(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

// Parses the ASCII surface syntax
//   true false <ident> ! X F G U & | -> ( )
// plus the aliases && || => and the Unicode operators ¬ ◯ ◇ □ ∧ ∨ → ⇒.
// Precedence, tightest first: unary > U > & > | > ->. Binary operators associate to the right.
// Throws ParseError (with byte offset) and UnknownAtomError.
Formula parse(std::string_view text, const AtomTable& atoms);

// Ultimately periodic word prefix · cycle^ω over an AtomTable.
struct LassoWord {
  std::vector<Symbol> prefix;
  std::vector<Symbol> cycle;
};

// Standard LTL satisfaction of f by the infinite word prefix · cycle^ω.
bool eval_lasso(const Formula& f, const LassoWord& word, const AtomTable& atoms);

}  // namespace ltlrl
