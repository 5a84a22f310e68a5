#include "ltlrl/ltl.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_map>

#include "ltlrl/error.hpp"

namespace ltlrl {

// ---------------------------------------------------------------------------
// AtomTable

AtomTable::AtomTable(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() > kMaxAtoms) {
    throw Error("at most " + std::to_string(kMaxAtoms) + " atomic propositions are supported");
  }
  for (std::size_t i = 0; i < names_.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (names_[i] == names_[j]) throw Error("duplicate atomic proposition '" + names_[i] + "'");
    }
  }
}

std::optional<std::size_t> AtomTable::index_of(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

Symbol AtomTable::bit(std::string_view name) const {
  auto i = index_of(name);
  if (!i) throw UnknownAtomError(std::string(name));
  return Symbol{1} << *i;
}

Symbol AtomTable::symbol(std::initializer_list<std::string_view> atoms) const {
  Symbol s = 0;
  for (auto a : atoms) s |= bit(a);
  return s;
}

Symbol AtomTable::symbol(const std::vector<std::string>& atoms) const {
  Symbol s = 0;
  for (const auto& a : atoms) s |= bit(a);
  return s;
}

std::string AtomTable::to_string(Symbol s) const {
  std::string out = "{";
  bool first = true;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (s & (Symbol{1} << i)) {
      if (!first) out += ',';
      out += names_[i];
      first = false;
    }
  }
  return out + "}";
}

// ---------------------------------------------------------------------------
// Formula

struct Formula::Node {
  Op op;
  std::string name;
  std::vector<Formula> operands;
};

std::size_t arity(Op op) noexcept {
  switch (op) {
    case Op::True:
    case Op::Atom: return 0;
    case Op::Not:
    case Op::Next:
    case Op::Eventually:
    case Op::Always: return 1;
    case Op::And:
    case Op::Or:
    case Op::Implies:
    case Op::Until: return 2;
  }
  return 0;
}

Formula Formula::truth() { return Formula(std::make_shared<const Node>(Node{Op::True, {}, {}})); }

Formula Formula::atom(std::string name) {
  return Formula(std::make_shared<const Node>(Node{Op::Atom, std::move(name), {}}));
}

Formula Formula::negation(Formula f) { return Formula(std::make_shared<const Node>(Node{Op::Not, {}, {std::move(f)}})); }
Formula Formula::next(Formula f) { return Formula(std::make_shared<const Node>(Node{Op::Next, {}, {std::move(f)}})); }
Formula Formula::eventually(Formula f) {
  return Formula(std::make_shared<const Node>(Node{Op::Eventually, {}, {std::move(f)}}));
}
Formula Formula::always(Formula f) {
  return Formula(std::make_shared<const Node>(Node{Op::Always, {}, {std::move(f)}}));
}
Formula Formula::conjunction(Formula a, Formula b) {
  return Formula(std::make_shared<const Node>(Node{Op::And, {}, {std::move(a), std::move(b)}}));
}
Formula Formula::disjunction(Formula a, Formula b) {
  return Formula(std::make_shared<const Node>(Node{Op::Or, {}, {std::move(a), std::move(b)}}));
}
Formula Formula::implication(Formula a, Formula b) {
  return Formula(std::make_shared<const Node>(Node{Op::Implies, {}, {std::move(a), std::move(b)}}));
}
Formula Formula::until(Formula a, Formula b) {
  return Formula(std::make_shared<const Node>(Node{Op::Until, {}, {std::move(a), std::move(b)}}));
}

Op Formula::op() const noexcept { return node_->op; }
const std::string& Formula::name() const noexcept { return node_->name; }

const Formula& Formula::lhs() const {
  if (arity(op()) < 1) throw Error("formula node has no operand");
  return node_->operands[0];
}

const Formula& Formula::rhs() const {
  if (arity(op()) < 2) throw Error("formula node has no second operand");
  return node_->operands[1];
}

std::size_t Formula::depth() const {
  switch (arity(op())) {
    case 0: return 1;
    case 1: return 1 + lhs().depth();
    default: return 1 + std::max(lhs().depth(), rhs().depth());
  }
}

std::vector<std::string> Formula::atoms() const {
  std::vector<std::string> out;
  auto visit = [&](auto&& self, const Formula& f) -> void {
    if (f.op() == Op::Atom) {
      if (std::find(out.begin(), out.end(), f.name()) == out.end()) out.push_back(f.name());
      return;
    }
    if (arity(f.op()) >= 1) self(self, f.lhs());
    if (arity(f.op()) == 2) self(self, f.rhs());
  };
  visit(visit, *this);
  return out;
}

std::string Formula::to_string() const {
  // Binary nodes print their own parentheses, so unary operands never need extra ones.
  auto operand = [](const Formula& f) { return f.to_string(); };
  switch (op()) {
    case Op::True: return "true";
    case Op::Atom: return name();
    case Op::Not: return "!" + operand(lhs());
    case Op::Next: return "X " + operand(lhs());
    case Op::Eventually: return "F " + operand(lhs());
    case Op::Always: return "G " + operand(lhs());
    case Op::And: return "(" + lhs().to_string() + " & " + rhs().to_string() + ")";
    case Op::Or: return "(" + lhs().to_string() + " | " + rhs().to_string() + ")";
    case Op::Implies: return "(" + lhs().to_string() + " -> " + rhs().to_string() + ")";
    case Op::Until: return "(" + lhs().to_string() + " U " + rhs().to_string() + ")";
  }
  return {};
}

bool Formula::operator==(const Formula& other) const {
  if (node_ == other.node_) return true;
  if (op() != other.op()) return false;
  if (op() == Op::Atom) return name() == other.name();
  switch (arity(op())) {
    case 0: return true;
    case 1: return lhs() == other.lhs();
    default: return lhs() == other.lhs() && rhs() == other.rhs();
  }
}

// ---------------------------------------------------------------------------
// Parser

namespace {

enum class Tok { End, True, False, Ident, Not, Next, Eventually, Always, Until, And, Or, Implies, LParen, RParen };

struct Token {
  Tok kind;
  std::size_t pos;
  std::string text;
};

class Lexer {
 public:
  explicit Lexer(std::string_view s) : s_(s) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      if (i_ >= s_.size()) {
        out.push_back({Tok::End, i_, {}});
        return out;
      }
      out.push_back(next());
    }
  }

 private:
  void skip_space() {
    while (i_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[i_]))) ++i_;
  }

  bool starts_with(std::string_view p) const { return s_.substr(i_, p.size()) == p; }

  Token next() {
    const std::size_t start = i_;
    struct Alias {
      std::string_view text;
      Tok kind;
    };
    static constexpr Alias kSymbols[] = {
        {"->", Tok::Implies}, {"=>", Tok::Implies}, {"&&", Tok::And}, {"||", Tok::Or},
        {"¬", Tok::Not},  {"◯", Tok::Next}, {"○", Tok::Next}, {"◇", Tok::Eventually},
        {"□", Tok::Always}, {"∧", Tok::And}, {"∨", Tok::Or}, {"→", Tok::Implies},
        {"⇒", Tok::Implies}, {"!", Tok::Not},   {"~", Tok::Not},      {"&", Tok::And},
        {"|", Tok::Or},        {"(", Tok::LParen},  {")", Tok::RParen},
    };
    for (const auto& a : kSymbols) {
      if (starts_with(a.text)) {
        i_ += a.text.size();
        return {a.kind, start, std::string(a.text)};
      }
    }
    const char c = s_[i_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[i_])) || s_[i_] == '_')) ++i_;
      std::string word(s_.substr(start, i_ - start));
      if (word == "true") return {Tok::True, start, word};
      if (word == "false") return {Tok::False, start, word};
      if (word == "X") return {Tok::Next, start, word};
      if (word == "F") return {Tok::Eventually, start, word};
      if (word == "G") return {Tok::Always, start, word};
      if (word == "U") return {Tok::Until, start, word};
      return {Tok::Ident, start, word};
    }
    throw ParseError(start, std::string("unexpected character '") + c + "'");
  }

  std::string_view s_;
  std::size_t i_ = 0;
};

class Parser {
 public:
  Parser(std::vector<Token> toks, const AtomTable& atoms) : toks_(std::move(toks)), atoms_(atoms) {}

  Formula run() {
    Formula f = implication();
    if (peek().kind != Tok::End) throw ParseError(peek().pos, "unexpected '" + peek().text + "'");
    return f;
  }

 private:
  const Token& peek() const { return toks_[i_]; }
  const Token& take() { return toks_[i_++]; }
  bool accept(Tok k) {
    if (peek().kind != k) return false;
    ++i_;
    return true;
  }

  Formula implication() {
    Formula lhs = disjunction();
    if (accept(Tok::Implies)) return Formula::implication(lhs, implication());
    return lhs;
  }

  Formula disjunction() {
    Formula lhs = conjunction();
    if (accept(Tok::Or)) return Formula::disjunction(lhs, disjunction());
    return lhs;
  }

  Formula conjunction() {
    Formula lhs = until();
    if (accept(Tok::And)) return Formula::conjunction(lhs, conjunction());
    return lhs;
  }

  Formula until() {
    Formula lhs = unary();
    if (accept(Tok::Until)) return Formula::until(lhs, until());
    return lhs;
  }

  Formula unary() {
    switch (peek().kind) {
      case Tok::Not: take(); return Formula::negation(unary());
      case Tok::Next: take(); return Formula::next(unary());
      case Tok::Eventually: take(); return Formula::eventually(unary());
      case Tok::Always: take(); return Formula::always(unary());
      default: return primary();
    }
  }

  Formula primary() {
    const Token& t = take();
    switch (t.kind) {
      case Tok::True: return Formula::truth();
      case Tok::False: return Formula::negation(Formula::truth());
      case Tok::Ident:
        if (!atoms_.contains(t.text)) throw UnknownAtomError(t.text);
        return Formula::atom(t.text);
      case Tok::LParen: {
        Formula inner = implication();
        if (!accept(Tok::RParen)) throw ParseError(peek().pos, "expected ')'");
        return inner;
      }
      case Tok::End: throw ParseError(t.pos, "unexpected end of input");
      default: throw ParseError(t.pos, "unexpected '" + t.text + "'");
    }
  }

  std::vector<Token> toks_;
  const AtomTable& atoms_;
  std::size_t i_ = 0;
};

}  // namespace

Formula parse(std::string_view text, const AtomTable& atoms) {
  if (atoms.empty()) throw Error("parse requires a nonempty atom set");
  return Parser(Lexer(text).run(), atoms).run();
}

// ---------------------------------------------------------------------------
// Lasso semantics

namespace {

// Truth values of every subformula at the |prefix| + |cycle| distinct positions of the lasso.
// Position i has successor i + 1, except the last, which loops back to |prefix|.
class LassoEvaluator {
 public:
  LassoEvaluator(const LassoWord& w, const AtomTable& atoms) : w_(w), atoms_(atoms) {
    n_ = w.prefix.size() + w.cycle.size();
    loop_ = w.prefix.size();
  }

  const std::vector<char>& values(const Formula& f) {
    if (auto it = memo_.find(f.id()); it != memo_.end()) return it->second;
    std::vector<char> v(n_, 0);
    switch (f.op()) {
      case Op::True: std::fill(v.begin(), v.end(), 1); break;
      case Op::Atom: {
        const Symbol bit = atoms_.bit(f.name());
        for (std::size_t i = 0; i < n_; ++i) v[i] = (letter(i) & bit) != 0;
        break;
      }
      case Op::Not: {
        const auto& a = values(f.lhs());
        for (std::size_t i = 0; i < n_; ++i) v[i] = !a[i];
        break;
      }
      case Op::And: {
        const auto a = values(f.lhs());
        const auto& b = values(f.rhs());
        for (std::size_t i = 0; i < n_; ++i) v[i] = a[i] && b[i];
        break;
      }
      case Op::Or: {
        const auto a = values(f.lhs());
        const auto& b = values(f.rhs());
        for (std::size_t i = 0; i < n_; ++i) v[i] = a[i] || b[i];
        break;
      }
      case Op::Implies: {
        const auto a = values(f.lhs());
        const auto& b = values(f.rhs());
        for (std::size_t i = 0; i < n_; ++i) v[i] = !a[i] || b[i];
        break;
      }
      case Op::Next: {
        const auto& a = values(f.lhs());
        for (std::size_t i = 0; i < n_; ++i) v[i] = a[succ(i)];
        break;
      }
      case Op::Until: {
        const auto a = values(f.lhs());
        const auto& b = values(f.rhs());
        v = least_fixpoint(a, b);
        break;
      }
      case Op::Eventually: {
        const auto& b = values(f.lhs());
        v = least_fixpoint(std::vector<char>(n_, 1), b);
        break;
      }
      case Op::Always: {
        // G a = greatest Z with Z = a & X Z; iterate downward from a.
        v = values(f.lhs());
        bool changed = true;
        while (changed) {
          changed = false;
          for (std::size_t k = n_; k-- > 0;) {
            const char nv = v[k] && v[succ(k)];
            if (nv != v[k]) {
              v[k] = nv;
              changed = true;
            }
          }
        }
        break;
      }
    }
    return memo_.emplace(f.id(), std::move(v)).first->second;
  }

 private:
  Symbol letter(std::size_t i) const { return i < loop_ ? w_.prefix[i] : w_.cycle[i - loop_]; }
  std::size_t succ(std::size_t i) const { return i + 1 < n_ ? i + 1 : loop_; }

  // a U b = least Z with Z = b | (a & X Z); iterate upward from b.
  std::vector<char> least_fixpoint(const std::vector<char>& a, const std::vector<char>& b) const {
    std::vector<char> v = b;
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t k = n_; k-- > 0;) {
        const char nv = b[k] || (a[k] && v[succ(k)]);
        if (nv != v[k]) {
          v[k] = nv;
          changed = true;
        }
      }
    }
    return v;
  }

  const LassoWord& w_;
  const AtomTable& atoms_;
  std::size_t n_ = 0;
  std::size_t loop_ = 0;
  std::unordered_map<const void*, std::vector<char>> memo_;
};

}  // namespace

bool eval_lasso(const Formula& f, const LassoWord& word, const AtomTable& atoms) {
  if (word.cycle.empty()) throw Error("lasso word needs a nonempty cycle");
  const Symbol universe = static_cast<Symbol>(atoms.alphabet_size() - 1);
  for (Symbol s : word.prefix)
    if (s & ~universe) throw Error("lasso letter outside the atom set");
  for (Symbol s : word.cycle)
    if (s & ~universe) throw Error("lasso letter outside the atom set");
  LassoEvaluator ev(word, atoms);
  return ev.values(f)[0] != 0;
}

}  // namespace ltlrl
