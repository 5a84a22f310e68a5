#include "ltlrl/hoa.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "ltlrl/error.hpp"

namespace ltlrl {

std::string export_hoa(const Dra& dra, std::string_view name) {
  const std::size_t k = dra.pairs().size();
  std::ostringstream os;
  os << "HOA: v1\n";
  os << "name: \"" << name << "\"\n";
  os << "States: " << dra.num_states() << "\n";
  os << "Start: " << dra.initial() << "\n";
  os << "AP: " << dra.atoms().size();
  for (const auto& a : dra.atoms().names()) os << " \"" << a << "\"";
  os << "\n";
  os << "acc-name: Rabin " << k << "\n";
  os << "Acceptance: " << 2 * k << " ";
  for (std::size_t i = 0; i < k; ++i) {
    if (i) os << " | ";
    if (k > 1) os << "(";
    os << "Fin(" << 2 * i << ") & Inf(" << 2 * i + 1 << ")";
    if (k > 1) os << ")";
  }
  os << "\n";
  os << "properties: trans-labels explicit-labels state-acc deterministic complete\n";
  os << "--BODY--\n";
  for (StateId q = 0; q < dra.num_states(); ++q) {
    std::vector<int> marks;
    for (std::size_t i = 0; i < k; ++i) {
      const auto& p = dra.pairs()[i];
      if (std::binary_search(p.bad.begin(), p.bad.end(), q)) marks.push_back(static_cast<int>(2 * i));
      if (std::binary_search(p.good.begin(), p.good.end(), q)) marks.push_back(static_cast<int>(2 * i + 1));
    }
    os << "State: " << q << " \"" << dra.state_name(q) << "\"";
    if (!marks.empty()) {
      os << " {";
      for (std::size_t m = 0; m < marks.size(); ++m) os << (m ? " " : "") << marks[m];
      os << "}";
    }
    os << "\n";
    for (const auto& e : dra.edges(q)) os << "[" << e.guard.to_hoa(dra.atoms().size()) << "] " << e.target << "\n";
  }
  os << "--END--\n";
  return os.str();
}

namespace {

using Kind = HoaError::Kind;

enum class T { Ident, Header, Int, String, LBracket, RBracket, LBrace, RBrace, LParen, RParen, Not, And, Or, Body, End, Eof };

struct Tok {
  T kind;
  std::string text;
  std::size_t line;
};

std::vector<Tok> tokenize(std::string_view s) {
  std::vector<Tok> out;
  std::size_t i = 0, line = 1;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '/' && i + 1 < s.size() && s[i + 1] == '*') {
      auto end = s.find("*/", i + 2);
      if (end == std::string_view::npos) throw HoaError(Kind::Syntax, "unterminated comment");
      line += static_cast<std::size_t>(std::count(s.begin() + static_cast<long>(i), s.begin() + static_cast<long>(end), '\n'));
      i = end + 2;
      continue;
    }
    if (s.substr(i, 8) == "--BODY--") {
      out.push_back({T::Body, "--BODY--", line});
      i += 8;
      continue;
    }
    if (s.substr(i, 7) == "--END--") {
      out.push_back({T::End, "--END--", line});
      i += 7;
      continue;
    }
    if (c == '"') {
      std::string text;
      ++i;
      while (i < s.size() && s[i] != '"') {
        if (s[i] == '\\' && i + 1 < s.size()) ++i;
        text += s[i++];
      }
      if (i >= s.size()) throw HoaError(Kind::Syntax, "unterminated string on line " + std::to_string(line));
      ++i;
      out.push_back({T::String, text, line});
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
      out.push_back({T::Int, std::string(s.substr(i, j - i)), line});
      i = j;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '@') {
      std::size_t j = i;
      while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' || s[j] == '-' || s[j] == '@'))
        ++j;
      std::string word(s.substr(i, j - i));
      if (j < s.size() && s[j] == ':') {
        out.push_back({T::Header, word, line});
        ++j;
      } else {
        out.push_back({T::Ident, word, line});
      }
      i = j;
      continue;
    }
    T k;
    switch (c) {
      case '[': k = T::LBracket; break;
      case ']': k = T::RBracket; break;
      case '{': k = T::LBrace; break;
      case '}': k = T::RBrace; break;
      case '(': k = T::LParen; break;
      case ')': k = T::RParen; break;
      case '!': k = T::Not; break;
      case '&': k = T::And; break;
      case '|': k = T::Or; break;
      default: throw HoaError(Kind::Syntax, std::string("unexpected character '") + c + "' on line " + std::to_string(line));
    }
    out.push_back({k, std::string(1, c), line});
    ++i;
  }
  out.push_back({T::Eof, {}, line});
  return out;
}

// Label expression over AP indices.
struct Expr {
  enum class Op { True, False, Ap, Not, And, Or } op;
  std::size_t ap = 0;
  std::unique_ptr<Expr> a, b;

  bool eval(Symbol s) const {
    switch (op) {
      case Op::True: return true;
      case Op::False: return false;
      case Op::Ap: return (s >> ap) & 1u;
      case Op::Not: return !a->eval(s);
      case Op::And: return a->eval(s) && b->eval(s);
      case Op::Or: return a->eval(s) || b->eval(s);
    }
    return false;
  }
};

// Acceptance condition: disjunction of conjunctions of Fin/Inf atoms.
struct AccAtom {
  bool inf;
  int set;
};

class Reader {
 public:
  explicit Reader(std::vector<Tok> toks) : t_(std::move(toks)) {}

  Dra run() {
    read_headers();
    return read_body();
  }

 private:
  const Tok& peek() const { return t_[i_]; }
  const Tok& take() { return t_[i_++]; }
  bool accept(T k) {
    if (peek().kind != k) return false;
    ++i_;
    return true;
  }
  const Tok& expect(T k, const char* what) {
    if (peek().kind != k)
      throw HoaError(Kind::Syntax, std::string("expected ") + what + " on line " + std::to_string(peek().line));
    return take();
  }
  std::size_t expect_int(const char* what) {
    const auto& tok = expect(T::Int, what);
    std::size_t v = 0;
    std::from_chars(tok.text.data(), tok.text.data() + tok.text.size(), v);
    return v;
  }
  [[noreturn]] void header_error(const std::string& msg) const { throw HoaError(Kind::MalformedHeader, msg); }

  void read_headers() {
    if (peek().kind != T::Header || peek().text != "HOA") header_error("file must start with 'HOA: v1'");
    take();
    if (peek().kind != T::Ident || peek().text != "v1") header_error("only HOA v1 is supported");
    take();
    bool saw_acceptance = false;
    while (peek().kind == T::Header) {
      const std::string name = take().text;
      if (name == "States") {
        states_ = expect_int("state count");
      } else if (name == "Start") {
        if (start_) header_error("multiple Start headers are not supported");
        start_ = expect_int("start state");
        if (peek().kind == T::And) header_error("conjunctive start states are not supported");
      } else if (name == "AP") {
        const std::size_t n = expect_int("AP count");
        std::vector<std::string> names;
        for (std::size_t k = 0; k < n; ++k) names.push_back(expect(T::String, "AP name").text);
        try {
          atoms_ = AtomTable(std::move(names));
        } catch (const Error& e) {
          header_error(e.what());
        }
        saw_ap_ = true;
      } else if (name == "acc-name") {
        const auto& id = expect(T::Ident, "acceptance name");
        if (id.text != "Rabin") throw HoaError(Kind::UnsupportedAcceptance, "acc-name '" + id.text + "'");
        acc_name_pairs_ = expect_int("Rabin pair count");
      } else if (name == "Acceptance") {
        acc_sets_ = expect_int("acceptance set count");
        read_acceptance();
        saw_acceptance = true;
      } else {
        // name, tool, properties, Alias, ...: skip values until the next header or body.
        if (name == "Alias") throw HoaError(Kind::Syntax, "aliases are not supported");
        while (peek().kind != T::Header && peek().kind != T::Body && peek().kind != T::Eof) take();
      }
    }
    if (!states_) header_error("missing States header");
    if (!start_) header_error("missing Start header");
    if (!saw_ap_) header_error("missing AP header");
    if (!saw_acceptance) header_error("missing Acceptance header");
    if (*start_ >= *states_) header_error("Start refers to an undeclared state");
    if (peek().kind != T::Body) header_error("expected --BODY--");
    take();
    validate_rabin();
  }

  void read_acceptance() {
    // cond := conj ('|' conj)* ; conj := atom ('&' atom)* ; atom := Fin(n) | Inf(n) | '(' cond ')'
    std::vector<std::vector<AccAtom>> disjuncts;
    auto read_conj = [&](auto&& self_cond) -> std::vector<AccAtom> {
      std::vector<AccAtom> conj;
      do {
        if (accept(T::LParen)) {
          auto inner = self_cond(self_cond);
          expect(T::RParen, "')'");
          if (inner.size() != 1) throw HoaError(Kind::UnsupportedAcceptance, "nested disjunction");
          conj.insert(conj.end(), inner[0].begin(), inner[0].end());
          continue;
        }
        const auto& id = expect(T::Ident, "Fin or Inf");
        if (id.text != "Fin" && id.text != "Inf")
          throw HoaError(Kind::UnsupportedAcceptance, "acceptance primitive '" + id.text + "'");
        expect(T::LParen, "'('");
        if (accept(T::Not)) throw HoaError(Kind::UnsupportedAcceptance, "negated acceptance sets");
        const int set = static_cast<int>(expect_int("acceptance set"));
        expect(T::RParen, "')'");
        conj.push_back({id.text == "Inf", set});
      } while (accept(T::And));
      return conj;
    };
    auto read_cond = [&](auto&& self) -> std::vector<std::vector<AccAtom>> {
      std::vector<std::vector<AccAtom>> out;
      do out.push_back(read_conj(self));
      while (accept(T::Or));
      return out;
    };
    disjuncts = read_cond(read_cond);
    acceptance_ = std::move(disjuncts);
  }

  void validate_rabin() {
    const std::size_t k = acceptance_.size();
    if (acc_sets_ != 2 * k) throw HoaError(Kind::UnsupportedAcceptance, "set count does not match a Rabin condition");
    if (acc_name_pairs_ && *acc_name_pairs_ != k)
      throw HoaError(Kind::UnsupportedAcceptance, "acc-name pair count does not match the Acceptance header");
    std::set<std::size_t> pairs_seen;
    for (const auto& conj : acceptance_) {
      if (conj.size() != 2) throw HoaError(Kind::UnsupportedAcceptance, "each Rabin pair needs one Fin and one Inf");
      const AccAtom* fin = conj[0].inf ? &conj[1] : &conj[0];
      const AccAtom* inf = conj[0].inf ? &conj[0] : &conj[1];
      if (fin->inf || !inf->inf || fin->set % 2 != 0 || inf->set != fin->set + 1)
        throw HoaError(Kind::UnsupportedAcceptance, "expected Fin(2i) & Inf(2i+1)");
      pairs_seen.insert(static_cast<std::size_t>(fin->set / 2));
    }
    if (pairs_seen.size() != k || *pairs_seen.rbegin() != k - 1)
      throw HoaError(Kind::UnsupportedAcceptance, "Rabin pairs must use sets 0 .. 2k-1");
  }

  std::unique_ptr<Expr> label_or() {
    auto lhs = label_and();
    while (accept(T::Or)) {
      auto e = std::make_unique<Expr>(Expr{Expr::Op::Or, 0, std::move(lhs), label_and()});
      lhs = std::move(e);
    }
    return lhs;
  }
  std::unique_ptr<Expr> label_and() {
    auto lhs = label_not();
    while (accept(T::And)) {
      auto e = std::make_unique<Expr>(Expr{Expr::Op::And, 0, std::move(lhs), label_not()});
      lhs = std::move(e);
    }
    return lhs;
  }
  std::unique_ptr<Expr> label_not() {
    if (accept(T::Not)) return std::make_unique<Expr>(Expr{Expr::Op::Not, 0, label_not(), nullptr});
    if (accept(T::LParen)) {
      auto e = label_or();
      expect(T::RParen, "')'");
      return e;
    }
    if (peek().kind == T::Ident && (peek().text == "t" || peek().text == "f")) {
      const bool truth = take().text == "t";
      return std::make_unique<Expr>(Expr{truth ? Expr::Op::True : Expr::Op::False, 0, nullptr, nullptr});
    }
    if (peek().kind == T::Ident && peek().text[0] == '@') throw HoaError(Kind::Syntax, "aliases are not supported");
    const std::size_t ap = expect_int("AP index");
    if (ap >= atoms_.size()) throw HoaError(Kind::Syntax, "AP index out of range");
    return std::make_unique<Expr>(Expr{Expr::Op::Ap, ap, nullptr, nullptr});
  }

  std::vector<int> read_marks() {
    std::vector<int> marks;
    if (!accept(T::LBrace)) return marks;
    while (!accept(T::RBrace)) marks.push_back(static_cast<int>(expect_int("acceptance set")));
    return marks;
  }

  Dra read_body() {
    const std::size_t n = *states_;
    std::vector<std::vector<Edge>> edges(n);
    std::vector<std::string> names(n);
    std::vector<char> declared(n, 0);
    RabinPairs pairs(acceptance_.size());
    const std::size_t letters = atoms_.alphabet_size();
    while (peek().kind == T::Header && peek().text == "State") {
      take();
      if (peek().kind == T::LBracket) throw HoaError(Kind::Syntax, "state labels are not supported");
      const std::size_t q = expect_int("state id");
      if (q >= n) throw HoaError(Kind::Syntax, "state " + std::to_string(q) + " exceeds the States header");
      if (declared[q]) throw HoaError(Kind::Syntax, "state " + std::to_string(q) + " declared twice");
      declared[q] = 1;
      if (peek().kind == T::String) names[q] = take().text;
      for (int m : read_marks()) {
        if (m < 0 || static_cast<std::size_t>(m) >= acc_sets_) throw HoaError(Kind::Syntax, "acceptance set out of range");
        auto& p = pairs[static_cast<std::size_t>(m / 2)];
        (m % 2 ? p.good : p.bad).push_back(static_cast<StateId>(q));
      }
      while (peek().kind == T::LBracket) {
        take();
        auto label = label_or();
        expect(T::RBracket, "']'");
        const std::size_t target = expect_int("edge target");
        if (target >= n) throw HoaError(Kind::Syntax, "edge target out of range");
        if (peek().kind == T::LBrace) throw HoaError(Kind::UnsupportedAcceptance, "transition-based acceptance marks");
        std::vector<Symbol> minterms;
        for (std::size_t s = 0; s < letters; ++s)
          if (label->eval(static_cast<Symbol>(s))) minterms.push_back(static_cast<Symbol>(s));
        edges[q].push_back(Edge{Guard::from_minterms(std::move(minterms), atoms_.size()), static_cast<StateId>(target)});
      }
      if (peek().kind == T::Int) throw HoaError(Kind::Syntax, "implicit edges are not supported");
    }
    expect(T::End, "--END--");
    for (std::size_t q = 0; q < n; ++q)
      if (!declared[q]) throw HoaError(Kind::Incomplete, "state " + std::to_string(q) + " has no body");
    if (auto [defect, why] = find_defect(edges, atoms_.size()); defect != DraDefect::None)
      throw HoaError(defect == DraDefect::Nondeterministic ? Kind::Nondeterministic : Kind::Incomplete, why);
    return Dra(atoms_, std::move(edges), static_cast<StateId>(*start_), std::move(pairs), std::move(names));
  }

  using RabinPairs = std::vector<RabinPair>;

  std::vector<Tok> t_;
  std::size_t i_ = 0;
  std::optional<std::size_t> states_, start_, acc_name_pairs_;
  bool saw_ap_ = false;
  AtomTable atoms_;
  std::size_t acc_sets_ = 0;
  std::vector<std::vector<AccAtom>> acceptance_;
};

}  // namespace

Dra import_hoa(std::string_view text) { return Reader(tokenize(text)).run(); }

}  // namespace ltlrl
