#pragma once

// Integer expressions of degree at most one in named variables, and words
// whose block repetition counts are such expressions, e.g. (ab)^{5n-9}.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "handleword/error.hpp"
#include "handleword/parse.hpp"
#include "handleword/word.hpp"

namespace handleword {

using Binding = std::map<std::string, std::int64_t, std::less<>>;

class AffineExpr {
 public:
  AffineExpr() = default;
  AffineExpr(std::int64_t constant) : constant_(constant) {}  // NOLINT: implicit by intent

  static AffineExpr var(std::string name, std::int64_t coeff = 1) {
    AffineExpr e;
    if (coeff != 0) e.coeffs_.emplace(std::move(name), coeff);
    return e;
  }

  std::int64_t constant() const noexcept { return constant_; }
  const std::map<std::string, std::int64_t, std::less<>>& coefficients() const noexcept { return coeffs_; }

  std::int64_t coeff(std::string_view name) const {
    auto it = coeffs_.find(name);
    return it == coeffs_.end() ? 0 : it->second;
  }

  bool is_constant() const noexcept { return coeffs_.empty(); }

  std::set<std::string> variables() const {
    std::set<std::string> out;
    for (const auto& [name, c] : coeffs_) out.insert(name);
    return out;
  }

  std::int64_t eval(const Binding& binding) const {
    std::int64_t v = constant_;
    for (const auto& [name, c] : coeffs_) {
      auto it = binding.find(name);
      if (it == binding.end()) throw Error(ErrorCode::UnboundVariable, "variable '" + name + "' is not bound");
      v += c * it->second;
    }
    return v;
  }

  /// Replaces `name` by `value` (itself affine).
  AffineExpr substitute(std::string_view name, const AffineExpr& value) const {
    auto it = coeffs_.find(name);
    if (it == coeffs_.end()) return *this;
    AffineExpr rest = *this;
    std::int64_t c = it->second;
    rest.coeffs_.erase(std::string(name));
    return rest + value * c;
  }

  AffineExpr& operator+=(const AffineExpr& rhs) {
    constant_ += rhs.constant_;
    for (const auto& [name, c] : rhs.coeffs_) {
      auto& slot = coeffs_[name];
      slot += c;
      if (slot == 0) coeffs_.erase(name);
    }
    return *this;
  }
  AffineExpr& operator-=(const AffineExpr& rhs) { return *this += rhs * -1; }
  AffineExpr& operator*=(std::int64_t k) {
    if (k == 0) {
      coeffs_.clear();
      constant_ = 0;
      return *this;
    }
    constant_ *= k;
    for (auto& [name, c] : coeffs_) c *= k;
    return *this;
  }

  friend AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
  friend AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
  friend AffineExpr operator*(AffineExpr a, std::int64_t k) { return a *= k; }
  friend AffineExpr operator*(std::int64_t k, AffineExpr a) { return a *= k; }
  AffineExpr operator-() const { return *this * -1; }

  /// Product of two expressions; defined only when one side is constant.
  static AffineExpr multiply(const AffineExpr& x, const AffineExpr& y) {
    if (x.is_constant()) return y * x.constant_;
    if (y.is_constant()) return x * y.constant_;
    throw Error(ErrorCode::NonAffine, "product of '" + x.str() + "' and '" + y.str() + "' is not affine");
  }

  /// Canonical text: variable terms in name order, then the constant; `c*n+d`.
  std::string str() const {
    std::string out;
    for (const auto& [name, c] : coeffs_) {
      if (c < 0) out += "-";
      else if (!out.empty()) out += "+";
      std::int64_t mag = c < 0 ? -c : c;
      if (mag != 1) out += std::to_string(mag) + "*";
      out += name;
    }
    if (constant_ != 0 || out.empty()) {
      if (constant_ >= 0 && !out.empty()) out += "+";
      out += std::to_string(constant_);
    }
    return out;
  }

  friend bool operator==(const AffineExpr&, const AffineExpr&) = default;

 private:
  std::int64_t constant_ = 0;
  std::map<std::string, std::int64_t, std::less<>> coeffs_;  // no zero entries
};

inline std::int64_t eval(const AffineExpr& e, const Binding& binding) { return e.eval(binding); }

namespace detail {

inline AffineExpr parse_affine_sum(Cursor& cur);

inline AffineExpr parse_affine_factor(Cursor& cur) {
  cur.skip_ws();
  char c = cur.peek();
  if (c == '(') {
    ++cur.pos;
    AffineExpr inner = parse_affine_sum(cur);
    cur.expect(')');
    return inner;
  }
  if (std::isdigit(static_cast<unsigned char>(c))) {
    AffineExpr lit = cur.integer();
    // Juxtaposition without whitespace multiplies: 5n, 2(n-1).
    char next = cur.peek();
    if (Cursor::ident_start(next) || next == '(') return AffineExpr::multiply(lit, parse_affine_factor(cur));
    return lit;
  }
  if (Cursor::ident_start(c)) return AffineExpr::var(cur.identifier());
  cur.fail("expected integer, variable or '('");
}

inline AffineExpr parse_affine_term(Cursor& cur) {
  AffineExpr value = parse_affine_factor(cur);
  while (cur.consume('*')) {
    std::size_t at = cur.pos;
    AffineExpr rhs = parse_affine_factor(cur);
    if (!value.is_constant() && !rhs.is_constant()) {
      cur.pos = at;
      cur.fail("product of two non-constant terms is not affine", ErrorCode::NonAffine);
    }
    value = AffineExpr::multiply(value, rhs);
  }
  return value;
}

inline AffineExpr parse_affine_sum(Cursor& cur) {
  AffineExpr value;
  cur.skip_ws();
  if (cur.consume('-')) value -= parse_affine_term(cur);
  else {
    cur.consume('+');
    value += parse_affine_term(cur);
  }
  for (;;) {
    cur.skip_ws();
    // `..` is a range separator in derivation files, never an operator.
    if (cur.peek() == '+') {
      ++cur.pos;
      value += parse_affine_term(cur);
    } else if (cur.peek() == '-') {
      ++cur.pos;
      value -= parse_affine_term(cur);
    } else {
      return value;
    }
  }
}

}  // namespace detail

/// Parses the whole of `text` as an affine expression.
inline AffineExpr parse_affine(std::string_view text) {
  detail::Cursor cur{text};
  AffineExpr e = detail::parse_affine_sum(cur);
  cur.skip_ws();
  if (!cur.at_end()) cur.fail("unexpected trailing input");
  return e;
}

// ---------------------------------------------------------------------------
// Threshold of a family of single-variable constraints e(n) >= 0

/// Smallest n for which every constraint is non-negative.
struct Threshold {
  enum class Kind { Bounded, UnboundedBelow, Infeasible };
  Kind kind = Kind::Bounded;
  std::int64_t n = 1;

  static Threshold at(std::int64_t v) { return {Kind::Bounded, v}; }
  bool bounded() const { return kind == Kind::Bounded; }
  friend bool operator==(const Threshold&, const Threshold&) = default;
};

/// Global floor: the surfaces are indexed by n >= 1.
inline constexpr std::int64_t kGlobalFloorN = 1;

namespace detail {
inline std::int64_t ceil_div(std::int64_t num, std::int64_t den) {  // den > 0
  std::int64_t q = num / den;
  if (num % den != 0 && num > 0) ++q;
  return q;
}
}  // namespace detail

/// An expression with a negative n-coefficient admits no lower threshold
/// (UnboundedBelow); a negative constant with no n-term is Infeasible.
inline Threshold min_nonneg_n(const std::vector<AffineExpr>& constraints, std::string_view var = "n") {
  std::int64_t best = kGlobalFloorN;
  for (const AffineExpr& e : constraints) {
    for (const auto& [name, c] : e.coefficients()) {
      if (name != var) {
        throw Error(ErrorCode::Precondition,
                    "constraint '" + e.str() + "' mentions variable other than " + std::string(var));
      }
    }
    std::int64_t c = e.coeff(var);
    if (c < 0) return {Threshold::Kind::UnboundedBelow, 0};
    if (c == 0) {
      if (e.constant() < 0) return {Threshold::Kind::Infeasible, 0};
      continue;
    }
    best = std::max(best, detail::ceil_div(-e.constant(), c));
  }
  return Threshold::at(best);
}

// ---------------------------------------------------------------------------
// Parametric words

struct Segment {
  Word block;  // non-empty
  AffineExpr count;
  friend bool operator==(const Segment&, const Segment&) = default;
};

class ParamWord {
 public:
  ParamWord() = default;
  explicit ParamWord(std::vector<Segment> segments) : segments_(std::move(segments)) {
    for (const Segment& s : segments_) {
      if (s.block.empty()) throw Error(ErrorCode::Precondition, "parametric word segment with empty block");
    }
  }

  const std::vector<Segment>& segments() const noexcept { return segments_; }

  std::set<std::string> free_variables() const {
    std::set<std::string> out;
    for (const Segment& s : segments_) out.merge(s.count.variables());
    return out;
  }

  /// Repetition counts that must be non-negative for instantiation.
  std::vector<AffineExpr> count_constraints() const {
    std::vector<AffineExpr> out;
    for (const Segment& s : segments_) out.push_back(s.count);
    return out;
  }

  std::string str() const {
    std::string out;
    for (const Segment& s : segments_) {
      bool group = s.block.size() > 1;
      if (s.count == AffineExpr(1)) {
        out += s.block.str();
        continue;
      }
      out += group ? "(" + s.block.str() + ")" : s.block.str();
      out += s.count.is_constant() && s.count.constant() >= 0 ? "^" + s.count.str() : "^{" + s.count.str() + "}";
    }
    return out;
  }

  friend bool operator==(const ParamWord&, const ParamWord&) = default;

 private:
  std::vector<Segment> segments_;
};

inline Word instantiate(const ParamWord& pw, const Binding& binding) {
  Word out;
  const auto& segs = pw.segments();
  for (std::size_t i = 0; i < segs.size(); ++i) {
    std::int64_t times = segs[i].count.eval(binding);
    if (times < 0) {
      throw Error(ErrorCode::NegativeCount, "segment " + std::to_string(i) + " (" + segs[i].block.str() +
                                                ")^{" + segs[i].count.str() + "} has count " +
                                                std::to_string(times));
    }
    out += repeat(segs[i].block, static_cast<std::size_t>(times));
  }
  return out;
}

struct SymbolicCounts {
  AffineExpr length;
  AffineExpr a;
  AffineExpr b;
  friend bool operator==(const SymbolicCounts&, const SymbolicCounts&) = default;
};

inline SymbolicCounts symbolic_counts(const ParamWord& pw) {
  SymbolicCounts out;
  for (const Segment& s : pw.segments()) {
    LetterCounts c = letter_counts(s.block);
    out.length += s.count * static_cast<std::int64_t>(s.block.size());
    out.a += s.count * static_cast<std::int64_t>(c.a);
    out.b += s.count * static_cast<std::int64_t>(c.b);
  }
  return out;
}

}  // namespace handleword
