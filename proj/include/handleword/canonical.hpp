#pragma once

// Left-greedy (Delta-greedy) normal form for positive words in the monoid
// <a, b | aba = bab>. Two positive words are equal in the monoid exactly when
// their normal forms coincide, which makes this the soundness oracle for every
// rewriting rule and derivation checkpoint.
//
// The monoid has six simple elements, the left divisors of Delta = aba:
//   e, a, b, ab, ba, Delta.
// A factor sequence s1 s2 ... sk is left-weighted when, for each adjacent pair,
// no non-trivial simple t with s_i t simple also left-divides s_{i+1}.

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "handleword/error.hpp"
#include "handleword/word.hpp"

namespace handleword {

enum class Simple : std::uint8_t { E, A, B, AB, BA, Delta };

inline constexpr std::size_t kSimpleCount = 6;
inline constexpr std::array<Simple, kSimpleCount> kSimples = {Simple::E,  Simple::A,  Simple::B,
                                                             Simple::AB, Simple::BA, Simple::Delta};

namespace garside {

constexpr std::size_t idx(Simple s) { return static_cast<std::size_t>(s); }

/// Canonical spelling of each simple element.
inline constexpr std::array<std::string_view, kSimpleCount> kSpelling = {"", "a", "b", "ab", "ba", "aba"};

/// Display names used in printed normal forms.
inline constexpr std::array<std::string_view, kSimpleCount> kDisplay = {"ε", "a", "b", "ab", "ba", "Δ"};

constexpr std::size_t length(Simple s) { return kSpelling[idx(s)].size(); }

// kDivides[x][y]: x left-divides y.
inline constexpr std::array<std::array<bool, kSimpleCount>, kSimpleCount> kDivides = {{
    //          e      a      b      ab     ba     D
    /* e  */ {{true, true, true, true, true, true}},
    /* a  */ {{false, true, false, true, false, true}},
    /* b  */ {{false, false, true, false, true, true}},
    /* ab */ {{false, false, false, true, false, true}},
    /* ba */ {{false, false, false, false, true, true}},
    /* D  */ {{false, false, false, false, false, true}},
}};

inline constexpr std::uint8_t kNone = 0xff;

// kProduct[x][y]: the simple x*y, or kNone when the product is not simple.
inline constexpr std::array<std::array<std::uint8_t, kSimpleCount>, kSimpleCount> kProduct = {{
    //        e  a      b      ab     ba     D
    /* e  */ {{0, 1, 2, 3, 4, 5}},
    /* a  */ {{1, kNone, 3, kNone, 5, kNone}},
    /* b  */ {{2, 4, kNone, 5, kNone, kNone}},
    /* ab */ {{3, 5, kNone, kNone, kNone, kNone}},
    /* ba */ {{4, kNone, 5, kNone, kNone, kNone}},
    /* D  */ {{5, kNone, kNone, kNone, kNone, kNone}},
}};

constexpr bool divides(Simple x, Simple y) { return kDivides[idx(x)][idx(y)]; }

constexpr bool product_is_simple(Simple x, Simple y) { return kProduct[idx(x)][idx(y)] != kNone; }

constexpr Simple product(Simple x, Simple y) { return static_cast<Simple>(kProduct[idx(x)][idx(y)]); }

/// Right complement: the simple c with x * c = Delta.
constexpr Simple complement(Simple x) {
  for (Simple c : kSimples) {
    if (product_is_simple(x, c) && product(x, c) == Simple::Delta) return c;
  }
  return Simple::E;  // unreachable for a consistent table
}

/// Greatest common left divisor.
constexpr Simple left_gcd(Simple x, Simple y) {
  Simple best = Simple::E;
  for (Simple t : kSimples) {
    if (divides(t, x) && divides(t, y) && length(t) > length(best)) best = t;
  }
  return best;
}

/// The simple q with t * q = y; requires divides(t, y).
constexpr Simple left_quotient(Simple t, Simple y) {
  for (Simple q : kSimples) {
    if (product_is_simple(t, q) && product(t, q) == y) return q;
  }
  return Simple::E;  // unreachable when t divides y
}

constexpr bool left_weighted(Simple x, Simple y) { return left_gcd(complement(x), y) == Simple::E; }

static_assert(complement(Simple::E) == Simple::Delta);
static_assert(complement(Simple::A) == Simple::BA);
static_assert(complement(Simple::AB) == Simple::A);
static_assert(left_gcd(Simple::AB, Simple::BA) == Simple::E);
static_assert(left_quotient(Simple::A, Simple::Delta) == Simple::BA);

}  // namespace garside

class GarsideNF {
 public:
  GarsideNF() = default;

  /// Wraps an already left-weighted factor list (no identity factors).
  explicit GarsideNF(std::vector<Simple> factors) : factors_(std::move(factors)) {}

  const std::vector<Simple>& factors() const noexcept { return factors_; }

  std::size_t delta_power() const {
    std::size_t k = 0;
    while (k < factors_.size() && factors_[k] == Simple::Delta) ++k;
    return k;
  }

  bool is_left_weighted() const {
    for (Simple s : factors_) {
      if (s == Simple::E) return false;
    }
    for (std::size_t i = 0; i + 1 < factors_.size(); ++i) {
      if (!garside::left_weighted(factors_[i], factors_[i + 1])) return false;
    }
    return true;
  }

  /// Concatenation of the factors' canonical spellings.
  Word to_word() const {
    std::string s;
    for (Simple f : factors_) s += garside::kSpelling[garside::idx(f)];
    return Word::parse(s);
  }

  /// `Δ^k · s1 · s2 · …`; the Delta prefix is shown as a power, ε when empty.
  std::string str() const {
    std::size_t k = delta_power();
    std::string out;
    if (k > 0) out = "Δ^" + std::to_string(k);
    for (std::size_t i = k; i < factors_.size(); ++i) {
      if (!out.empty()) out += " · ";
      out += garside::kDisplay[garside::idx(factors_[i])];
    }
    return out.empty() ? std::string("ε") : out;
  }

  friend bool operator==(const GarsideNF&, const GarsideNF&) = default;

 private:
  std::vector<Simple> factors_;
};

namespace detail {

// Right-multiplies a left-weighted factor list by one simple and restores
// left-weightedness with a single right-to-left pass.
inline void multiply_simple(std::vector<Simple>& f, Simple s) {
  if (s == Simple::E) return;
  f.push_back(s);
  for (std::size_t i = f.size() - 1; i > 0; --i) {
    Simple& left = f[i - 1];
    Simple& right = f[i];
    Simple t = garside::left_gcd(garside::complement(left), right);
    if (t == Simple::E) break;
    left = garside::product(left, t);
    right = garside::left_quotient(t, right);
    if (right == Simple::E) f.erase(f.begin() + static_cast<std::ptrdiff_t>(i));
  }
}

}  // namespace detail

inline GarsideNF normal_form(const Word& w) {
  std::vector<Simple> f;
  f.reserve(w.size());
  for (Letter l : w.letters()) detail::multiply_simple(f, l == Letter::A ? Simple::A : Simple::B);
  return GarsideNF(std::move(f));
}

inline bool equivalent(const Word& w1, const Word& w2) {
  // Braid moves preserve length, so differing lengths never meet.
  if (w1.size() != w2.size()) return false;
  return normal_form(w1) == normal_form(w2);
}

/// Inverse of GarsideNF::str(). Rejects factor lists that are not already in
/// normal form.
inline GarsideNF parse_normal_form(std::string_view text) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
    return s;
  };
  text = trim(text);
  if (text == "ε") return GarsideNF{};
  constexpr std::string_view kDot = "·";
  constexpr std::string_view kDelta = "Δ";
  std::vector<Simple> factors;
  std::size_t start = 0;
  bool first = true;
  for (;;) {
    std::size_t dot = text.find(kDot, start);
    std::string_view tok = trim(text.substr(start, dot == std::string_view::npos ? dot : dot - start));
    if (first && tok.starts_with(std::string(kDelta) + "^")) {
      std::string_view digits = tok.substr(kDelta.size() + 1);
      if (digits.empty() || digits.find_first_not_of("0123456789") != std::string_view::npos) {
        throw Error(ErrorCode::InvalidLiteral, "bad Delta power '" + std::string(tok) + "'");
      }
      factors.insert(factors.end(), std::stoul(std::string(digits)), Simple::Delta);
    } else {
      bool found = false;
      for (Simple s : kSimples) {
        if (s != Simple::E && tok == garside::kDisplay[garside::idx(s)]) {
          factors.push_back(s);
          found = true;
        }
      }
      if (!found) throw Error(ErrorCode::InvalidLiteral, "unknown factor '" + std::string(tok) + "'");
    }
    first = false;
    if (dot == std::string_view::npos) break;
    start = dot + kDot.size();
  }
  GarsideNF nf(std::move(factors));
  if (!nf.is_left_weighted() || normal_form(nf.to_word()) != nf) {
    throw Error(ErrorCode::InvalidLiteral, "'" + std::string(text) + "' is not a normal form");
  }
  return nf;
}

/// Every word reachable from w by elementary braid moves (aba <-> bab).
/// Independent of the normal form machinery.
inline std::set<Word> closure_oracle(const Word& w, std::size_t max_states) {
  std::unordered_set<PackedWord, PackedWordHash> seen{PackedWord(w)};
  std::deque<Word> queue{w};
  std::set<Word> out{w};
  if (max_states < 1) throw Error(ErrorCode::BudgetExceeded, "closure budget is zero");
  while (!queue.empty()) {
    Word cur = std::move(queue.front());
    queue.pop_front();
    for (const Move& m : enumerate_moves(cur, kBraidRules)) {
      Word next = apply_rule(cur, m.rule, m.pos);
      if (seen.insert(PackedWord(next)).second) {
        if (seen.size() > max_states) {
          throw Error(ErrorCode::BudgetExceeded, "closure of '" + w.str() + "' exceeds " +
                                                     std::to_string(max_states) + " states");
        }
        out.insert(next);
        queue.push_back(std::move(next));
      }
    }
  }
  return out;
}

}  // namespace handleword
