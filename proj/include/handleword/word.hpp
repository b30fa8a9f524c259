#pragma once

// Concrete words over {a, b} and the positional rewriting moves on them.
//
// A word stands for a row of 2-handles in a Kirby diagram: `a` is a vertical
// handle, `b` a horizontal one. Every move here replaces a window by a word of
// the same length; the only length-changing operation is the deletion of
// marked letters.

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "handleword/error.hpp"

namespace handleword {

enum class Letter : std::uint8_t { A, B };

constexpr char to_char(Letter l) { return l == Letter::A ? 'a' : 'b'; }

class Word {
 public:
  Word() = default;
  explicit Word(std::vector<Letter> letters) : letters_(std::move(letters)) {}

  /// Parses the literal text form: lowercase `a`/`b`, no whitespace.
  static Word parse(std::string_view text) {
    std::vector<Letter> out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
      switch (text[i]) {
        case 'a': out.push_back(Letter::A); break;
        case 'b': out.push_back(Letter::B); break;
        default:
          throw Error(ErrorCode::InvalidLiteral,
                      "unexpected character '" + std::string(1, text[i]) + "' at offset " +
                          std::to_string(i) + " in word literal");
      }
    }
    return Word(std::move(out));
  }

  std::size_t size() const noexcept { return letters_.size(); }
  bool empty() const noexcept { return letters_.empty(); }
  Letter operator[](std::size_t i) const { return letters_[i]; }
  std::span<const Letter> letters() const noexcept { return letters_; }

  Word subword(std::size_t pos, std::size_t len) const {
    return Word(std::vector<Letter>(letters_.begin() + static_cast<std::ptrdiff_t>(pos),
                                    letters_.begin() + static_cast<std::ptrdiff_t>(pos + len)));
  }

  bool matches_at(std::size_t pos, const Word& pattern) const {
    if (pos + pattern.size() > size()) return false;
    return std::equal(pattern.letters_.begin(), pattern.letters_.end(),
                      letters_.begin() + static_cast<std::ptrdiff_t>(pos));
  }

  void push_back(Letter l) { letters_.push_back(l); }

  Word& operator+=(const Word& rhs) {
    letters_.insert(letters_.end(), rhs.letters_.begin(), rhs.letters_.end());
    return *this;
  }
  friend Word operator+(Word lhs, const Word& rhs) { return lhs += rhs; }

  /// Overwrites letters starting at `pos` with `with` (no bounds check).
  void overwrite(std::size_t pos, const Word& with) {
    std::copy(with.letters_.begin(), with.letters_.end(),
              letters_.begin() + static_cast<std::ptrdiff_t>(pos));
  }

  std::string str() const {
    std::string s;
    s.reserve(size());
    for (Letter l : letters_) s.push_back(to_char(l));
    return s;
  }

  friend bool operator==(const Word&, const Word&) = default;
  friend auto operator<=>(const Word&, const Word&) = default;

 private:
  std::vector<Letter> letters_;
};

inline Word repeat(const Word& block, std::size_t times) {
  Word out;
  for (std::size_t i = 0; i < times; ++i) out += block;
  return out;
}

/// Two bits per letter (a = 01, b = 10, 00 past the end), 32 letters per limb.
/// The length is stored alongside, so the map to and from Word is a bijection.
class PackedWord {
 public:
  PackedWord() = default;

  explicit PackedWord(const Word& w) : size_(w.size()), limbs_((w.size() + 31) / 32, 0) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      std::uint64_t code = w[i] == Letter::A ? 1u : 2u;
      limbs_[i / 32] |= code << (2 * (i % 32));
    }
  }

  std::size_t size() const noexcept { return size_; }

  Letter at(std::size_t i) const {
    return ((limbs_[i / 32] >> (2 * (i % 32))) & 3u) == 1u ? Letter::A : Letter::B;
  }

  Word unpack() const {
    std::vector<Letter> out(size_);
    for (std::size_t i = 0; i < size_; ++i) out[i] = at(i);
    return Word(std::move(out));
  }

  std::size_t hash() const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ull ^ size_;
    for (std::uint64_t limb : limbs_) {
      h ^= limb + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }

  friend bool operator==(const PackedWord&, const PackedWord&) = default;
  friend auto operator<=>(const PackedWord&, const PackedWord&) = default;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> limbs_;
};

struct PackedWordHash {
  std::size_t operator()(const PackedWord& p) const noexcept { return p.hash(); }
};

// ---------------------------------------------------------------------------
// Rules

enum class RuleId : std::uint8_t { BraidFwd, BraidRev, R3, R3Rev, R4, R4Rev };

/// Fixed rule order; successor enumeration ties are broken by this order.
inline constexpr std::array<RuleId, 6> kAllRules = {RuleId::BraidFwd, RuleId::BraidRev,
                                                    RuleId::R3,       RuleId::R3Rev,
                                                    RuleId::R4,       RuleId::R4Rev};
inline constexpr std::array<RuleId, 2> kBraidRules = {RuleId::BraidFwd, RuleId::BraidRev};

struct RuleSpec {
  RuleId id;
  std::string_view lhs;
  std::string_view rhs;
  std::string_view dsl;  // spelling inside derivation files
};

inline constexpr std::array<RuleSpec, 6> kRuleSpecs = {{
    {RuleId::BraidFwd, "aba", "bab", "braid fwd"},
    {RuleId::BraidRev, "bab", "aba", "braid rev"},
    {RuleId::R3, "ababababab", "aaabaaabaa", "macro R3"},
    {RuleId::R3Rev, "aaabaaabaa", "ababababab", "macro R3'"},
    {RuleId::R4, "ababababab", "bbabbbabbb", "macro R4"},
    {RuleId::R4Rev, "bbabbbabbb", "ababababab", "macro R4'"},
}};

constexpr const RuleSpec& rule_spec(RuleId r) { return kRuleSpecs[static_cast<std::size_t>(r)]; }

constexpr RuleId partner(RuleId r) {
  switch (r) {
    case RuleId::BraidFwd: return RuleId::BraidRev;
    case RuleId::BraidRev: return RuleId::BraidFwd;
    case RuleId::R3: return RuleId::R3Rev;
    case RuleId::R3Rev: return RuleId::R3;
    case RuleId::R4: return RuleId::R4Rev;
    case RuleId::R4Rev: return RuleId::R4;
  }
  return r;
}

constexpr bool is_macro(RuleId r) { return r != RuleId::BraidFwd && r != RuleId::BraidRev; }

inline std::string_view rule_name(RuleId r) { return rule_spec(r).dsl; }

namespace detail {
struct RuleWords {
  Word lhs, rhs;
};
inline const std::array<RuleWords, 6>& rule_words() {
  static const std::array<RuleWords, 6> table = [] {
    std::array<RuleWords, 6> t;
    for (std::size_t i = 0; i < kRuleSpecs.size(); ++i) {
      t[i] = {Word::parse(kRuleSpecs[i].lhs), Word::parse(kRuleSpecs[i].rhs)};
    }
    return t;
  }();
  return table;
}
}  // namespace detail

inline const Word& rule_lhs(RuleId r) { return detail::rule_words()[static_cast<std::size_t>(r)].lhs; }
inline const Word& rule_rhs(RuleId r) { return detail::rule_words()[static_cast<std::size_t>(r)].rhs; }

inline bool applicable(const Word& w, RuleId rule, std::size_t pos) {
  return w.matches_at(pos, rule_lhs(rule));
}

/// Replaces the left-hand side of `rule` found at `pos` by its right-hand side.
inline Word apply_rule(const Word& w, RuleId rule, std::size_t pos) {
  const Word& lhs = rule_lhs(rule);
  if (pos > w.size() || lhs.size() > w.size() - pos) {
    throw Error(ErrorCode::OutOfRange, std::string(rule_name(rule)) + " at " +
                                           std::to_string(pos) + " exceeds word of length " +
                                           std::to_string(w.size()));
  }
  if (!w.matches_at(pos, lhs)) {
    throw Error(ErrorCode::PatternMismatch,
                std::string(rule_name(rule)) + " at " + std::to_string(pos) + ": found '" +
                    w.subword(pos, lhs.size()).str() + "', expected '" + lhs.str() + "'");
  }
  Word out = w;
  out.overwrite(pos, rule_rhs(rule));
  return out;
}

struct Move {
  RuleId rule;
  std::size_t pos;
  friend bool operator==(const Move&, const Move&) = default;
};

/// All applicable moves, by position then by the fixed rule order.
inline std::vector<Move> enumerate_moves(const Word& w, std::span<const RuleId> rules) {
  std::array<bool, 6> enabled{};
  for (RuleId r : rules) enabled[static_cast<std::size_t>(r)] = true;
  std::vector<Move> out;
  for (std::size_t pos = 0; pos < w.size(); ++pos) {
    for (RuleId r : kAllRules) {
      if (enabled[static_cast<std::size_t>(r)] && applicable(w, r, pos)) out.push_back({r, pos});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Marks and deletion

class MarkedWord {
 public:
  MarkedWord(Word word, std::vector<std::size_t> marks) : word_(std::move(word)), marks_(std::move(marks)) {
    std::sort(marks_.begin(), marks_.end());
    if (std::adjacent_find(marks_.begin(), marks_.end()) != marks_.end()) {
      throw Error(ErrorCode::InvalidMarks, "duplicate mark");
    }
    if (!marks_.empty() && marks_.back() >= word_.size()) {
      throw Error(ErrorCode::InvalidMarks, "mark " + std::to_string(marks_.back()) +
                                               " outside word of length " +
                                               std::to_string(word_.size()));
    }
  }

  const Word& word() const noexcept { return word_; }
  const std::vector<std::size_t>& marks() const noexcept { return marks_; }

 private:
  Word word_;
  std::vector<std::size_t> marks_;  // sorted, distinct
};

inline Word delete_marked(const MarkedWord& mw) {
  std::vector<Letter> out;
  out.reserve(mw.word().size() - mw.marks().size());
  auto next = mw.marks().begin();
  for (std::size_t i = 0; i < mw.word().size(); ++i) {
    if (next != mw.marks().end() && *next == i) {
      ++next;
      continue;
    }
    out.push_back(mw.word()[i]);
  }
  return Word(std::move(out));
}

struct LetterCounts {
  std::size_t a = 0;
  std::size_t b = 0;
  friend bool operator==(const LetterCounts&, const LetterCounts&) = default;
};

inline LetterCounts letter_counts(const Word& w) {
  LetterCounts c;
  for (Letter l : w.letters()) (l == Letter::A ? c.a : c.b)++;
  return c;
}

// ---------------------------------------------------------------------------
// Goal pattern a^{p-1} b^m a^p b^k (ab)^j

struct GoalMatch {
  std::size_t m = 0;
  std::size_t k = 0;
  std::size_t j = 0;
  friend bool operator==(const GoalMatch&, const GoalMatch&) = default;
};

namespace detail {
inline std::size_t run_length(const Word& w, std::size_t from, Letter l) {
  std::size_t i = from;
  while (i < w.size() && w[i] == l) ++i;
  return i - from;
}

// Number of `ab` repetitions if w[from..] is exactly (ab)^j.
inline std::optional<std::size_t> ab_power(const Word& w, std::size_t from) {
  if ((w.size() - from) % 2 != 0) return std::nullopt;
  for (std::size_t i = from; i < w.size(); ++i) {
    if (w[i] != ((i - from) % 2 == 0 ? Letter::A : Letter::B)) return std::nullopt;
  }
  return (w.size() - from) / 2;
}
}  // namespace detail

/// Decomposes w as a^{p-1} b^m a^p b^k (ab)^j with m >= 1. The decomposition
/// is unique: the second a-run has length p (then k follows) or p+1 (then
/// k = 0 and the extra a opens the (ab)^j tail).
inline std::optional<GoalMatch> match_goal_pattern(const Word& w, std::size_t p) {
  if (p < 2) return std::nullopt;
  std::size_t i = 0;
  if (detail::run_length(w, i, Letter::A) != p - 1) return std::nullopt;
  i += p - 1;
  std::size_t m = detail::run_length(w, i, Letter::B);
  if (m == 0) return std::nullopt;
  i += m;
  std::size_t second = detail::run_length(w, i, Letter::A);
  if (second == p) {
    i += p;
    std::size_t k = detail::run_length(w, i, Letter::B);
    auto j = detail::ab_power(w, i + k);
    if (!j) return std::nullopt;
    return GoalMatch{m, k, *j};
  }
  if (second == p + 1) {
    auto j = detail::ab_power(w, i + p);
    if (!j || *j == 0) return std::nullopt;
    return GoalMatch{m, 0, *j};
  }
  return std::nullopt;
}

struct AnyGoalMatch {
  std::size_t p = 0;
  GoalMatch match;
  friend bool operator==(const AnyGoalMatch&, const AnyGoalMatch&) = default;
};

/// The leading a-run fixes p, so at most one p can match.
inline std::optional<AnyGoalMatch> match_any_goal_pattern(const Word& w) {
  std::size_t lead = detail::run_length(w, 0, Letter::A);
  if (lead == 0) return std::nullopt;
  if (auto m = match_goal_pattern(w, lead + 1)) return AnyGoalMatch{lead + 1, *m};
  return std::nullopt;
}

}  // namespace handleword

template <>
struct std::hash<handleword::PackedWord> {
  std::size_t operator()(const handleword::PackedWord& p) const noexcept { return p.hash(); }
};
