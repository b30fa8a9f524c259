#pragma once

// Bookkeeping that ties word-level results to statements about the surfaces
// E(n)_{p,q}: admissible lemma parameters, the no-1-handle threshold table,
// Euler-characteristic handle counts, and normalized multiplicity data.

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "handleword/error.hpp"
#include "handleword/word.hpp"

namespace handleword {

/// q is carried as an opaque integer; only p, h2, h3 are constrained.
struct LemmaParams {
  std::int64_t p = 2;
  std::int64_t q = 0;
  std::int64_t h2 = 0;
  std::int64_t h3 = 0;
};

inline bool validate_lemma_params(const LemmaParams& lp) { return lp.p > 1 && lp.h2 >= 0 && lp.h3 >= 0; }

/// Least n for which E(n)_{p,p+1} is known to admit a decomposition without
/// 1-handles.
struct ThresholdEntry {
  std::int64_t p;
  std::int64_t min_n;
};

inline constexpr std::array<ThresholdEntry, 4> kThresholds = {{{5, 4}, {6, 5}, {7, 9}, {8, 24}}};

inline std::optional<std::int64_t> claim_threshold(std::int64_t p) {
  for (const ThresholdEntry& e : kThresholds) {
    if (e.p == p) return e.min_n;
  }
  return std::nullopt;
}

struct TheoremClaim {
  std::int64_t n = 1;
  std::int64_t p = 2;
  bool holds = false;
  std::optional<std::int64_t> threshold;  // empty: p is not covered
  friend bool operator==(const TheoremClaim&, const TheoremClaim&) = default;
};

inline TheoremClaim theorem_claim(std::int64_t n, std::int64_t p) {
  if (n < 1 || p < 2) {
    throw Error(ErrorCode::Precondition, "claims need n >= 1 and p >= 2, got n=" + std::to_string(n) +
                                             " p=" + std::to_string(p));
  }
  TheoremClaim c{n, p, false, claim_threshold(p)};
  c.holds = c.threshold && n >= *c.threshold;
  return c;
}

/// `E(<n>)_{<p>,<p+1>}: no-1-handles=<bool> threshold=<t> source=Theorem1.2`.
inline std::string format_claim(const TheoremClaim& c) {
  return "E(" + std::to_string(c.n) + ")_{" + std::to_string(c.p) + "," + std::to_string(c.p + 1) +
         "}: no-1-handles=" + (c.holds ? "true" : "false") +
         " threshold=" + (c.threshold ? std::to_string(*c.threshold) : std::string("NOT_COVERED")) +
         " source=Theorem1.2";
}

inline bool coprimality_check(std::int64_t p, std::int64_t q) { return p >= 2 && q >= 2 && std::gcd(p, q) == 1; }

/// Number of 2-handles in a closed decomposition with Euler characteristic
/// 12n: 1 - h1 + h2 - h3 + 1 = 12n.
inline std::int64_t expected_two_handles(std::int64_t n, std::int64_t h1, std::int64_t h3) {
  if (n < 1 || h1 < 0 || h3 < 0) throw Error(ErrorCode::Precondition, "need n >= 1 and h1, h3 >= 0");
  return 12 * n - 2 + h1 + h3;
}

struct LogTransformSpec {
  std::int64_t n = 1;
  std::vector<std::int64_t> multiplicities;  // ascending, no 1s
  bool dropped_trivial = false;  // set when multiplicity-1 entries were removed
  friend bool operator==(const LogTransformSpec&, const LogTransformSpec&) = default;
};

/// Sorts the multiplicities and drops the ones equal to 1. A multiplicity-1
/// transformation is never performed in the source material, so the drop is
/// a convention; `dropped_trivial` flags it for reports.
inline LogTransformSpec canonical_log_spec(std::int64_t n, std::vector<std::int64_t> mults) {
  if (n < 1) throw Error(ErrorCode::Precondition, "n must be at least 1");
  for (std::int64_t m : mults) {
    if (m < 1) throw Error(ErrorCode::Precondition, "multiplicities must be at least 1");
  }
  LogTransformSpec s{n, {}, false};
  std::sort(mults.begin(), mults.end());
  for (std::int64_t m : mults) {
    if (m == 1) s.dropped_trivial = true;
    else s.multiplicities.push_back(m);
  }
  return s;
}

/// No textual rule maps a goal-pattern word to lemma parameters (q, h2, h3),
/// so the request is always refused.
[[noreturn]] inline LemmaParams lemma_params_from_pattern(const Word& w, std::size_t p) {
  throw Error(ErrorCode::NotDerivable, "no textual correspondence from pattern word '" + w.str() + "' (p=" +
                                           std::to_string(p) + ") to lemma parameters");
}

}  // namespace handleword
