#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

#include "handleword/word.hpp"

namespace handleword::testing {

inline Word W(std::string_view s) { return Word::parse(s); }

inline Word random_word(std::mt19937_64& rng, std::size_t len) {
  Word w;
  for (std::size_t i = 0; i < len; ++i) w.push_back((rng() & 1u) ? Letter::B : Letter::A);
  return w;
}

/// The word whose letters are the low `len` bits of `bits`, bit i -> letter i.
inline Word word_from_bits(std::uint64_t bits, std::size_t len) {
  Word w;
  for (std::size_t i = 0; i < len; ++i) w.push_back(((bits >> i) & 1u) ? Letter::B : Letter::A);
  return w;
}

/// a^{p-1} b^m a^p b^k (ab)^j with random m >= 1, k, j and length <= max_len.
inline Word random_pattern_word(std::mt19937_64& rng, std::size_t p, std::size_t max_len) {
  std::size_t fixed = 2 * p - 1;
  std::size_t room = max_len - fixed;  // >= 1
  std::size_t m = 1 + rng() % room;
  room -= m;
  std::size_t k = room ? rng() % (room + 1) : 0;
  room -= k;
  std::size_t j = rng() % (room / 2 + 1);
  Word w = repeat(Word::parse("a"), p - 1);
  w += repeat(Word::parse("b"), m);
  w += repeat(Word::parse("a"), p);
  w += repeat(Word::parse("b"), k);
  w += repeat(Word::parse("ab"), j);
  return w;
}

/// Applies up to `k` uniformly chosen applicable moves; stops early at a word
/// with no applicable move.
inline Word scramble(std::mt19937_64& rng, Word w, std::size_t k, std::span<const RuleId> rules) {
  for (std::size_t i = 0; i < k; ++i) {
    auto moves = enumerate_moves(w, rules);
    if (moves.empty()) break;
    const Move& m = moves[rng() % moves.size()];
    w = apply_rule(w, m.rule, m.pos);
  }
  return w;
}

}  // namespace handleword::testing
