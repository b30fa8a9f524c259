#pragma once

// Bounded search for rewrite paths between words. States are exact words
// (keyed by their packed encoding); monoid-equivalent words stay distinct.
// Successors are generated in position order, then rule order, and every
// strategy merges them in that order, so results never depend on the number
// of worker threads.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iterator>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "handleword/error.hpp"
#include "handleword/word.hpp"

namespace handleword {

enum class Strategy { BFS, IDDFS, GreedyBeam };

struct ExactWord {
  Word target;
};

struct GoalPattern {
  std::size_t p = 2;
};

using Goal = std::variant<ExactWord, GoalPattern>;

struct SearchConfig {
  std::vector<RuleId> rules{kBraidRules.begin(), kBraidRules.end()};
  std::size_t max_depth = 12;
  std::size_t max_states = 1'000'000;
  Strategy strategy = Strategy::BFS;
  std::size_t beam_width = 64;  // GreedyBeam only
  Goal goal = ExactWord{};
  unsigned workers = 1;
};

enum class Outcome { Found, Exhausted, BudgetExceeded };

constexpr std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Found: return "FOUND";
    case Outcome::Exhausted: return "EXHAUSTED";
    case Outcome::BudgetExceeded: return "BUDGET_EXCEEDED";
  }
  return "UNKNOWN";
}

struct SearchResult {
  Outcome outcome = Outcome::Exhausted;
  std::vector<Move> path;  // meaningful when Found
  std::size_t states_expanded = 0;
  std::size_t depth_reached = 0;
  friend bool operator==(const SearchResult&, const SearchResult&) = default;
};

inline void validate(const SearchConfig& cfg) {
  if (cfg.max_states < 1) throw Error(ErrorCode::Precondition, "max_states must be at least 1");
  if (cfg.strategy == Strategy::GreedyBeam && cfg.beam_width < 1) {
    throw Error(ErrorCode::Precondition, "beam width must be at least 1");
  }
  if (const auto* g = std::get_if<GoalPattern>(&cfg.goal); g && g->p < 2) {
    throw Error(ErrorCode::Precondition, "goal pattern needs p >= 2");
  }
}

/// ceil(mismatches / 3): an elementary move rewrites at most three letters.
inline std::size_t heuristic_distance(const Word& w, const Word& target) {
  if (w.size() != target.size()) {
    throw Error(ErrorCode::LengthMismatch, "lengths " + std::to_string(w.size()) + " and " +
                                               std::to_string(target.size()) + " differ");
  }
  std::size_t diff = 0;
  for (std::size_t i = 0; i < w.size(); ++i) diff += w[i] != target[i];
  return (diff + 2) / 3;
}

/// Least number of letter substitutions turning w into a word of the form
/// a^{p-1} b^m a^p b^k (ab)^j (m >= 1) of the same length; nullopt when no
/// such word has that length.
inline std::optional<std::size_t> pattern_mismatch(const Word& w, std::size_t p) {
  if (p < 2) return std::nullopt;
  // Automaton states: i leading a's read (0..p-1), then B1 (inside b^m),
  // A2(i) = p+i (i of the second a-run read), B2 (inside b^k), T1 (after the
  // a of an ab pair), T0 (pair complete).
  const std::size_t b1 = p, b2 = 2 * p + 1, t1 = 2 * p + 2, t0 = 2 * p + 3, count = 2 * p + 4;
  constexpr std::size_t kNo = std::numeric_limits<std::size_t>::max();
  auto step = [&](std::size_t s, Letter c) -> std::size_t {
    bool a = c == Letter::A;
    if (s < p - 1) return a ? s + 1 : kNo;
    if (s == p - 1) return a ? kNo : b1;
    if (s == b1) return a ? p + 1 : b1;
    if (s < 2 * p) return a ? s + 1 : kNo;
    if (s == 2 * p || s == b2) return a ? t1 : b2;
    if (s == t1) return a ? kNo : t0;
    return a ? t1 : kNo;  // t0
  };
  constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max() / 2;
  std::vector<std::size_t> cost(count, kInf), next(count);
  cost[0] = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    std::fill(next.begin(), next.end(), kInf);
    for (std::size_t s = 0; s < count; ++s) {
      if (cost[s] == kInf) continue;
      for (Letter c : {Letter::A, Letter::B}) {
        std::size_t t = step(s, c);
        if (t != kNo) next[t] = std::min(next[t], cost[s] + (c != w[i]));
      }
    }
    cost.swap(next);
  }
  std::size_t best = std::min({cost[2 * p], cost[b2], cost[t0]});
  if (best == kInf) return std::nullopt;
  return best;
}

inline bool goal_reached(const Goal& goal, const Word& w) {
  if (const auto* e = std::get_if<ExactWord>(&goal)) return w == e->target;
  return match_goal_pattern(w, std::get<GoalPattern>(goal).p).has_value();
}

namespace detail {

inline std::size_t guidance(const Goal& goal, const Word& w) {
  if (const auto* e = std::get_if<ExactWord>(&goal)) return heuristic_distance(w, e->target);
  auto m = pattern_mismatch(w, std::get<GoalPattern>(goal).p);
  return m ? (*m + 2) / 3 : std::numeric_limits<std::size_t>::max();
}

struct Node {
  PackedWord word;
  std::uint32_t parent;
  Move move;
};

struct Candidate {
  std::uint32_t parent;
  Move move;
  PackedWord word;
};

// Successors of each frontier node not yet in `seen`, in frontier order then
// move order. Chunks run concurrently; `seen` is only read here.
inline std::vector<Candidate> expand(const std::vector<std::uint32_t>& frontier, const std::vector<Node>& nodes,
                                     const std::unordered_set<PackedWord, PackedWordHash>& seen,
                                     const std::vector<RuleId>& rules, unsigned workers) {
  auto work = [&](std::size_t from, std::size_t to, std::vector<Candidate>& out) {
    for (std::size_t i = from; i < to; ++i) {
      Word w = nodes[frontier[i]].word.unpack();
      for (const Move& m : enumerate_moves(w, rules)) {
        PackedWord next(apply_rule(w, m.rule, m.pos));
        if (!seen.count(next)) out.push_back({frontier[i], m, std::move(next)});
      }
    }
  };
  std::size_t chunks = std::min<std::size_t>(std::max(1u, workers), (frontier.size() + 255) / 256);
  if (chunks <= 1) {
    std::vector<Candidate> out;
    work(0, frontier.size(), out);
    return out;
  }
  std::vector<std::vector<Candidate>> parts(chunks);
  std::vector<std::thread> pool;
  std::size_t per = (frontier.size() + chunks - 1) / chunks;
  for (std::size_t c = 0; c < chunks; ++c) {
    std::size_t from = std::min(frontier.size(), c * per), to = std::min(frontier.size(), from + per);
    pool.emplace_back(work, from, to, std::ref(parts[c]));
  }
  for (auto& t : pool) t.join();
  std::vector<Candidate> out;
  for (auto& part : parts) std::move(part.begin(), part.end(), std::back_inserter(out));
  return out;
}

inline std::vector<Move> trace(const std::vector<Node>& nodes, std::uint32_t at) {
  std::vector<Move> path;
  while (at != 0) {
    path.push_back(nodes[at].move);
    at = nodes[at].parent;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

inline SearchResult bfs(const Word& start, const SearchConfig& cfg) {
  SearchResult r;
  std::vector<Node> nodes{{PackedWord(start), 0, {}}};
  std::unordered_set<PackedWord, PackedWordHash> seen{nodes[0].word};
  std::vector<std::uint32_t> frontier{0};
  for (std::size_t depth = 0; depth < cfg.max_depth && !frontier.empty(); ++depth) {
    std::vector<Candidate> cands = expand(frontier, nodes, seen, cfg.rules, cfg.workers);
    r.states_expanded += frontier.size();
    r.depth_reached = depth + 1;
    std::vector<std::uint32_t> next;
    for (Candidate& c : cands) {
      if (!seen.insert(c.word).second) continue;
      if (seen.size() > cfg.max_states) {
        r.outcome = Outcome::BudgetExceeded;
        return r;
      }
      nodes.push_back({std::move(c.word), c.parent, c.move});
      auto id = static_cast<std::uint32_t>(nodes.size() - 1);
      if (goal_reached(cfg.goal, nodes[id].word.unpack())) {
        r.outcome = Outcome::Found;
        r.path = trace(nodes, id);
        return r;
      }
      next.push_back(id);
    }
    frontier = std::move(next);
  }
  r.outcome = Outcome::Exhausted;
  return r;
}

class Iddfs {
 public:
  Iddfs(const SearchConfig& cfg, SearchResult& r) : cfg_(cfg), r_(r) {}

  // True when the goal was found; `cut_` records whether the limit pruned.
  bool dive(const Word& w, std::size_t g, std::size_t limit) {
    if (goal_reached(cfg_.goal, w)) return true;
    if (g == limit) {
      if (!enumerate_moves(w, cfg_.rules).empty()) cut_ = true;
      return false;
    }
    if (++r_.states_expanded > cfg_.max_states) throw Budget{};
    for (const Move& m : enumerate_moves(w, cfg_.rules)) {
      Word next = apply_rule(w, m.rule, m.pos);
      auto [it, fresh] = best_.try_emplace(PackedWord(next), g + 1);
      if (!fresh) {
        if (it->second <= g + 1) continue;
        it->second = g + 1;
      }
      path_.push_back(m);
      if (dive(next, g + 1, limit)) return true;
      path_.pop_back();
    }
    return false;
  }

  SearchResult run(const Word& start) {
    try {
      for (std::size_t limit = 0; limit <= cfg_.max_depth; ++limit) {
        best_.clear();
        best_.emplace(PackedWord(start), 0);
        path_.clear();
        cut_ = false;
        r_.depth_reached = limit;
        if (dive(start, 0, limit)) {
          r_.outcome = Outcome::Found;
          r_.path = path_;
          return r_;
        }
        if (!cut_) break;  // the whole reachable set fits inside the limit
      }
      r_.outcome = Outcome::Exhausted;
    } catch (const Budget&) {
      r_.outcome = Outcome::BudgetExceeded;
      r_.path.clear();
    }
    return r_;
  }

 private:
  struct Budget {};
  const SearchConfig& cfg_;
  SearchResult& r_;
  std::unordered_map<PackedWord, std::size_t, PackedWordHash> best_;  // least depth reached per state
  std::vector<Move> path_;
  bool cut_ = false;
};

inline SearchResult beam(const Word& start, const SearchConfig& cfg) {
  SearchResult r;
  std::vector<Node> nodes{{PackedWord(start), 0, {}}};
  std::unordered_set<PackedWord, PackedWordHash> seen{nodes[0].word};
  std::vector<std::uint32_t> frontier{0};
  for (std::size_t depth = 0; depth < cfg.max_depth && !frontier.empty(); ++depth) {
    std::vector<Candidate> cands = expand(frontier, nodes, seen, cfg.rules, cfg.workers);
    r.states_expanded += frontier.size();
    r.depth_reached = depth + 1;
    struct Scored {
      std::size_t h;
      std::uint32_t id;
    };
    std::vector<Scored> level;
    for (Candidate& c : cands) {
      if (!seen.insert(c.word).second) continue;
      if (seen.size() > cfg.max_states) {
        r.outcome = Outcome::BudgetExceeded;
        return r;
      }
      nodes.push_back({std::move(c.word), c.parent, c.move});
      auto id = static_cast<std::uint32_t>(nodes.size() - 1);
      level.push_back({guidance(cfg.goal, nodes[id].word.unpack()), id});
    }
    // Total order: heuristic, then the word itself.
    std::sort(level.begin(), level.end(), [&](const Scored& x, const Scored& y) {
      if (x.h != y.h) return x.h < y.h;
      return nodes[x.id].word < nodes[y.id].word;
    });
    for (const Scored& s : level) {
      if (goal_reached(cfg.goal, nodes[s.id].word.unpack())) {
        r.outcome = Outcome::Found;
        r.path = trace(nodes, s.id);
        return r;
      }
    }
    frontier.clear();
    for (std::size_t i = 0; i < level.size() && i < cfg.beam_width; ++i) frontier.push_back(level[i].id);
  }
  r.outcome = Outcome::Exhausted;
  return r;
}

}  // namespace detail

/// Deterministic for fixed (start, cfg) regardless of `cfg.workers`. BFS and
/// IDDFS return a shortest path when one exists within the depth bound.
inline SearchResult search(const Word& start, const SearchConfig& cfg) {
  validate(cfg);
  if (goal_reached(cfg.goal, start)) return SearchResult{Outcome::Found, {}, 0, 0};
  // Every rule preserves length.
  if (const auto* e = std::get_if<ExactWord>(&cfg.goal); e && e->target.size() != start.size()) {
    return SearchResult{Outcome::Exhausted, {}, 0, 0};
  }
  switch (cfg.strategy) {
    case Strategy::BFS: return detail::bfs(start, cfg);
    case Strategy::IDDFS: {
      SearchResult r;
      return detail::Iddfs(cfg, r).run(start);
    }
    case Strategy::GreedyBeam: return detail::beam(start, cfg);
  }
  return {};
}

/// Replays a path; throws like apply_rule on an illegal step.
inline Word replay_path(const Word& start, const std::vector<Move>& path) {
  Word w = start;
  for (const Move& m : path) w = apply_rule(w, m.rule, m.pos);
  return w;
}

/// One derivation step per line, pasteable into a .deriv file.
inline std::string format_path(const std::vector<Move>& path) {
  std::ostringstream out;
  for (const Move& m : path) out << rule_name(m.rule) << " at " << m.pos << "\n";
  return out.str();
}

}  // namespace handleword
