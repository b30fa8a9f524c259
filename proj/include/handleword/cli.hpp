#pragma once

// Command-line front end. `run_cli` takes the arguments after the program
// name and returns the process exit status:
//   0  success / check passed / goal found / claim holds
//   1  check failed / goal not found / not equivalent / claim does not hold
//   2  usage, parse or input errors
// Reports go to `out`, diagnostics to `err`.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "handleword/canonical.hpp"
#include "handleword/derivation.hpp"
#include "handleword/search.hpp"
#include "handleword/topology.hpp"
#include "handleword/word.hpp"

namespace handleword {

namespace detail {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::int64_t parse_int(std::string_view text, const std::string& what) {
  Cursor cur{text};
  bool neg = cur.consume('-');
  std::int64_t v = 0;
  try {
    v = cur.integer();
  } catch (const Error&) {
    throw UsageError(what + ": expected an integer, got '" + std::string(text) + "'");
  }
  cur.skip_ws();
  if (!cur.at_end()) throw UsageError(what + ": expected an integer, got '" + std::string(text) + "'");
  return neg ? -v : v;
}

/// `A..B` or a single `A`.
inline std::pair<std::int64_t, std::int64_t> parse_n_range(const std::string& text) {
  std::size_t dots = text.find("..");
  if (dots == std::string::npos) {
    std::int64_t v = parse_int(text, "--n");
    return {v, v};
  }
  return {parse_int(text.substr(0, dots), "--n"), parse_int(text.substr(dots + 2), "--n")};
}

/// A word expression instantiated at `n` (only needed when it mentions n).
inline Word concrete_word(const std::string& text, std::optional<std::int64_t> n) {
  ParamWord pw = lower(parse_word_expr(text));
  std::set<std::string> vars = pw.free_variables();
  Binding b;
  for (const std::string& v : vars) {
    if (v != "n") throw UsageError("'" + text + "' mentions unknown variable '" + v + "'");
    if (!n) throw UsageError("'" + text + "' depends on n; pass --n");
    b["n"] = *n;
  }
  return instantiate(pw, b);
}

}  // namespace detail

/// Interactive session over one word: list and apply moves, mark and delete
/// letters, and export the session as a derivation that replays it.
class Repl {
 public:
  Repl(std::istream& in, std::ostream& out, std::ostream& err, bool prompt = false)
      : in_(in), out_(out), err_(err), prompt_(prompt) {}

  void run() {
    std::string line;
    for (;;) {
      if (prompt_) out_ << "> " << std::flush;
      if (!std::getline(in_, line)) break;
      if (!execute(line)) break;
    }
  }

  /// Runs one command; false after `quit`.
  bool execute(const std::string& line) {
    std::istringstream words(line);
    std::string cmd;
    if (!(words >> cmd) || cmd[0] == '#') return true;
    std::string rest;
    std::getline(words, rest);
    try {
      if (cmd == "quit" || cmd == "exit") return false;
      if (cmd == "help") {
        out_ << kUsage;
      } else if (cmd == "load") {
        load(rest);
      } else if (!loaded_) {
        throw detail::UsageError("no word loaded; use: load <word-expr> [n=<int>]");
      } else if (cmd == "word") {
        show();
      } else if (cmd == "moves") {
        auto moves = enumerate_moves(word_, kAllRules);
        for (std::size_t i = 0; i < moves.size(); ++i) {
          out_ << "[" << i << "] " << rule_name(moves[i].rule) << " @" << moves[i].pos << "\n";
        }
        if (moves.empty()) out_ << "no moves\n";
      } else if (cmd == "apply") {
        apply(rest);
      } else if (cmd == "mark") {
        mark(rest);
      } else if (cmd == "delete") {
        if (!trailing(rest).empty()) throw detail::UsageError("usage: delete");
        if (marks_.empty()) throw detail::UsageError("nothing is marked");
        push_undo();
        word_ = delete_marked(MarkedWord(word_, std::vector<std::size_t>(marks_.begin(), marks_.end())));
        marks_.clear();
        steps_.push_back(Step{DeleteMarkedStep{}, 0});
        show();
      } else if (cmd == "nf") {
        out_ << normal_form(word_).str() << "\n";
      } else if (cmd == "undo") {
        if (undo_.empty()) throw detail::UsageError("nothing to undo");
        word_ = std::move(undo_.back().word);
        marks_ = std::move(undo_.back().marks);
        steps_.resize(undo_.back().steps);
        undo_.pop_back();
        show();
      } else if (cmd == "export") {
        out_ << export_text();
      } else {
        throw detail::UsageError("unknown command '" + cmd + "'");
      }
    } catch (const detail::UsageError& e) {
      err_ << "error: " << e.what() << "\n";
    } catch (const Error& e) {
      err_ << "error: " << e.what() << "\n";
    }
    return true;
  }

  const Word& word() const { return word_; }

  /// The session as a derivation over the loaded word, instantiated.
  std::string export_text() const {
    Derivation d;
    d.name = "session";
    d.initial = parse_word_expr(initial_.empty() ? std::string("a^0") : initial_.str());
    bool deleted = false;
    for (const Step& s : steps_) {
      if (std::holds_alternative<DeleteMarkedStep>(s.kind) && !deleted) {
        d.steps.push_back(Step{AssertEquivInitialStep{}, 0});
        deleted = true;
      }
      d.steps.push_back(s);
    }
    if (!deleted) d.steps.push_back(Step{AssertEquivInitialStep{}, 0});
    d.steps.push_back(Step{AssertWordStep{parse_word_expr(word_.empty() ? std::string("a^0") : word_.str())}, 0});
    return "# loaded " + source_ + "\n" + print_derivation(d);
  }

  static constexpr std::string_view kUsage =
      "commands:\n"
      "  load <word-expr> [n=<int>]   start a session\n"
      "  word                         show the current word and marks\n"
      "  moves                        list applicable moves\n"
      "  apply <index>                apply a listed move\n"
      "  mark <pos> [<pos> ...]       mark letters for deletion\n"
      "  delete                       delete marked letters\n"
      "  nf                           normal form of the current word\n"
      "  undo                         revert the last apply, mark or delete\n"
      "  export                       print the session as a derivation\n"
      "  quit\n";

 private:
  struct Snapshot {
    Word word;
    std::set<std::size_t> marks;
    std::size_t steps;
  };

  static std::string trailing(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  void load(const std::string& args) {
    std::string text = trailing(args);
    std::optional<std::int64_t> n;
    if (std::size_t eq = text.rfind("n="); eq != std::string::npos && (eq == 0 || text[eq - 1] == ' ')) {
      n = detail::parse_int(text.substr(eq + 2), "n");
      if (*n < kGlobalFloorN) throw detail::UsageError("n must be at least 1");
      text = trailing(text.substr(0, eq));
    }
    if (text.size() >= 2 && text.front() == '"' && text.back() == '"') text = text.substr(1, text.size() - 2);
    if (text.empty()) throw detail::UsageError("usage: load <word-expr> [n=<int>]");
    Word w = detail::concrete_word(text, n);
    initial_ = w;
    word_ = w;
    source_ = text + (n ? " at n=" + std::to_string(*n) : std::string());
    marks_.clear();
    steps_.clear();
    undo_.clear();
    loaded_ = true;
    show();
  }

  void apply(const std::string& args) {
    std::istringstream in(args);
    std::string tok, extra;
    if (!(in >> tok) || (in >> extra)) throw detail::UsageError("usage: apply <index>");
    std::int64_t idx = detail::parse_int(tok, "apply");
    auto moves = enumerate_moves(word_, kAllRules);
    if (idx < 0 || static_cast<std::size_t>(idx) >= moves.size()) {
      throw detail::UsageError("no move [" + tok + "]; run 'moves'");
    }
    const Move& m = moves[static_cast<std::size_t>(idx)];
    if (!marks_.empty()) throw detail::UsageError("delete or undo the marks before rewriting");
    push_undo();
    word_ = apply_rule(word_, m.rule, m.pos);
    steps_.push_back(Step{RewriteStep{m.rule, AffineExpr(static_cast<std::int64_t>(m.pos))}, 0});
    show();
  }

  void mark(const std::string& args) {
    std::istringstream in(args);
    std::string tok;
    std::vector<std::size_t> add;
    while (in >> tok) {
      for (char& c : tok) {
        if (c == ',') c = ' ';
      }
      std::istringstream parts(tok);
      std::string part;
      while (parts >> part) {
        std::int64_t v = detail::parse_int(part, "mark");
        if (v < 0 || static_cast<std::size_t>(v) >= word_.size()) {
          throw detail::UsageError("position " + part + " is outside the word");
        }
        auto pos = static_cast<std::size_t>(v);
        if (marks_.count(pos) || std::count(add.begin(), add.end(), pos)) {
          throw detail::UsageError("position " + part + " is already marked");
        }
        add.push_back(pos);
      }
    }
    if (add.empty()) throw detail::UsageError("usage: mark <pos> [<pos> ...]");
    push_undo();
    MarkStep step;
    for (std::size_t p : add) {
      marks_.insert(p);
      step.positions.push_back(AffineExpr(static_cast<std::int64_t>(p)));
    }
    steps_.push_back(Step{std::move(step), 0});
    show();
  }

  void push_undo() { undo_.push_back({word_, marks_, steps_.size()}); }

  void show() {
    out_ << "word: " << (word_.empty() ? std::string("(empty)") : word_.str()) << " (length " << word_.size()
         << ")\n";
    if (!marks_.empty()) {
      std::string under(word_.size(), ' ');
      for (std::size_t m : marks_) under[m] = '^';
      out_ << "      " << under.substr(0, under.find_last_not_of(' ') + 1) << "\n";
    }
  }

  std::istream& in_;
  std::ostream& out_;
  std::ostream& err_;
  bool prompt_;
  bool loaded_ = false;
  std::string source_;
  Word initial_;
  Word word_;
  std::set<std::size_t> marks_;
  StepList steps_;
  std::vector<Snapshot> undo_;
};

namespace detail {

inline int cmd_verify(const std::string& path, const std::string& range, unsigned workers, std::ostream& out,
                      std::ostream& err) {
  Derivation d = load_derivation(path);
  std::int64_t from, to;
  if (range.empty()) {
    from = to = derived_min_n(d);
  } else {
    std::tie(from, to) = parse_n_range(range);
  }
  if (from > to) throw UsageError("--n range " + range + " is empty");
  if (from < d.floor) throw UsageError("--n starts below the declared floor " + std::to_string(d.floor));
  std::vector<CheckReport> reports = check_range(d, from, to, workers);
  std::size_t passed = 0;
  for (const CheckReport& r : reports) {
    out << format_report(r) << "\n";
    passed += r.passed;
    if (!r.passed) err << d.name << ": n=" << r.n << " failed\n";
  }
  out << "summary: " << passed << " of " << reports.size() << " passed\n";
  return passed == reports.size() ? 0 : 1;
}

struct SearchArgs {
  std::string start, target, strategy = "bfs", rules = "braid";
  std::optional<std::int64_t> n;
  std::optional<std::size_t> pattern_p;
  std::size_t beam = 64, max_depth = 12, max_states = 1'000'000;
  unsigned workers = 1;
};

inline int cmd_search(const SearchArgs& a, std::ostream& out) {
  if (a.target.empty() == !a.pattern_p) throw UsageError("give exactly one of --target and --pattern-p");
  SearchConfig cfg;
  Word start = concrete_word(a.start, a.n);
  if (a.pattern_p) {
    if (*a.pattern_p < 2) throw UsageError("--pattern-p must be at least 2");
    cfg.goal = GoalPattern{*a.pattern_p};
  } else {
    cfg.goal = ExactWord{concrete_word(a.target, a.n)};
  }
  cfg.strategy = a.strategy == "bfs" ? Strategy::BFS : a.strategy == "iddfs" ? Strategy::IDDFS : Strategy::GreedyBeam;
  if (a.rules == "all") cfg.rules.assign(kAllRules.begin(), kAllRules.end());
  cfg.beam_width = a.beam;
  cfg.max_depth = a.max_depth;
  cfg.max_states = a.max_states;
  cfg.workers = a.workers;
  if (cfg.max_states < 1 || cfg.beam_width < 1) throw UsageError("--max-states and --beam must be positive");
  SearchResult r = search(start, cfg);
  out << "# outcome=" << to_string(r.outcome) << " length=" << r.path.size()
      << " states_expanded=" << r.states_expanded << " depth_reached=" << r.depth_reached << "\n";
  if (r.outcome != Outcome::Found) return 1;
  out << format_path(r.path);
  out << "# reaches " << replay_path(start, r.path).str() << "\n";
  return 0;
}

}  // namespace detail

inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err, std::istream& in,
                   bool interactive = false) {
  CLI::App app{"Handle-word calculus: derivation checking, normal forms, search and claims", "handleword"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string verify_path, verify_range;
  unsigned verify_workers = std::max(1u, std::thread::hardware_concurrency());
  auto* verify = app.add_subcommand("verify", "Replay a derivation file over a range of n");
  verify->add_option("path", verify_path, "Derivation file")->required();
  verify->add_option("--n", verify_range, "Range A..B or a single value (default: the derived threshold)");
  verify->add_option("--workers", verify_workers, "Threads for the sweep")->check(CLI::PositiveNumber);

  std::string nf_word;
  auto* nf = app.add_subcommand("nf", "Print the normal form of a word");
  nf->add_option("word", nf_word, "Word or word expression without parameters")->required();

  std::string eq1, eq2;
  auto* eq = app.add_subcommand("equiv", "Decide whether two words are equal in the monoid");
  eq->add_option("w1", eq1)->required();
  eq->add_option("w2", eq2)->required();

  detail::SearchArgs sa;
  std::string search_n;
  auto* srch = app.add_subcommand("search", "Search for a rewrite path");
  srch->add_option("--start", sa.start, "Start word expression")->required();
  auto* target_opt = srch->add_option("--target", sa.target, "Exact target word expression");
  auto* pattern_opt = srch->add_option("--pattern-p", sa.pattern_p, "Goal pattern a^{p-1} b^m a^p b^k (ab)^j");
  target_opt->excludes(pattern_opt);
  srch->add_option("--n", search_n, "Value of n for parametric expressions");
  srch->add_option("--strategy", sa.strategy)->check(CLI::IsMember({"bfs", "iddfs", "beam"}));
  srch->add_option("--beam", sa.beam, "Beam width");
  srch->add_option("--max-depth", sa.max_depth);
  srch->add_option("--max-states", sa.max_states);
  srch->add_option("--workers", sa.workers)->check(CLI::PositiveNumber);
  srch->add_option("--rules", sa.rules, "braid (elementary moves) or all (with macros)")
      ->check(CLI::IsMember({"braid", "all"}));

  std::string claim_p, claim_n;
  auto* claim = app.add_subcommand("claim", "Print the no-1-handle claim for E(n)_{p,p+1}");
  claim->add_option("--p", claim_p)->required();
  claim->add_option("--n", claim_n)->required();

  auto* repl = app.add_subcommand("repl", "Interactive session");

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*verify) return detail::cmd_verify(verify_path, verify_range, verify_workers, out, err);
    if (*nf) {
      out << normal_form(detail::concrete_word(nf_word, std::nullopt)).str() << "\n";
      return 0;
    }
    if (*eq) {
      bool same = equivalent(detail::concrete_word(eq1, std::nullopt), detail::concrete_word(eq2, std::nullopt));
      out << "equivalent: " << (same ? "true" : "false") << "\n";
      return same ? 0 : 1;
    }
    if (*srch) {
      if (!search_n.empty()) sa.n = detail::parse_int(search_n, "--n");
      return detail::cmd_search(sa, out);
    }
    if (*claim) {
      std::int64_t p = detail::parse_int(claim_p, "--p"), n = detail::parse_int(claim_n, "--n");
      TheoremClaim c = theorem_claim(n, p);
      out << format_claim(c) << "\n";
      if (!c.threshold) err << "note: p=" << p << " is not covered; known thresholds exist for p in 5..8\n";
      return c.holds ? 0 : 1;
    }
    if (*repl) {
      Repl(in, out, err, interactive).run();
      return 0;
    }
  } catch (const detail::UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace handleword
