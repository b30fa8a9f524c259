#pragma once

// Proof scripts over handle words.
//
// A derivation starts from a parametric word such as (ab)^{6n}, applies
// rewrites at explicit (affine) positions, marks letters, deletes them, and
// asserts intermediate and final shapes. `check` replays a derivation at one
// concrete n; `derived_min_n` reads off, without replaying, the least n for
// which every count, trip count and position in the script is in range.
//
// File format (line oriented, `#` starts a comment):
//
//   derivation <name>
//   param n >= <int>                   optional floor, default 1
//   expect min-n <int>                 optional
//   initial <word-expr>
//   braid fwd|rev at <affine>
//   macro R3|R3'|R4|R4' at <affine>
//   foreach <var> in <affine> .. <affine>     half-open range
//     ...
//   end
//   mark <affine>[, <affine> ...]
//   delete marked
//   assert word <word-expr>
//   assert equiv initial
//   accounting                          steps replayed on a scratch copy
//     ...
//     omit vertical <affine> horizontal <affine>
//   end
//
// Word expressions: expr := term+ ; term := atom exponent? ;
// atom := 'a' | 'b' | '(' expr ')' ; exponent := '^' INT | '^' '{' affine '}'.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "handleword/affine.hpp"
#include "handleword/canonical.hpp"
#include "handleword/error.hpp"
#include "handleword/parse.hpp"
#include "handleword/word.hpp"

namespace handleword {

// ---------------------------------------------------------------------------
// Word expressions

struct WordTerm;

struct WordExpr {
  std::vector<WordTerm> terms;  // non-empty once parsed
};

struct WordTerm {
  std::variant<Letter, WordExpr> atom;
  std::optional<AffineExpr> exponent;
};

inline bool operator==(const WordExpr& x, const WordExpr& y);
inline bool operator==(const WordTerm& x, const WordTerm& y) {
  return x.atom == y.atom && x.exponent == y.exponent;
}
inline bool operator==(const WordExpr& x, const WordExpr& y) { return x.terms == y.terms; }

inline std::string to_string(const WordExpr& e);

inline std::string to_string(const WordTerm& t) {
  std::string out;
  if (const Letter* l = std::get_if<Letter>(&t.atom)) out.push_back(to_char(*l));
  else out = "(" + to_string(std::get<WordExpr>(t.atom)) + ")";
  if (t.exponent) {
    const AffineExpr& e = *t.exponent;
    out += e.is_constant() && e.constant() >= 0 ? "^" + e.str() : "^{" + e.str() + "}";
  }
  return out;
}

inline std::string to_string(const WordExpr& e) {
  std::string out;
  for (const WordTerm& t : e.terms) out += to_string(t);
  return out;
}

namespace detail {

inline WordExpr parse_word_expr_at(detail::Cursor& cur);

inline WordTerm parse_word_term(detail::Cursor& cur) {
  cur.skip_ws();
  WordTerm term;
  char c = cur.peek();
  if (c == 'a' || c == 'b') {
    term.atom = c == 'a' ? Letter::A : Letter::B;
    ++cur.pos;
  } else if (c == '(') {
    ++cur.pos;
    term.atom = parse_word_expr_at(cur);
    cur.expect(')');
  } else {
    cur.fail("expected 'a', 'b' or '('");
  }
  // The exponent must follow its atom directly.
  if (cur.peek() == '^') {
    ++cur.pos;
    if (cur.peek() == '{') {
      ++cur.pos;
      std::size_t at = cur.pos;
      AffineExpr e = parse_affine_sum(cur);
      if (e.is_constant() && e.constant() < 0) {
        cur.pos = at;
        cur.fail("constant exponent " + e.str() + " is negative", ErrorCode::NegativeLiteralExponent);
      }
      cur.expect('}');
      term.exponent = std::move(e);
    } else if (cur.peek() == '-') {
      cur.fail("negative exponent", ErrorCode::NegativeLiteralExponent);
    } else {
      if (!std::isdigit(static_cast<unsigned char>(cur.peek()))) cur.fail("expected integer or '{' after '^'");
      term.exponent = AffineExpr(cur.integer());
    }
  }
  return term;
}

inline WordExpr parse_word_expr_at(detail::Cursor& cur) {
  WordExpr e;
  e.terms.push_back(parse_word_term(cur));
  for (;;) {
    cur.skip_ws();
    char c = cur.peek();
    if (c != 'a' && c != 'b' && c != '(') return e;
    // A letter glued to an identifier would be a keyword or name, not a term.
    e.terms.push_back(parse_word_term(cur));
  }
}

}  // namespace detail

inline WordExpr parse_word_expr(std::string_view text) {
  detail::Cursor cur{text};
  WordExpr e = detail::parse_word_expr_at(cur);
  cur.skip_ws();
  if (!cur.at_end()) cur.fail("unexpected trailing input");
  return e;
}

namespace detail {

// Appends segments, merging runs of count-1 literal blocks.
inline void push_segment(std::vector<Segment>& out, Segment s) {
  if (s.count == AffineExpr(1) && !out.empty() && out.back().count == AffineExpr(1)) {
    out.back().block += s.block;
    return;
  }
  out.push_back(std::move(s));
}

inline std::vector<Segment> lower_segments(const WordExpr& e) {
  std::vector<Segment> out;
  for (const WordTerm& t : e.terms) {
    std::vector<Segment> inner;
    if (const Letter* l = std::get_if<Letter>(&t.atom)) inner.push_back({Word({*l}), 1});
    else inner = lower_segments(std::get<WordExpr>(t.atom));

    if (!t.exponent) {
      for (Segment& s : inner) push_segment(out, std::move(s));
      continue;
    }
    const AffineExpr& exp = *t.exponent;
    bool concrete = std::all_of(inner.begin(), inner.end(), [](const Segment& s) { return s.count.is_constant(); });
    if (concrete) {
      Word block;
      for (const Segment& s : inner) {
        if (s.count.constant() < 0) throw Error(ErrorCode::NegativeCount, "negative constant count in group");
        block += repeat(s.block, static_cast<std::size_t>(s.count.constant()));
      }
      if (block.empty()) continue;
      push_segment(out, {std::move(block), exp});
    } else if (exp.is_constant() && exp.constant() >= 0) {
      for (std::int64_t i = 0; i < exp.constant(); ++i) {
        for (const Segment& s : inner) push_segment(out, s);
      }
    } else {
      throw Error(ErrorCode::NonAffine, "parametric exponent applied to a parametric group in '" + to_string(t) + "'");
    }
  }
  return out;
}

}  // namespace detail

/// Flattens to blocks with affine repetition counts.
inline ParamWord lower(const WordExpr& e) { return ParamWord(detail::lower_segments(e)); }

// ---------------------------------------------------------------------------
// Steps and derivations

struct Step;
using StepList = std::vector<Step>;

struct RewriteStep {
  RuleId rule;
  AffineExpr pos;
  friend bool operator==(const RewriteStep&, const RewriteStep&) = default;
};

struct LoopStep {
  std::string var;
  AffineExpr from;
  AffineExpr to;  // exclusive
  StepList body;
};

struct MarkStep {
  std::vector<AffineExpr> positions;
  friend bool operator==(const MarkStep&, const MarkStep&) = default;
};

struct DeleteMarkedStep {
  friend bool operator==(const DeleteMarkedStep&, const DeleteMarkedStep&) = default;
};

struct AssertWordStep {
  WordExpr expected;
};

struct AssertEquivInitialStep {
  friend bool operator==(const AssertEquivInitialStep&, const AssertEquivInitialStep&) = default;
};

/// Body runs on a scratch copy of the current word; the main word is untouched.
struct AccountingStep {
  StepList body;
};

/// Records that this many vertical (a) and horizontal (b) handles are dropped.
struct OmitStep {
  AffineExpr vertical;
  AffineExpr horizontal;
  friend bool operator==(const OmitStep&, const OmitStep&) = default;
};

struct Step {
  std::variant<RewriteStep, LoopStep, MarkStep, DeleteMarkedStep, AssertWordStep, AssertEquivInitialStep,
               AccountingStep, OmitStep>
      kind;
  std::size_t line = 0;  // source line, 0 when built in code; not part of equality
};

inline bool operator==(const Step& x, const Step& y);
inline bool operator==(const LoopStep& x, const LoopStep& y) {
  return x.var == y.var && x.from == y.from && x.to == y.to && x.body == y.body;
}
inline bool operator==(const AssertWordStep& x, const AssertWordStep& y) { return x.expected == y.expected; }
inline bool operator==(const AccountingStep& x, const AccountingStep& y) { return x.body == y.body; }
inline bool operator==(const Step& x, const Step& y) { return x.kind == y.kind; }

struct Derivation {
  std::string name;
  std::int64_t floor = kGlobalFloorN;
  std::optional<std::int64_t> expected_min_n;
  WordExpr initial;
  StepList steps;
  friend bool operator==(const Derivation&, const Derivation&) = default;
};

// ---------------------------------------------------------------------------
// Printing

namespace detail {

inline void print_steps(std::ostringstream& out, const StepList& steps, int depth) {
  std::string indent(static_cast<std::size_t>(depth) * 2, ' ');
  for (const Step& s : steps) {
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, RewriteStep>) {
            out << indent << rule_name(k.rule) << " at " << k.pos.str() << "\n";
          } else if constexpr (std::is_same_v<T, LoopStep>) {
            out << indent << "foreach " << k.var << " in " << k.from.str() << " .. " << k.to.str() << "\n";
            print_steps(out, k.body, depth + 1);
            out << indent << "end\n";
          } else if constexpr (std::is_same_v<T, MarkStep>) {
            out << indent << "mark ";
            for (std::size_t i = 0; i < k.positions.size(); ++i) out << (i ? ", " : "") << k.positions[i].str();
            out << "\n";
          } else if constexpr (std::is_same_v<T, DeleteMarkedStep>) {
            out << indent << "delete marked\n";
          } else if constexpr (std::is_same_v<T, AssertWordStep>) {
            out << indent << "assert word " << to_string(k.expected) << "\n";
          } else if constexpr (std::is_same_v<T, AssertEquivInitialStep>) {
            out << indent << "assert equiv initial\n";
          } else if constexpr (std::is_same_v<T, AccountingStep>) {
            out << indent << "accounting\n";
            print_steps(out, k.body, depth + 1);
            out << indent << "end\n";
          } else if constexpr (std::is_same_v<T, OmitStep>) {
            out << indent << "omit vertical " << k.vertical.str() << " horizontal " << k.horizontal.str() << "\n";
          }
        },
        s.kind);
  }
}

}  // namespace detail

inline std::string print_derivation(const Derivation& d) {
  std::ostringstream out;
  out << "derivation " << d.name << "\n";
  out << "param n >= " << d.floor << "\n";
  if (d.expected_min_n) out << "expect min-n " << *d.expected_min_n << "\n";
  out << "initial " << to_string(d.initial) << "\n";
  detail::print_steps(out, d.steps, 0);
  return out.str();
}

// ---------------------------------------------------------------------------
// Parsing

namespace detail {

class DerivationParser {
 public:
  explicit DerivationParser(std::string_view text) : text_(text) {}

  Derivation parse() {
    Derivation d;
    bool have_name = false, have_initial = false;
    std::vector<Frame> stack;
    stack.push_back({&d.steps, Frame::Kind::Top, {}, 0});
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text_.size()) {
      std::size_t nl = text_.find('\n', start);
      std::string_view raw = text_.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
      start = nl == std::string_view::npos ? text_.size() + 1 : nl + 1;
      ++line_no;
      if (std::size_t hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
      Cursor cur{raw, 0, line_no};
      cur.skip_ws();
      if (cur.at_end()) continue;

      std::string kw = cur.identifier();
      Frame& top = stack.back();
      auto add = [&](auto kind) {
        top.steps->push_back(Step{std::move(kind), line_no});
      };

      if (kw == "derivation") {
        require_top(cur, stack, kw);
        if (have_name) cur.fail("duplicate 'derivation' line");
        cur.skip_ws();
        std::string_view name = trim_right(cur.rest());
        if (name.empty() || name.find_first_of(" \t") != std::string_view::npos) cur.fail("expected a single name");
        d.name = std::string(name);
        cur.pos = cur.text.size();
        have_name = true;
      } else if (kw == "param") {
        require_top(cur, stack, kw);
        if (cur.identifier() != "n") cur.fail("only the parameter n is supported");
        if (!cur.consume(">=")) cur.fail("expected '>='");
        d.floor = signed_integer(cur);
      } else if (kw == "expect") {
        require_top(cur, stack, kw);
        if (!cur.consume("min-n")) cur.fail("expected 'min-n'");
        d.expected_min_n = signed_integer(cur);
      } else if (kw == "initial") {
        require_top(cur, stack, kw);
        if (have_initial) cur.fail("duplicate 'initial' line");
        if (!top.steps->empty()) cur.fail("'initial' must precede all steps");
        d.initial = word_expr(cur, {"n"});
        have_initial = true;
      } else if (kw == "braid" || kw == "macro") {
        RuleId rule = rule_token(cur, kw);
        if (cur.identifier() != "at") cur.fail("expected 'at'");
        add(RewriteStep{rule, affine(cur, stack)});
      } else if (kw == "foreach") {
        std::string var = cur.identifier();
        if (var == "n" || in_scope(stack, var)) {
          cur.fail("loop variable '" + var + "' already bound", ErrorCode::DuplicateLoopVar);
        }
        if (cur.identifier() != "in") cur.fail("expected 'in'");
        AffineExpr from = affine(cur, stack);
        if (!cur.consume("..")) cur.fail("expected '..'");
        AffineExpr to = affine(cur, stack);
        add(LoopStep{var, std::move(from), std::move(to), {}});
        auto& loop = std::get<LoopStep>(top.steps->back().kind);
        stack.push_back({&loop.body, Frame::Kind::Loop, var, line_no});
      } else if (kw == "mark") {
        MarkStep m;
        do {
          m.positions.push_back(affine(cur, stack));
        } while (cur.consume(','));
        add(std::move(m));
      } else if (kw == "delete") {
        if (cur.identifier() != "marked") cur.fail("expected 'marked'");
        add(DeleteMarkedStep{});
      } else if (kw == "assert") {
        std::string what = cur.identifier();
        if (what == "word") {
          add(AssertWordStep{word_expr(cur, scope(stack))});
        } else if (what == "equiv") {
          if (cur.identifier() != "initial") cur.fail("expected 'initial'");
          add(AssertEquivInitialStep{});
        } else {
          cur.fail("expected 'word' or 'equiv'");
        }
      } else if (kw == "accounting") {
        for (const Frame& f : stack) {
          if (f.kind == Frame::Kind::Accounting) cur.fail("nested 'accounting' block");
        }
        add(AccountingStep{});
        auto& acc = std::get<AccountingStep>(top.steps->back().kind);
        stack.push_back({&acc.body, Frame::Kind::Accounting, {}, line_no});
      } else if (kw == "omit") {
        bool inside = std::any_of(stack.begin(), stack.end(),
                                  [](const Frame& f) { return f.kind == Frame::Kind::Accounting; });
        if (!inside) cur.fail("'omit' is only allowed inside an 'accounting' block");
        if (cur.identifier() != "vertical") cur.fail("expected 'vertical'");
        AffineExpr v = affine(cur, stack);
        if (cur.identifier() != "horizontal") cur.fail("expected 'horizontal'");
        add(OmitStep{std::move(v), affine(cur, stack)});
      } else if (kw == "end") {
        if (stack.size() == 1) cur.fail("'end' without an open block");
        stack.pop_back();
      } else {
        cur.pos = 0;
        cur.skip_ws();
        cur.fail("unknown directive '" + kw + "'");
      }
      cur.skip_ws();
      if (!cur.at_end()) cur.fail("unexpected trailing input");
    }
    if (stack.size() > 1) {
      Cursor cur{"", 0, stack.back().line};
      cur.fail("block opened here is never closed");
    }
    if (!have_name) throw Error(ErrorCode::SyntaxError, "missing 'derivation <name>' line");
    if (!have_initial) throw Error(ErrorCode::SyntaxError, "missing 'initial <word-expr>' line");
    return d;
  }

 private:
  struct Frame {
    enum class Kind { Top, Loop, Accounting };
    StepList* steps;
    Kind kind;
    std::string var;
    std::size_t line;
  };

  static std::string_view trim_right(std::string_view s) {
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
  }

  static void require_top(Cursor& cur, const std::vector<Frame>& stack, const std::string& kw) {
    if (stack.size() != 1) cur.fail("'" + kw + "' is not allowed inside a block");
  }

  static std::int64_t signed_integer(Cursor& cur) {
    bool neg = cur.consume('-');
    std::int64_t v = cur.integer();
    return neg ? -v : v;
  }

  static bool in_scope(const std::vector<Frame>& stack, const std::string& var) {
    return std::any_of(stack.begin(), stack.end(), [&](const Frame& f) { return f.kind == Frame::Kind::Loop && f.var == var; });
  }

  static std::set<std::string> scope(const std::vector<Frame>& stack) {
    std::set<std::string> vars{"n"};
    for (const Frame& f : stack) {
      if (f.kind == Frame::Kind::Loop) vars.insert(f.var);
    }
    return vars;
  }

  static void check_bound(Cursor& cur, std::size_t at, const std::set<std::string>& used,
                          const std::set<std::string>& allowed) {
    for (const std::string& v : used) {
      if (!allowed.count(v)) {
        cur.pos = at;
        cur.fail("variable '" + v + "' is not bound here", ErrorCode::UnboundVariable);
      }
    }
  }

  static AffineExpr affine(Cursor& cur, const std::vector<Frame>& stack) {
    cur.skip_ws();
    std::size_t at = cur.pos;
    AffineExpr e = parse_affine_sum(cur);
    check_bound(cur, at, e.variables(), scope(stack));
    return e;
  }

  static WordExpr word_expr(Cursor& cur, const std::set<std::string>& allowed) {
    cur.skip_ws();
    std::size_t at = cur.pos;
    WordExpr e = parse_word_expr_at(cur);
    ParamWord lowered;
    try {
      lowered = lower(e);
    } catch (const Error& err) {
      cur.pos = at;
      cur.fail(err.what(), err.code());
    }
    check_bound(cur, at, lowered.free_variables(), allowed);
    return e;
  }

  static RuleId rule_token(Cursor& cur, const std::string& kw) {
    cur.skip_ws();
    std::size_t at = cur.pos;
    std::string tok = cur.identifier();
    if (cur.peek() == '\'') {
      ++cur.pos;
      tok += "'";
    }
    std::string spelled = kw + " " + tok;
    for (const RuleSpec& r : kRuleSpecs) {
      if (r.dsl == spelled) return r.id;
    }
    cur.pos = at;
    cur.fail("unknown rule '" + spelled + "'");
  }

  std::string_view text_;
};

}  // namespace detail

inline Derivation parse_derivation(std::string_view text) { return detail::DerivationParser(text).parse(); }

inline Derivation load_derivation(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Precondition, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_derivation(buf.str());
}

// ---------------------------------------------------------------------------
// Concrete replay

enum class FailureCause {
  PatternMismatch,
  OutOfRange,
  AssertFailed,
  EquivAfterDelete,
  NegativeCount,
  InvalidMarks,
  UnboundVariable,
  NonAffine,
};

constexpr std::string_view to_string(FailureCause c) {
  switch (c) {
    case FailureCause::PatternMismatch: return "PATTERN_MISMATCH";
    case FailureCause::OutOfRange: return "OUT_OF_RANGE";
    case FailureCause::AssertFailed: return "ASSERT_FAILED";
    case FailureCause::EquivAfterDelete: return "EQUIV_AFTER_DELETE";
    case FailureCause::NegativeCount: return "NEGATIVE_COUNT";
    case FailureCause::InvalidMarks: return "INVALID_MARKS";
    case FailureCause::UnboundVariable: return "UNBOUND_VARIABLE";
    case FailureCause::NonAffine: return "NON_AFFINE";
  }
  return "UNKNOWN";
}

struct StepFailure {
  std::optional<std::size_t> step;  // pre-order index; empty when the initial word fails
  std::size_t line = 0;
  FailureCause cause = FailureCause::AssertFailed;
  std::string detail;
};

struct AccountingTally {
  LetterCounts before;
  LetterCounts consumed;  // letters in the left-hand sides of applied rewrites
  LetterCounts produced;  // letters in the right-hand sides
  LetterCounts omitted;
  LetterCounts remaining;  // counts of the scratch word minus omitted
  std::size_t rewrites = 0;
};

struct CheckReport {
  std::string derivation;
  std::int64_t n = 0;
  bool passed = false;
  std::size_t steps_executed = 0;
  std::size_t deletions = 0;  // number of `delete marked` executions
  std::size_t initial_length = 0;
  std::size_t deleted = 0;  // letters removed
  std::size_t final_length = 0;
  Word final_word;
  std::optional<Word> pre_delete_word;  // current word just before the first deletion
  std::optional<AnyGoalMatch> pattern;
  std::vector<AccountingTally> accounting;
  std::optional<StepFailure> failure;
};

namespace detail {

inline std::size_t subtree_size(const Step& s) {
  std::size_t n = 1;
  if (const auto* loop = std::get_if<LoopStep>(&s.kind)) {
    for (const Step& c : loop->body) n += subtree_size(c);
  } else if (const auto* acc = std::get_if<AccountingStep>(&s.kind)) {
    for (const Step& c : acc->body) n += subtree_size(c);
  }
  return n;
}

inline FailureCause cause_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::OutOfRange: return FailureCause::OutOfRange;
    case ErrorCode::PatternMismatch: return FailureCause::PatternMismatch;
    case ErrorCode::NegativeCount: return FailureCause::NegativeCount;
    case ErrorCode::InvalidMarks: return FailureCause::InvalidMarks;
    case ErrorCode::UnboundVariable: return FailureCause::UnboundVariable;
    case ErrorCode::NonAffine: return FailureCause::NonAffine;
    default: return FailureCause::AssertFailed;
  }
}

struct Failed {
  FailureCause cause;
  std::string detail;
};

class Replayer {
 public:
  Replayer(const Word& initial, Binding binding) : initial_(initial), word_(initial), binding_(std::move(binding)) {}

  void run(const StepList& steps, std::size_t base) {
    std::size_t index = base;
    for (const Step& s : steps) {
      current_index_ = index;
      current_line_ = s.line;
      exec(s, index);
      index += subtree_size(s);
    }
  }

  const Word& word() const { return word_; }
  std::size_t steps_executed() const { return executed_; }
  std::size_t deleted() const { return deleted_; }
  std::size_t deletions() const { return deletions_; }
  const std::optional<Word>& pre_delete() const { return pre_delete_; }
  std::vector<AccountingTally>& accounting() { return accounting_; }
  std::size_t current_index() const { return current_index_; }
  std::size_t current_line() const { return current_line_; }

 private:
  std::int64_t value(const AffineExpr& e) const { return e.eval(binding_); }

  std::size_t position(const AffineExpr& e) const {
    std::int64_t v = value(e);
    if (v < 0) throw Failed{FailureCause::OutOfRange, "position " + e.str() + " = " + std::to_string(v) + " is negative"};
    return static_cast<std::size_t>(v);
  }

  void exec(const Step& s, std::size_t index) {
    ++executed_;
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, RewriteStep>) {
            std::size_t pos = position(k.pos);
            word_ = apply_rule(word_, k.rule, pos);
            if (tally_) {
              LetterCounts l = letter_counts(rule_lhs(k.rule)), r = letter_counts(rule_rhs(k.rule));
              tally_->consumed.a += l.a;
              tally_->consumed.b += l.b;
              tally_->produced.a += r.a;
              tally_->produced.b += r.b;
              ++tally_->rewrites;
            }
          } else if constexpr (std::is_same_v<T, LoopStep>) {
            std::int64_t from = value(k.from), to = value(k.to);
            if (to < from) {
              throw Failed{FailureCause::NegativeCount, "loop " + k.var + " in " + k.from.str() + " .. " + k.to.str() +
                                                            " has trip count " + std::to_string(to - from)};
            }
            for (std::int64_t i = from; i < to; ++i) {
              binding_[k.var] = i;
              run(k.body, index + 1);
            }
            binding_.erase(k.var);
          } else if constexpr (std::is_same_v<T, MarkStep>) {
            for (const AffineExpr& e : k.positions) {
              std::size_t pos = position(e);
              if (pos >= word_.size()) {
                throw Failed{FailureCause::OutOfRange, "mark " + std::to_string(pos) + " outside word of length " +
                                                           std::to_string(word_.size())};
              }
              if (!marks_.insert(pos).second) {
                throw Failed{FailureCause::InvalidMarks, "position " + std::to_string(pos) + " marked twice"};
              }
            }
          } else if constexpr (std::is_same_v<T, DeleteMarkedStep>) {
            std::size_t before = word_.size();
            if (!tally_ && !pre_delete_) pre_delete_ = word_;
            word_ = delete_marked(MarkedWord(word_, std::vector<std::size_t>(marks_.begin(), marks_.end())));
            if (!tally_) {
              deleted_ += before - word_.size();
              ++deletions_;
            }
            marks_.clear();
            after_delete_ = true;
          } else if constexpr (std::is_same_v<T, AssertWordStep>) {
            Word expected = instantiate(lower(k.expected), binding_);
            if (expected != word_) throw Failed{FailureCause::AssertFailed, describe_mismatch(expected)};
          } else if constexpr (std::is_same_v<T, AssertEquivInitialStep>) {
            if (after_delete_) {
              throw Failed{FailureCause::EquivAfterDelete, "equivalence to the initial word is meaningless after a deletion"};
            }
            if (!equivalent(word_, initial_)) {
              throw Failed{FailureCause::AssertFailed, "current word is not equivalent to the initial word"};
            }
          } else if constexpr (std::is_same_v<T, AccountingStep>) {
            run_accounting(k, index);
          } else if constexpr (std::is_same_v<T, OmitStep>) {
            std::int64_t v = value(k.vertical), h = value(k.horizontal);
            if (v < 0 || h < 0) {
              throw Failed{FailureCause::NegativeCount, "omit vertical " + k.vertical.str() + " = " + std::to_string(v) +
                                                            " horizontal " + k.horizontal.str() + " = " + std::to_string(h)};
            }
            tally_->omitted.a += static_cast<std::size_t>(v);
            tally_->omitted.b += static_cast<std::size_t>(h);
            LetterCounts have = letter_counts(word_);
            if (tally_->omitted.a > have.a || tally_->omitted.b > have.b) {
              throw Failed{FailureCause::AssertFailed,
                           "cannot omit " + std::to_string(tally_->omitted.a) + " vertical and " +
                               std::to_string(tally_->omitted.b) + " horizontal handles from a word with " +
                               std::to_string(have.a) + " and " + std::to_string(have.b)};
            }
          }
        },
        s.kind);
  }

  void run_accounting(const AccountingStep& k, std::size_t index) {
    Word saved = word_;
    std::set<std::size_t> saved_marks = marks_;
    bool saved_after = after_delete_;
    AccountingTally tally;
    tally.before = letter_counts(word_);
    tally_ = &tally;
    try {
      run(k.body, index + 1);
    } catch (...) {
      tally_ = nullptr;
      throw;
    }
    tally_ = nullptr;
    LetterCounts now = letter_counts(word_);
    tally.remaining = {now.a - tally.omitted.a, now.b - tally.omitted.b};
    accounting_.push_back(tally);
    word_ = std::move(saved);
    marks_ = std::move(saved_marks);
    after_delete_ = saved_after;
  }

  std::string describe_mismatch(const Word& expected) const {
    if (expected.size() != word_.size()) {
      return "expected length " + std::to_string(expected.size()) + ", have " + std::to_string(word_.size());
    }
    std::size_t i = 0;
    while (expected[i] == word_[i]) ++i;
    return "first difference at position " + std::to_string(i) + ": expected '" + to_char(expected[i]) + "', have '" +
           to_char(word_[i]) + "'";
  }

  Word initial_;
  Word word_;
  Binding binding_;
  std::set<std::size_t> marks_;
  bool after_delete_ = false;
  std::optional<Word> pre_delete_;
  std::size_t executed_ = 0;
  std::size_t deleted_ = 0;
  std::size_t deletions_ = 0;
  std::size_t current_index_ = 0;
  std::size_t current_line_ = 0;
  AccountingTally* tally_ = nullptr;
  std::vector<AccountingTally> accounting_;
};

}  // namespace detail

/// Replays `d` at parameter value `n`. Failures are reported, not thrown;
/// only n below the declared floor is a precondition error.
inline CheckReport check(const Derivation& d, std::int64_t n) {
  if (n < d.floor) {
    throw Error(ErrorCode::Precondition, "n = " + std::to_string(n) + " is below the declared floor " +
                                             std::to_string(d.floor) + " of '" + d.name + "'");
  }
  CheckReport report;
  report.derivation = d.name;
  report.n = n;
  Binding binding{{"n", n}};
  Word initial;
  try {
    initial = instantiate(lower(d.initial), binding);
  } catch (const Error& e) {
    report.failure = StepFailure{std::nullopt, 0, detail::cause_of(e.code()), e.what()};
    return report;
  }
  report.initial_length = initial.size();
  detail::Replayer replay(initial, binding);
  try {
    replay.run(d.steps, 0);
  } catch (const detail::Failed& f) {
    report.failure = StepFailure{replay.current_index(), replay.current_line(), f.cause, f.detail};
  } catch (const Error& e) {
    report.failure = StepFailure{replay.current_index(), replay.current_line(), detail::cause_of(e.code()), e.what()};
  }
  report.steps_executed = replay.steps_executed();
  report.deletions = replay.deletions();
  report.deleted = replay.deleted();
  report.final_word = replay.word();
  report.pre_delete_word = replay.pre_delete();
  report.final_length = report.final_word.size();
  report.pattern = match_any_goal_pattern(report.final_word);
  report.accounting = std::move(replay.accounting());
  report.passed = !report.failure.has_value();
  return report;
}

/// One report per n in [n_from, n_to], computed concurrently; order follows n.
inline std::vector<CheckReport> check_range(const Derivation& d, std::int64_t n_from, std::int64_t n_to,
                                            unsigned workers = std::thread::hardware_concurrency()) {
  if (n_from > n_to) {
    throw Error(ErrorCode::Precondition, "empty range " + std::to_string(n_from) + ".." + std::to_string(n_to));
  }
  if (n_from < d.floor) {
    throw Error(ErrorCode::Precondition, "n = " + std::to_string(n_from) + " is below the declared floor " +
                                             std::to_string(d.floor) + " of '" + d.name + "'");
  }
  std::size_t count = static_cast<std::size_t>(n_to - n_from + 1);
  std::vector<CheckReport> out(count);
  workers = std::max(1u, workers);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < std::min<std::size_t>(workers, count); ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < count; i += workers) out[i] = check(d, n_from + static_cast<std::int64_t>(i));
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

inline bool all_passed(const std::vector<CheckReport>& reports) {
  return std::all_of(reports.begin(), reports.end(), [](const CheckReport& r) { return r.passed; });
}

/// Flat `key: value` block, fixed field order.
inline std::string format_report(const CheckReport& r) {
  auto counts = [](const LetterCounts& c) { return "a=" + std::to_string(c.a) + " b=" + std::to_string(c.b); };
  std::ostringstream out;
  out << "derivation: " << r.derivation << "\n";
  out << "n: " << r.n << "\n";
  out << "status: " << (r.passed ? "pass" : "fail") << "\n";
  out << "steps_executed: " << r.steps_executed << "\n";
  out << "deletions: " << r.deletions << "\n";
  out << "initial_length: " << r.initial_length << "\n";
  out << "deleted: " << r.deleted << "\n";
  out << "final_length: " << r.final_length << "\n";
  out << "final_counts: " << counts(letter_counts(r.final_word)) << "\n";
  out << "final_word: " << r.final_word.str() << "\n";
  if (r.pattern) {
    out << "pattern: p=" << r.pattern->p << " m=" << r.pattern->match.m << " k=" << r.pattern->match.k
        << " j=" << r.pattern->match.j << "\n";
  } else {
    out << "pattern: none\n";
  }
  for (std::size_t i = 0; i < r.accounting.size(); ++i) {
    const AccountingTally& t = r.accounting[i];
    std::string key = "accounting[" + std::to_string(i) + "].";
    out << key << "before: " << counts(t.before) << "\n";
    out << key << "rewrites: " << t.rewrites << "\n";
    out << key << "consumed: " << counts(t.consumed) << "\n";
    out << key << "produced: " << counts(t.produced) << "\n";
    out << key << "omitted: " << counts(t.omitted) << "\n";
    out << key << "remaining: " << counts(t.remaining) << "\n";
  }
  if (r.failure) {
    out << "failure: step=" << (r.failure->step ? std::to_string(*r.failure->step) : std::string("initial"))
        << " line=" << r.failure->line << " cause=" << to_string(r.failure->cause) << " detail=" << r.failure->detail
        << "\n";
  } else {
    out << "failure: none\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Symbolic analysis

struct SymbolicTally {
  AffineExpr consumed_a, consumed_b;
  AffineExpr produced_a, produced_b;
  AffineExpr omitted_a, omitted_b;
  friend bool operator==(const SymbolicTally&, const SymbolicTally&) = default;
};

/// `expr >= 0` whenever every guard is >= 0 (the guards are trip counts
/// minus one of the enclosing loops).
struct Constraint {
  AffineExpr expr;
  std::vector<AffineExpr> guards;
  friend bool operator==(const Constraint&, const Constraint&) = default;
};

/// All-n accounting read off the script without replaying it.
struct SymbolicAccounting {
  AffineExpr initial_length;
  AffineExpr deleted;                     // total marked letters removed
  std::optional<AffineExpr> final_length;  // from the last top-level `assert word`
  std::vector<SymbolicTally> accounting;
  std::vector<Constraint> constraints;  // in n only
};

namespace detail {

struct LoopRange {
  std::string var;
  AffineExpr first;  // from
  AffineExpr last;   // to - 1
};

struct SymState {
  std::optional<AffineExpr> length, a, b;
  AffineExpr pending_marks;
  AffineExpr deleted;
  AffineExpr omitted_a, omitted_b;
  AffineExpr consumed_a, consumed_b, produced_a, produced_b;
};

inline std::optional<AffineExpr> add_opt(const std::optional<AffineExpr>& x, const std::optional<AffineExpr>& y) {
  if (!x || !y) return std::nullopt;
  return *x + *y;
}

inline std::optional<AffineExpr> scale_opt(const std::optional<AffineExpr>& x, const AffineExpr& k) {
  if (!x) return std::nullopt;
  try {
    return AffineExpr::multiply(*x, k);
  } catch (const Error&) {
    return std::nullopt;
  }
}

class SymbolicWalker {
 public:
  SymbolicAccounting result;

  void walk(const StepList& steps, SymState& st, bool top, bool in_accounting) {
    for (const Step& s : steps) step(s, st, top, in_accounting);
  }

  void require(const AffineExpr& e) {
    // Only binding when every enclosing loop runs at least once.
    Constraint c{e, {}};
    for (const LoopRange& l : loops_) c.guards.push_back(l.last - l.first);
    // Eliminate loop variables innermost first; everything is affine in each
    // variable, so the extremes of its range suffice.
    std::vector<Constraint> pending{c};
    for (auto it = loops_.rbegin(); it != loops_.rend(); ++it) {
      std::vector<Constraint> next;
      for (const Constraint& x : pending) {
        bool mentions = x.expr.coeff(it->var) != 0 ||
                        std::any_of(x.guards.begin(), x.guards.end(),
                                    [&](const AffineExpr& g) { return g.coeff(it->var) != 0; });
        if (!mentions) {
          next.push_back(x);
          continue;
        }
        for (const AffineExpr* v : {&it->first, &it->last}) {
          Constraint y{x.expr.substitute(it->var, *v), {}};
          for (const AffineExpr& g : x.guards) y.guards.push_back(g.substitute(it->var, *v));
          next.push_back(std::move(y));
        }
      }
      pending = std::move(next);
    }
    for (Constraint& x : pending) {
      if (std::find(result.constraints.begin(), result.constraints.end(), x) == result.constraints.end()) {
        result.constraints.push_back(std::move(x));
      }
    }
  }

  void require_word(const WordExpr& e) {
    for (const AffineExpr& c : lower(e).count_constraints()) require(c);
  }

 private:
  void step(const Step& s, SymState& st, bool top, bool in_accounting) {
    std::visit(
        [&](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, RewriteStep>) {
            auto len = static_cast<std::int64_t>(rule_lhs(k.rule).size());
            require(k.pos);
            if (st.length) require(*st.length - k.pos - len);
            LetterCounts l = letter_counts(rule_lhs(k.rule)), r = letter_counts(rule_rhs(k.rule));
            auto da = static_cast<std::int64_t>(r.a) - static_cast<std::int64_t>(l.a);
            st.a = add_opt(st.a, AffineExpr(da));
            st.b = add_opt(st.b, AffineExpr(-da));
            st.consumed_a += static_cast<std::int64_t>(l.a);
            st.consumed_b += static_cast<std::int64_t>(l.b);
            st.produced_a += static_cast<std::int64_t>(r.a);
            st.produced_b += static_cast<std::int64_t>(r.b);
          } else if constexpr (std::is_same_v<T, LoopStep>) {
            loop(k, st, in_accounting);
          } else if constexpr (std::is_same_v<T, MarkStep>) {
            for (const AffineExpr& p : k.positions) {
              require(p);
              if (st.length) require(*st.length - p - 1);
            }
            st.pending_marks += static_cast<std::int64_t>(k.positions.size());
          } else if constexpr (std::is_same_v<T, DeleteMarkedStep>) {
            saw_reset_ = true;
            st.length = add_opt(st.length, -st.pending_marks);
            st.deleted += st.pending_marks;
            st.pending_marks = 0;
            st.a.reset();
            st.b.reset();
          } else if constexpr (std::is_same_v<T, AssertWordStep>) {
            require_word(k.expected);
            saw_reset_ = true;
            SymbolicCounts c = symbolic_counts(lower(k.expected));
            st.length = c.length;
            st.a = c.a;
            st.b = c.b;
            if (top && !in_accounting) result.final_length = c.length;
          } else if constexpr (std::is_same_v<T, AssertEquivInitialStep>) {
          } else if constexpr (std::is_same_v<T, AccountingStep>) {
            SymState scratch = st;
            scratch.consumed_a = scratch.consumed_b = scratch.produced_a = scratch.produced_b = 0;
            scratch.omitted_a = scratch.omitted_b = 0;
            walk(k.body, scratch, false, true);
            result.accounting.push_back({scratch.consumed_a, scratch.consumed_b, scratch.produced_a,
                                         scratch.produced_b, scratch.omitted_a, scratch.omitted_b});
          } else if constexpr (std::is_same_v<T, OmitStep>) {
            require(k.vertical);
            require(k.horizontal);
            st.omitted_a += k.vertical;
            st.omitted_b += k.horizontal;
            if (st.a) require(*st.a - st.omitted_a);
            if (st.b) require(*st.b - st.omitted_b);
          }
        },
        s.kind);
  }

  void loop(const LoopStep& k, SymState& st, bool in_accounting) {
    AffineExpr trips = k.to - k.from;
    require(trips);

    // Per-iteration effect, measured from a zero state.
    SymState delta;
    delta.length = 0;
    delta.a = 0;
    delta.b = 0;
    {
      SymbolicWalker probe;
      probe.loops_ = loops_;
      probe.loops_.push_back({k.var, k.from, k.to - 1});
      probe.walk(k.body, delta, false, in_accounting);
      complete_ = complete_ && probe.complete_;
      // Deletions and asserted words set absolute state; no per-iteration delta.
      if (probe.saw_reset_) {
        delta.length.reset();
        delta.a.reset();
        delta.b.reset();
        saw_reset_ = true;
      }
    }
    bool length_safe = delta.length && delta.deleted == AffineExpr(0) && delta.length->coeff(k.var) == 0;
    auto iteration = AffineExpr::var(k.var) - k.from;

    // State at the start of iteration `var`.
    SymState inner = st;
    inner.length = length_safe ? add_opt(st.length, scale_opt(delta.length, iteration)) : std::nullopt;
    inner.a = delta.a && delta.a->coeff(k.var) == 0 ? add_opt(st.a, scale_opt(delta.a, iteration)) : std::nullopt;
    inner.b = delta.b && delta.b->coeff(k.var) == 0 ? add_opt(st.b, scale_opt(delta.b, iteration)) : std::nullopt;
    inner.pending_marks = 0;
    loops_.push_back({k.var, k.from, k.to - 1});
    walk(k.body, inner, false, in_accounting);
    loops_.pop_back();

    auto total = [&](const AffineExpr& per) -> std::optional<AffineExpr> {
      if (per.coeff(k.var) != 0) return std::nullopt;
      return scale_opt(per, trips);
    };
    st.length = length_safe ? add_opt(st.length, scale_opt(delta.length, trips)) : std::nullopt;
    st.a = delta.a && delta.a->coeff(k.var) == 0 ? add_opt(st.a, scale_opt(delta.a, trips)) : std::nullopt;
    st.b = delta.b && delta.b->coeff(k.var) == 0 ? add_opt(st.b, scale_opt(delta.b, trips)) : std::nullopt;
    auto accumulate = [&](AffineExpr& into, const AffineExpr& per) {
      if (auto t = total(per)) into += *t;
      else complete_ = false;
    };
    accumulate(st.pending_marks, delta.pending_marks);
    accumulate(st.deleted, delta.deleted);
    accumulate(st.consumed_a, delta.consumed_a);
    accumulate(st.consumed_b, delta.consumed_b);
    accumulate(st.produced_a, delta.produced_a);
    accumulate(st.produced_b, delta.produced_b);
    accumulate(st.omitted_a, delta.omitted_a);
    accumulate(st.omitted_b, delta.omitted_b);
  }

  std::vector<LoopRange> loops_;
  bool saw_reset_ = false;

 public:
  bool complete_ = true;  // false when some loop total was not affine
};

}  // namespace detail

inline SymbolicAccounting symbolic_accounting(const Derivation& d) {
  detail::SymbolicWalker walker;
  ParamWord init = lower(d.initial);
  walker.result.initial_length = symbolic_counts(init).length;
  walker.require_word(d.initial);
  SymbolicCounts c = symbolic_counts(init);
  detail::SymState st;
  st.length = c.length;
  st.a = c.a;
  st.b = c.b;
  walker.walk(d.steps, st, true, false);
  walker.result.deleted = st.deleted;
  if (!walker.complete_) {
    throw Error(ErrorCode::NonAffine, "derivation '" + d.name + "' has loop totals that are not affine in n");
  }
  return walker.result;
}

/// Least n0 such that every constraint holds for all n >= n0. A guarded
/// constraint whose guards switch on only after the constraint itself is
/// satisfied never binds.
inline Threshold guarded_threshold(const std::vector<Constraint>& constraints) {
  std::int64_t best = kGlobalFloorN;
  for (const Constraint& c : constraints) {
    Threshold own = min_nonneg_n({c.expr});
    std::optional<std::int64_t> guards_on = kGlobalFloorN;  // nullopt: never all on
    for (const AffineExpr& g : c.guards) {
      Threshold t = min_nonneg_n({g});
      if (t.kind == Threshold::Kind::Infeasible) {
        guards_on.reset();
        break;
      }
      // A guard that is on only for small n cannot excuse the constraint.
      if (t.kind == Threshold::Kind::UnboundedBelow) continue;
      guards_on = std::max(*guards_on, t.n);
    }
    if (!guards_on) continue;
    if (!own.bounded()) return own;
    if (*guards_on >= own.n) continue;
    best = std::max(best, own.n);
  }
  return Threshold::at(best);
}

/// Least n >= floor for which every count, trip count, mark and rewrite
/// position in the script is in range.
inline std::int64_t derived_min_n(const Derivation& d) {
  SymbolicAccounting acc = symbolic_accounting(d);
  Threshold t = guarded_threshold(acc.constraints);
  if (!t.bounded()) throw Error(ErrorCode::NoThreshold, "derivation '" + d.name + "' has no lower threshold in n");
  return std::max(t.n, d.floor);
}

// ---------------------------------------------------------------------------
// Macro rules expanded into elementary braid moves

inline constexpr std::string_view kR3Expansion = R"(# (ab)^5 -> (a^3 b)^2 a^2 using only aba <-> bab
derivation r3_expansion
initial (ab)^5
braid rev at 1
braid fwd at 4
assert word aabababbab
braid rev at 2
braid rev at 7
assert word aaabaababa
braid rev at 6
assert equiv initial
assert word (a^3b)^2a^2
)";

inline constexpr std::string_view kR4Expansion = R"(# (ab)^5 -> b^2 (ab^3)^2 using only aba <-> bab
derivation r4_expansion
initial (ab)^5
braid rev at 3
braid fwd at 6
assert word abaabababb
braid fwd at 0
braid fwd at 5
assert word bababbabbb
braid fwd at 1
assert equiv initial
assert word b^2(ab^3)^2
)";

/// A derivation from (ab)^5 to the right-hand side of R3 or R4 that uses only
/// elementary braid moves.
inline Derivation expand_macro_fixture(RuleId rule) {
  switch (rule) {
    case RuleId::R3: return parse_derivation(kR3Expansion);
    case RuleId::R4: return parse_derivation(kR4Expansion);
    default: throw Error(ErrorCode::Precondition, "only R3 and R4 have expansion fixtures");
  }
}

}  // namespace handleword
