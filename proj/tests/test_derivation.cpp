#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <string>

#include "handleword/derivation.hpp"
#include "test_util.hpp"

namespace handleword {
namespace {

using testing::W;

const std::string kFixtures = HANDLEWORD_FIXTURE_DIR;

Derivation fixture(const std::string& name) { return load_derivation(kFixtures + "/" + name + ".deriv"); }

std::string rep(const std::string& s, std::int64_t k) {
  std::string out;
  for (std::int64_t i = 0; i < k; ++i) out += s;
  return out;
}

// Final words a^{p-1} b^{n+1} a^p b^k (ab)^{5n+c}, spelled out by hand.
struct Expected {
  const char* name;
  std::int64_t p;
  std::int64_t k;
  std::int64_t tail;  // (ab) exponent is 5n + tail
  std::int64_t min_n;
  std::int64_t deleted_offset;  // deleted = n + offset
};

const Expected kProps[] = {
    {"prop_3_1", 5, 5, -9, 4, 3},
    {"prop_3_2", 6, 2, -8, 5, 2},
    {"prop_3_3", 7, 3, -9, 9, 1},
    {"prop_3_4", 8, 4, -6, 24, -8},
};

std::string expected_final(const Expected& e, std::int64_t n) {
  return rep("a", e.p - 1) + rep("b", n + 1) + rep("a", e.p) + rep("b", e.k) + rep("ab", 5 * n + e.tail);
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Precondition;
}

TEST(WordExpr, ParseAndLower) {
  ParamWord pw = lower(parse_word_expr("(ab)^{6n}"));
  ASSERT_EQ(pw.segments().size(), 1u);
  EXPECT_EQ(pw.segments()[0].block, W("ab"));
  EXPECT_EQ(pw.segments()[0].count, parse_affine("6n"));

  EXPECT_EQ(lower(parse_word_expr("a^4b^{n+1}a^5b^5(ab)^{5n-9}")).segments().size(), 5u);
  EXPECT_EQ(instantiate(lower(parse_word_expr("a^4b^{n+1}a^5b^5(ab)^{5n-9}")), {{"n", 4}}).str(),
            "aaaabbbbbaaaaabbbbb" + rep("ab", 11));
  EXPECT_EQ(instantiate(lower(parse_word_expr("(a(ab)^2)^2 b")), {}), W("aababaababb"));
}

TEST(WordExpr, Errors) {
  EXPECT_EQ(code_of([] { parse_word_expr("a^"); }), ErrorCode::SyntaxError);
  EXPECT_EQ(code_of([] { parse_word_expr("(ab"); }), ErrorCode::SyntaxError);
  EXPECT_EQ(code_of([] { parse_word_expr("abc"); }), ErrorCode::SyntaxError);
  EXPECT_EQ(code_of([] { parse_word_expr(""); }), ErrorCode::SyntaxError);
  EXPECT_EQ(code_of([] { parse_word_expr("a^{-1}"); }), ErrorCode::NegativeLiteralExponent);
  EXPECT_EQ(code_of([] { parse_word_expr("(ab)^{3-5}"); }), ErrorCode::NegativeLiteralExponent);
  EXPECT_EQ(code_of([] { lower(parse_word_expr("((ab)^{n})^{n}")); }), ErrorCode::NonAffine);
  try {
    parse_word_expr("ab^");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("column"), std::string::npos);
  }
}

WordExpr random_tree(std::mt19937_64& rng, int depth) {
  WordExpr e;
  std::size_t terms = 1 + rng() % 3;
  for (std::size_t i = 0; i < terms; ++i) {
    WordTerm t;
    if (depth > 0 && rng() % 3 == 0) t.atom = random_tree(rng, depth - 1);
    else t.atom = (rng() & 1) ? Letter::A : Letter::B;
    switch (rng() % 4) {
      case 0: break;
      case 1: t.exponent = AffineExpr(static_cast<std::int64_t>(rng() % 5)); break;
      case 2: t.exponent = AffineExpr::var("n", 1 + static_cast<std::int64_t>(rng() % 6)) +
                           (static_cast<std::int64_t>(rng() % 21) - 10); break;
      default: t.exponent = AffineExpr(12); break;
    }
    e.terms.push_back(std::move(t));
  }
  return e;
}

// Counts by direct recursion over the tree, independent of `lower`.
std::int64_t tree_length(const WordExpr& e, std::int64_t n) {
  std::int64_t len = 0;
  for (const WordTerm& t : e.terms) {
    std::int64_t inner = std::holds_alternative<Letter>(t.atom) ? 1 : tree_length(std::get<WordExpr>(t.atom), n);
    len += inner * (t.exponent ? t.exponent->eval({{"n", n}}) : 1);
  }
  return len;
}

bool has_nested_parametric(const WordExpr& e, bool under_param) {
  for (const WordTerm& t : e.terms) {
    bool param = t.exponent && !t.exponent->is_constant();
    if (param && under_param) return true;
    if (const auto* g = std::get_if<WordExpr>(&t.atom); g && has_nested_parametric(*g, under_param || param)) {
      return true;
    }
  }
  return false;
}

TEST(WordExpr, RandomTreesRoundTripAndLowerFaithfully) {
  std::mt19937_64 rng(7);
  int lowered = 0;
  for (int trial = 0; trial < 500; ++trial) {
    WordExpr e = random_tree(rng, 3);
    std::string text = to_string(e);
    EXPECT_EQ(parse_word_expr(text), e) << text;
    if (has_nested_parametric(e, false)) continue;
    ParamWord pw = lower(e);
    ++lowered;
    for (std::int64_t n : {3, 7}) {
      Binding b{{"n", n}};
      std::int64_t expect = tree_length(e, n);
      bool negative = false;
      for (const AffineExpr& c : pw.count_constraints()) negative |= c.eval(b) < 0;
      if (negative) continue;
      EXPECT_EQ(static_cast<std::int64_t>(instantiate(pw, b).size()), expect) << text;
      EXPECT_EQ(symbolic_counts(pw).length.eval(b), expect) << text;
    }
  }
  EXPECT_GT(lowered, 100);
}

TEST(ParseDerivation, FixtureHeader) {
  Derivation d = fixture("prop_3_1");
  EXPECT_EQ(d.name, "prop_3_1");
  EXPECT_EQ(lower(d.initial), lower(parse_word_expr("(ab)^{6n}")));
  EXPECT_EQ(d.expected_min_n, 4);
}

TEST(ParseDerivation, Errors) {
  EXPECT_EQ(code_of([] { parse_derivation("derivation x\ninitial ab\nbraid fwd at m\n"); }),
            ErrorCode::UnboundVariable);
  EXPECT_EQ(code_of([] { parse_derivation("derivation x\ninitial ab\nmark k\n"); }), ErrorCode::UnboundVariable);
  EXPECT_EQ(code_of([] {
              parse_derivation("derivation x\ninitial ab\nforeach k in 0..n\nforeach k in 0..2\nend\nend\n");
            }),
            ErrorCode::DuplicateLoopVar);
  EXPECT_EQ(code_of([] { parse_derivation("derivation x\ninitial ab\nforeach n in 0..2\nend\n"); }),
            ErrorCode::DuplicateLoopVar);
  EXPECT_EQ(code_of([] { parse_derivation("derivation x\ninitial ab\nforeach k in 0..2\n"); }),
            ErrorCode::SyntaxError);
  EXPECT_EQ(code_of([] { parse_derivation("derivation x\ninitial ab\nend\n"); }), ErrorCode::SyntaxError);
  EXPECT_EQ(code_of([] { parse_derivation("derivation x\ninitial ab\nbraid sideways at 0\n"); }),
            ErrorCode::SyntaxError);
  EXPECT_EQ(code_of([] { parse_derivation("derivation x\ninitial ab\nomit vertical 1 horizontal 1\n"); }),
            ErrorCode::SyntaxError);
  EXPECT_EQ(code_of([] { parse_derivation("initial ab\n"); }), ErrorCode::SyntaxError);
  EXPECT_EQ(code_of([] { parse_derivation("derivation x\n"); }), ErrorCode::SyntaxError);
  EXPECT_EQ(code_of([] { load_derivation("/nonexistent/missing.deriv"); }), ErrorCode::Precondition);
  try {
    parse_derivation("derivation x\ninitial ab\n\nbraid fwd at 2m\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 4"), std::string::npos) << e.what();
  }
}

TEST(ParseDerivation, LoopVariablesMayBeReusedInSiblingLoops) {
  Derivation d = parse_derivation(
      "derivation x\ninitial (ab)^{n}\nforeach k in 0..1\nend\nforeach k in 0..1\nmark 2k\nend\n");
  EXPECT_EQ(d.steps.size(), 2u);
}

TEST(ParseDerivation, RoundTripsFixtures) {
  for (const char* name : {"prop_3_1", "prop_3_2", "prop_3_3", "prop_3_4", "r4_repeat", "r3_expansion",
                           "r4_expansion"}) {
    Derivation d = fixture(name);
    std::string printed = print_derivation(d);
    Derivation again = parse_derivation(printed);
    EXPECT_EQ(again, d) << name;
    EXPECT_EQ(print_derivation(again), printed) << name;
  }
}

TEST(Check, IdentityDerivation) {
  Derivation d = parse_derivation("derivation id\ninitial (ab)^{2n}\nassert word (ab)^{2n}\n");
  for (std::int64_t n : {1, 5}) {
    CheckReport r = check(d, n);
    EXPECT_TRUE(r.passed);
    EXPECT_EQ(r.deleted, 0u);
    EXPECT_EQ(r.final_word.str(), rep("ab", 2 * n));
  }
  Derivation empty = parse_derivation("derivation e\ninitial ab\n");
  CheckReport r = check(empty, 1);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.steps_executed, 0u);
}

TEST(Check, FixturesReachTheGoalWords) {
  for (const Expected& e : kProps) {
    Derivation d = fixture(e.name);
    for (std::int64_t n = e.min_n; n < e.min_n + 6; ++n) {
      CheckReport r = check(d, n);
      ASSERT_TRUE(r.passed) << format_report(r);
      EXPECT_EQ(r.final_word.str(), expected_final(e, n)) << e.name << " n=" << n;
      EXPECT_EQ(r.initial_length, static_cast<std::size_t>(12 * n));
      EXPECT_EQ(static_cast<std::int64_t>(r.deleted), n + e.deleted_offset) << e.name;
      EXPECT_EQ(r.initial_length, r.final_length + r.deleted);
      ASSERT_TRUE(r.pattern.has_value());
      EXPECT_EQ(r.pattern->p, static_cast<std::size_t>(e.p));
      EXPECT_EQ(static_cast<std::int64_t>(r.pattern->match.m), n + 1);
      EXPECT_EQ(static_cast<std::int64_t>(r.pattern->match.k), e.k);
      ASSERT_TRUE(r.pre_delete_word.has_value());
      EXPECT_TRUE(equivalent(*r.pre_delete_word, W(rep("ab", 6 * n))));
    }
  }
}

TEST(Check, Prop31AtFourDeletesSeven) {
  CheckReport r = check(fixture("prop_3_1"), 4);
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.deleted, 7u);
  EXPECT_EQ(r.deletions, 1u);
}

TEST(Check, BelowThresholdFails) {
  CheckReport r = check(fixture("prop_3_4"), 23);
  EXPECT_FALSE(r.passed);
  ASSERT_TRUE(r.failure.has_value());
  EXPECT_EQ(r.failure->cause, FailureCause::NegativeCount);
  EXPECT_TRUE(r.failure->step.has_value());
  EXPECT_GT(r.failure->line, 0u);
  for (const Expected& e : kProps) {
    Derivation d = fixture(e.name);
    EXPECT_FALSE(check(d, e.min_n - 1).passed) << e.name;
  }
}

TEST(Check, FailureCauses) {
  auto cause = [](const std::string& body, std::int64_t n = 1) {
    CheckReport r = check(parse_derivation("derivation t\ninitial (ab)^{3n}\n" + body), n);
    EXPECT_FALSE(r.passed) << body;
    return r.failure ? r.failure->cause : FailureCause::AssertFailed;
  };
  EXPECT_EQ(cause("braid fwd at 1\n"), FailureCause::PatternMismatch);
  EXPECT_EQ(cause("braid fwd at 4\n"), FailureCause::OutOfRange);
  EXPECT_EQ(cause("braid fwd at n-2\n"), FailureCause::OutOfRange);
  EXPECT_EQ(cause("assert word (ab)^2\n"), FailureCause::AssertFailed);
  EXPECT_EQ(cause("mark 0\ndelete marked\nassert equiv initial\n"), FailureCause::EquivAfterDelete);
  EXPECT_EQ(cause("mark 6\n"), FailureCause::OutOfRange);
  EXPECT_EQ(cause("mark 1, 1\n"), FailureCause::InvalidMarks);
  EXPECT_EQ(cause("foreach k in 0..n-2\nend\n"), FailureCause::NegativeCount);
  EXPECT_EQ(cause("assert word (ab)^{n-2}\n"), FailureCause::NegativeCount);
  CheckReport r = check(parse_derivation("derivation t\ninitial ab\nmark 0\nbraid fwd at 1\n"), 1);
  ASSERT_TRUE(r.failure.has_value());
  EXPECT_EQ(r.failure->step, 1u);
  EXPECT_EQ(r.failure->line, 4u);
}

TEST(Check, StepIndicesArePreOrder) {
  Derivation d = parse_derivation(
      "derivation t\ninitial (ab)^3\nforeach k in 0..2\nmark 2k\nend\nbraid fwd at 1\n");
  CheckReport r = check(d, 1);
  ASSERT_TRUE(r.failure.has_value());
  EXPECT_EQ(r.failure->step, 2u);
  EXPECT_EQ(r.steps_executed, 4u);
}

TEST(Check, MacroPartnersMustMatch) {
  Derivation d = parse_derivation("derivation t\ninitial ab\nassert equiv initial\n");
  EXPECT_TRUE(check(d, 1).passed);
  Derivation bad = parse_derivation("derivation t\ninitial (ab)^5\nmacro R4 at 0\nmacro R3' at 0\n");
  EXPECT_EQ(check(bad, 1).failure->cause, FailureCause::PatternMismatch);
}

TEST(Check, BelowFloorIsAPrecondition) {
  Derivation d = parse_derivation("derivation t\nparam n >= 3\ninitial (ab)^{n}\n");
  EXPECT_EQ(code_of([&] { check(d, 2); }), ErrorCode::Precondition);
  EXPECT_TRUE(check(d, 3).passed);
}

TEST(CheckRange, Examples) {
  std::vector<CheckReport> rs = check_range(fixture("prop_3_2"), 5, 12);
  ASSERT_EQ(rs.size(), 8u);
  EXPECT_TRUE(all_passed(rs));
  for (std::size_t i = 0; i < rs.size(); ++i) EXPECT_EQ(rs[i].n, 5 + static_cast<std::int64_t>(i));

  std::vector<CheckReport> one = check_range(fixture("prop_3_3"), 9, 9);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_TRUE(one[0].passed);
  EXPECT_EQ(one[0].deleted, 10u);

  EXPECT_EQ(code_of([] { check_range(fixture("prop_3_1"), 5, 4); }), ErrorCode::Precondition);
}

TEST(CheckRange, FailuresDoNotAbortTheSweep) {
  std::vector<CheckReport> rs = check_range(fixture("prop_3_4"), 22, 25, 3);
  ASSERT_EQ(rs.size(), 4u);
  EXPECT_FALSE(rs[0].passed);
  EXPECT_FALSE(rs[1].passed);
  EXPECT_TRUE(rs[2].passed);
  EXPECT_TRUE(rs[3].passed);
  EXPECT_FALSE(all_passed(rs));
}

TEST(CheckRange, IndependentOfWorkerCount) {
  Derivation d = fixture("prop_3_1");
  std::vector<CheckReport> a = check_range(d, 1, 12, 1);
  std::vector<CheckReport> b = check_range(d, 1, 12, 5);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(format_report(a[i]), format_report(b[i]));
}

TEST(SymbolicAccounting, DeletionIdentity) {
  const AffineExpr n = AffineExpr::var("n");
  for (const Expected& e : kProps) {
    SymbolicAccounting acc = symbolic_accounting(fixture(e.name));
    EXPECT_EQ(acc.initial_length, n * 12) << e.name;
    EXPECT_EQ(acc.deleted, n + e.deleted_offset) << e.name;
    ASSERT_TRUE(acc.final_length.has_value());
    // 12n minus the length of a^{p-1} b^{n+1} a^p b^k (ab)^{5n+tail}.
    AffineExpr final_len = AffineExpr(e.p - 1) + (n + 1) + e.p + e.k + (n * 5 + e.tail) * 2;
    EXPECT_EQ(*acc.final_length, final_len) << e.name;
    EXPECT_EQ(acc.initial_length, *acc.final_length + acc.deleted) << e.name;
  }
}

TEST(SymbolicAccounting, RepeatedR4Tally) {
  const AffineExpr n = AffineExpr::var("n");
  for (const Expected& e : kProps) {
    SymbolicAccounting acc = symbolic_accounting(fixture(e.name));
    ASSERT_EQ(acc.accounting.size(), 1u);
    const SymbolicTally& t = acc.accounting[0];
    EXPECT_EQ(t.consumed_a, n * 5 - 10);
    EXPECT_EQ(t.consumed_b, n * 5 - 10);
    EXPECT_EQ(t.produced_a, n * 2 - 4);
    EXPECT_EQ(t.produced_b, n * 8 - 16);
  }
}

TEST(SymbolicAccounting, MatchesConcreteTallies) {
  for (const Expected& e : kProps) {
    Derivation d = fixture(e.name);
    SymbolicAccounting acc = symbolic_accounting(d);
    for (std::int64_t n : {e.min_n, e.min_n + 3, std::int64_t{30}}) {
      CheckReport r = check(d, n);
      ASSERT_TRUE(r.passed);
      Binding b{{"n", n}};
      ASSERT_EQ(r.accounting.size(), 1u);
      const AccountingTally& c = r.accounting[0];
      const SymbolicTally& s = acc.accounting[0];
      EXPECT_EQ(static_cast<std::int64_t>(c.consumed.a), s.consumed_a.eval(b));
      EXPECT_EQ(static_cast<std::int64_t>(c.consumed.b), s.consumed_b.eval(b));
      EXPECT_EQ(static_cast<std::int64_t>(c.produced.a), s.produced_a.eval(b));
      EXPECT_EQ(static_cast<std::int64_t>(c.produced.b), s.produced_b.eval(b));
      EXPECT_EQ(static_cast<std::int64_t>(c.omitted.a), s.omitted_a.eval(b));
      EXPECT_EQ(static_cast<std::int64_t>(c.omitted.b), s.omitted_b.eval(b));
      EXPECT_EQ(c.rewrites, static_cast<std::size_t>(n - 2));
    }
  }
}

TEST(DerivedMinN, Fixtures) {
  for (const Expected& e : kProps) {
    Derivation d = fixture(e.name);
    EXPECT_EQ(derived_min_n(d), e.min_n) << e.name;
    EXPECT_EQ(d.expected_min_n, e.min_n) << e.name;
  }
  EXPECT_EQ(derived_min_n(fixture("r4_repeat")), 2);
  EXPECT_EQ(derived_min_n(fixture("r3_expansion")), 1);
}

TEST(DerivedMinN, IsTightAgainstReplay) {
  // Replay is the oracle: the derived threshold passes and the value below fails.
  for (const char* name : {"prop_3_1", "prop_3_2", "prop_3_3", "prop_3_4", "r4_repeat"}) {
    Derivation d = fixture(name);
    std::int64_t t = derived_min_n(d);
    EXPECT_TRUE(check(d, t).passed) << name;
    if (t - 1 >= d.floor) {
      EXPECT_FALSE(check(d, t - 1).passed) << name;
    }
  }
}

TEST(DerivedMinN, SmallScripts) {
  auto min_n = [](const std::string& body) {
    return derived_min_n(parse_derivation("derivation t\ninitial (ab)^{n}\n" + body));
  };
  EXPECT_EQ(min_n(""), 1);
  EXPECT_EQ(min_n("assert word (ab)^{n-3} (ab)^3\n"), 3);
  EXPECT_EQ(min_n("braid fwd at 2n-4\n"), 2);  // window [2n-4, 2n-1) inside length 2n
  EXPECT_EQ(min_n("macro R4 at 2n-12\n"), 6);
  EXPECT_EQ(min_n("mark n+5\n"), 6);           // n+5 < 2n
  EXPECT_EQ(min_n("foreach k in 0..n-5\nend\n"), 5);
  // A loop that may run zero times imposes nothing through its body.
  EXPECT_EQ(min_n("foreach k in 0..n-1\nmark 2k+2\nend\n"), 1);
}

TEST(ExpandMacro, ReachesRightHandSides) {
  for (RuleId rule : {RuleId::R3, RuleId::R4}) {
    Derivation d = expand_macro_fixture(rule);
    CheckReport r = check(d, 1);
    EXPECT_TRUE(r.passed) << format_report(r);
    EXPECT_EQ(r.final_word, rule_rhs(rule));
    std::function<void(const StepList&)> only_braid = [&](const StepList& steps) {
      for (const Step& s : steps) {
        if (const auto* rw = std::get_if<RewriteStep>(&s.kind)) {
          EXPECT_FALSE(is_macro(rw->rule));
        }
      }
    };
    only_braid(d.steps);
    ASSERT_GE(d.steps.size(), 2u);
    EXPECT_TRUE(std::holds_alternative<AssertEquivInitialStep>(d.steps[d.steps.size() - 2].kind));
    EXPECT_EQ(print_derivation(d), print_derivation(fixture(rule == RuleId::R3 ? "r3_expansion" : "r4_expansion")));
  }
  EXPECT_EQ(instantiate(lower(parse_word_expr("(a^3b)^2a^2")), {}).str(), "aaabaaabaa");
  EXPECT_EQ(instantiate(lower(parse_word_expr("b^2(ab^3)^2")), {}).str(), "bbabbbabbb");
  EXPECT_EQ(code_of([] { expand_macro_fixture(RuleId::BraidFwd); }), ErrorCode::Precondition);
}

TEST(FormatReport, StableKeys) {
  CheckReport r = check(fixture("prop_3_1"), 4);
  std::string text = format_report(r);
  std::vector<std::string> keys;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    keys.push_back(text.substr(start, text.find(':', start) - start));
    start = nl + 1;
  }
  std::vector<std::string> expected = {"derivation", "n", "status", "steps_executed", "deletions", "initial_length",
                                       "deleted", "final_length", "final_counts", "final_word", "pattern",
                                       "accounting[0].before", "accounting[0].rewrites", "accounting[0].consumed",
                                       "accounting[0].produced", "accounting[0].omitted", "accounting[0].remaining",
                                       "failure"};
  EXPECT_EQ(keys, expected);
  EXPECT_EQ(format_report(check(fixture("prop_3_1"), 4)), text);
}

}  // namespace
}  // namespace handleword
