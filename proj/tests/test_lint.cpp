#include <gtest/gtest.h>

#include <functional>

#include "odefit/bench.hpp"
#include "odefit/lint.hpp"
#include "lint_decks.hpp"

using namespace odefit;
using namespace lint_decks;

namespace {

std::set<std::pair<std::string, std::string>> unfixed_criticals(const LintReport& r) {
  std::set<std::pair<std::string, std::string>> s;
  for (const auto& f : r.findings)
    if (f.severity == Severity::critical) s.insert({f.code, f.location});
  return s;
}

}  // namespace

TEST(LintDeck, BaseDeckIsClean) {
  const auto r = lint_deck(base_deck());
  EXPECT_TRUE(r.findings.empty()) << lint_reports_to_text({r});
  EXPECT_TRUE(r.clean());
}

TEST(LintDeck, RobertsonWithDataHasNoFindings) {
  const auto& bc = get_benchmark("robertson");
  auto d = bc.deck();
  d.dataset.table = parse_csv(generate_synthetic(bc, 7));
  const auto r = lint_deck(d);
  EXPECT_TRUE(r.findings.empty()) << lint_reports_to_text({r});
  EXPECT_TRUE(r.clean());
}

TEST(LintDeck, EveryRuleHasATriggeringDeck) {
  const auto& codes = lint_rule_codes();
  EXPECT_EQ(rule_decks().size(), codes.size());
  for (const auto& code : codes) {
    ASSERT_TRUE(rule_decks().count(code)) << code;
    const auto r = lint_deck(rule_deck(code));
    EXPECT_TRUE(r.has(code)) << code << "\n" << lint_reports_to_text({r});
  }
}

TEST(LintDeck, SeveritiesAndFixability) {
  struct Expect {
    Severity severity;
    bool fixable;
  };
  const std::map<std::string, Expect> expected{
      {"unused-parameter", {Severity::warning, false}},       {"undeclared-symbol", {Severity::critical, false}},
      {"inverted-bounds", {Severity::critical, true}},        {"zero-width-bounds", {Severity::warning, false}},
      {"nonmonotone-time", {Severity::critical, true}},       {"missing-column", {Severity::critical, false}},
      {"unidentifiable-state", {Severity::warning, false}},   {"bounds-span-linear", {Severity::warning, true}},
      {"unbound-loss-signal", {Severity::critical, false}},   {"loose-stiff-tolerance", {Severity::warning, false}},
      {"log10-nonpositive-data", {Severity::warning, false}}, {"explicit-solver-on-stiff", {Severity::warning, false}},
  };
  for (const auto& [code, e] : expected) {
    const auto r = lint_deck(rule_deck(code));
    for (const auto& f : r.findings)
      if (f.code == code) {
        EXPECT_EQ(f.severity, e.severity) << code;
        EXPECT_EQ(f.fixable, e.fixable) << code;
        EXPECT_FALSE(f.message.empty());
        EXPECT_FALSE(f.location.empty());
      }
  }
}

TEST(LintDeck, UnusedParameterNamed) {
  auto d = base_deck();
  d.parameters.push_back({"beta", 0.0, 1.0, ParamScale::linear});
  const auto r = lint_deck(d);
  ASSERT_EQ(r.count("unused-parameter"), 1u);
  EXPECT_NE(r.findings[0].message.find("beta"), std::string::npos);
  EXPECT_TRUE(r.clean());
}

TEST(LintDeck, ExpressionSyntaxCarriesSpan) {
  const auto r = lint_deck(rule_deck("expression-syntax"));
  ASSERT_TRUE(r.has("expression-syntax"));
  for (const auto& f : r.findings)
    if (f.code == "expression-syntax") EXPECT_NE(f.location.find("rhs/equation[y] ["), std::string::npos) << f.location;
}

TEST(AutoFix, InvertedBoundsAreSwapped) {
  auto d = get_benchmark("robertson").deck();
  d.parameters[1].lower = 1e9;
  d.parameters[1].upper = 1e5;
  auto r = lint_deck(d);
  ASSERT_TRUE(r.has("inverted-bounds"));
  EXPECT_FALSE(r.clean());
  const auto fixed = auto_fix(d, r);
  ASSERT_EQ(fixed.changes.size(), 1u);
  EXPECT_NE(fixed.changes[0].find("swapped"), std::string::npos);
  EXPECT_EQ(fixed.deck.parameters[1].lower, 1e5);
  EXPECT_EQ(fixed.deck.parameters[1].upper, 1e9);
  EXPECT_TRUE(r.clean());  // the finding now carries its fix
  EXPECT_TRUE(lint_deck(fixed.deck).findings.empty());
}

TEST(AutoFix, SwappedRowsAreSorted) {
  auto d = base_deck();
  data_col(d, 0) = {0.0, 2.0, 1.0};
  data_col(d, 1) = {1.0, 0.14, 0.37};
  auto r = lint_deck(d);
  const auto fixed = auto_fix(d, r);
  ASSERT_EQ(fixed.changes.size(), 1u);
  EXPECT_EQ(fixed.deck.dataset.table->columns[0], (std::vector<double>{0.0, 1.0, 2.0}));
  EXPECT_EQ(fixed.deck.dataset.table->columns[1], (std::vector<double>{1.0, 0.37, 0.14}));
  EXPECT_EQ(fixed.deck.dataset.path, "decay.sorted.csv");
  EXPECT_TRUE(lint_deck(fixed.deck).clean());
}

TEST(AutoFix, UndeclaredSymbolIsNotRepaired) {
  const auto d = rule_deck("undeclared-symbol");
  auto r = lint_deck(d);
  const auto fixed = auto_fix(d, r);
  EXPECT_TRUE(fixed.changes.empty());
  EXPECT_EQ(fixed.deck, d);
  EXPECT_FALSE(r.clean());
}

TEST(AutoFix, OtherRepairs) {
  {
    const auto d = rule_deck("bounds-span-linear");
    auto r = lint_deck(d);
    EXPECT_EQ(auto_fix(d, r).deck.parameters[0].scale, ParamScale::log10);
  }
  {
    const auto d = rule_deck("log-scale-nonpositive");
    auto r = lint_deck(d);
    EXPECT_EQ(auto_fix(d, r).deck.parameters[0].scale, ParamScale::linear);
  }
  {
    const auto d = rule_deck("data-outside-span");
    auto r = lint_deck(d);
    EXPECT_EQ(auto_fix(d, r).deck.solver.t1, 2.0);
  }
  {
    const auto d = rule_deck("missing-loss");
    auto r = lint_deck(d);
    const auto f = auto_fix(d, r);
    ASSERT_EQ(f.deck.loss.size(), 1u);
    EXPECT_EQ(f.deck.loss[0].signal, "y");
    EXPECT_TRUE(lint_deck(f.deck).clean());
  }
}

TEST(LintLoop, OneFixableCritical) {
  const auto res = lint_loop(rule_deck("inverted-bounds"), 5);
  ASSERT_EQ(res.reports.size(), 2u);
  EXPECT_TRUE(res.reports[1].clean());
  EXPECT_TRUE(res.reports[1].findings.empty());
  EXPECT_TRUE(res.clean());
  EXPECT_EQ(res.reports[0].iterations_used, 1u);
  EXPECT_EQ(res.reports[1].iterations_used, 2u);
}

TEST(LintLoop, UnfixableCriticalUsesTheBudget) {
  const auto res = lint_loop(rule_deck("undeclared-symbol"), 3);
  ASSERT_EQ(res.reports.size(), 3u);
  for (const auto& r : res.reports) EXPECT_FALSE(r.clean());
  EXPECT_FALSE(res.clean());
}

TEST(LintLoop, CleanDeckNeedsOneReport) {
  const auto res = lint_loop(base_deck(), 5);
  ASSERT_EQ(res.reports.size(), 1u);
  EXPECT_TRUE(res.clean());
}

TEST(LintLoop, WithoutFixingNothingChanges) {
  const auto d = rule_deck("inverted-bounds");
  const auto res = lint_loop(d, 3, false);
  EXPECT_EQ(res.reports.size(), 3u);
  EXPECT_EQ(res.deck, d);
  EXPECT_FALSE(res.clean());
}

TEST(LintLoop, ZeroBudgetIsRejected) { EXPECT_THROW(lint_loop(base_deck(), 0), std::invalid_argument); }

TEST(Property, AutoFixNeverAddsCriticals) {
  for (const auto& code : lint_rule_codes()) {
    const auto d = rule_deck(code);
    auto r = lint_deck(d);
    const auto before = unfixed_criticals(r);
    const auto after = unfixed_criticals(lint_deck(auto_fix(d, r).deck));
    for (const auto& c : after) EXPECT_TRUE(before.count(c)) << code << " introduced " << c.first << " at " << c.second;
  }
}

TEST(Property, LoopIsDeterministic) {
  for (const auto& code : lint_rule_codes()) {
    const auto a = lint_loop(rule_deck(code), 4);
    const auto b = lint_loop(rule_deck(code), 4);
    EXPECT_EQ(a.reports, b.reports) << code;
    EXPECT_EQ(a.deck, b.deck) << code;
  }
}

TEST(Property, CleanIffNoUnfixedCritical) {
  for (const auto& code : lint_rule_codes()) {
    auto r = lint_deck(rule_deck(code));
    const bool any_open = std::any_of(r.findings.begin(), r.findings.end(),
                                      [](const auto& f) { return f.severity == Severity::critical && !f.fix; });
    EXPECT_EQ(r.clean(), !any_open) << code;
  }
}

TEST(Reports, JsonAndTextCarryTheSameFindings) {
  const auto res = lint_loop(rule_deck("inverted-bounds"), 5);
  const auto j = lint_reports_to_json(res.reports);
  const auto text = lint_reports_to_text(res.reports);
  EXPECT_TRUE(j["clean"].get<bool>());
  EXPECT_EQ(j["iterations_used"].get<std::size_t>(), 2u);
  ASSERT_EQ(j["reports"].size(), 2u);
  const auto& f = j["reports"][0]["findings"][0];
  EXPECT_EQ(f["code"], "inverted-bounds");
  EXPECT_EQ(f["severity"], "critical");
  EXPECT_TRUE(f["fix"].is_string());
  EXPECT_NE(text.find("critical inverted-bounds"), std::string::npos);
  EXPECT_NE(text.find("fixed: " + f["fix"].get<std::string>()), std::string::npos);
  EXPECT_NE(text.find("iteration 2: clean"), std::string::npos);
}
