#include <gtest/gtest.h>

#include "checks/metric_oracle.hpp"
#include "noisyrag/error.hpp"
#include "noisyrag/evalkit/report.hpp"
#include "support.hpp"

using namespace noisyrag;
using namespace noisyrag::evalkit;

TEST(Metrics, HandComputedCases) {
  for (const auto& c : checks::metric_cases()) {
    SCOPED_TRACE(c.prediction);
    EXPECT_EQ(exact_match(c.prediction, c.golds), c.em);
    EXPECT_NEAR(token_f1(c.prediction, c.golds), c.f1, 1e-9);
    EXPECT_EQ(accuracy(c.prediction, c.golds), c.acc);
  }
}

TEST(Metrics, RandomizedProperties) {
  const auto outcome = checks::check_metric_properties(10000, 2024);
  EXPECT_EQ(outcome.violations, 0u) << outcome.first_violation;
}

TEST(Metrics, Normalization) {
  EXPECT_EQ(normalize_answer("The  Quick, brown FOX!"), (std::vector<std::string>{"quick", "brown", "fox"}));
  EXPECT_TRUE(normalize_answer("a an the").empty());
}

TEST(Metrics, EmptyGoldListIsRejected) {
  std::vector<std::string> none;
  EXPECT_THROW(exact_match("x", none), Error);
  EXPECT_THROW(token_f1("x", none), Error);
  EXPECT_THROW(accuracy("x", none), Error);
}

TEST(Aggregate, Means) {
  auto r = aggregate({{"a", 1, 1.0, 1, false}, {"b", 0, 0.0, 0, false}});
  EXPECT_DOUBLE_EQ(r.overall.f1, 0.5);
  r = aggregate({{"c", 0, 0.2, 0, true}, {"a", 1, 0.8, 1, false}, {"b", 1, 0.8, 1, false}});
  EXPECT_NEAR(r.overall.f1, 0.6, 1e-12);
  EXPECT_NEAR(r.corrupted.f1, 0.2, 1e-12);
  EXPECT_NEAR(r.clean.f1, 0.8, 1e-12);
  EXPECT_EQ(r.corrupted.n, 1u);
  EXPECT_EQ(r.per_query.front().id, "a");
  EXPECT_EQ(r.per_query.back().id, "c");
  r = aggregate({{"x", 0, 0.25, 1, true}});
  EXPECT_EQ(r.overall, (SubsetMeans{1, 0.0, 0.25, 1.0}));
  EXPECT_EQ(r.clean.n, 0u);
}

TEST(Aggregate, DuplicateIdsAreRejected) {
  EXPECT_THROW(aggregate({{"a", 1, 1.0, 1, false}, {"a", 0, 0.0, 0, false}}), Error);
  EXPECT_THROW(aggregate({}), Error);
}

TEST(Report, JsonRoundTrip) {
  noisyrag::testing::TempDir dir("report");
  const auto r = aggregate({{"q1", 1, 1.0, 1, true}, {"q2", 0, 2.0 / 3.0, 1, false}});
  save_report(r, dir / "report.json");
  EXPECT_EQ(load_report(dir / "report.json"), r);
  EXPECT_EQ(report_from_json(to_json(empty_report())), empty_report());
}

TEST(Report, CsvTables) {
  const auto r = aggregate({{"q1", 1, 1.0, 1, true}, {"q2", 0, 0.5, 1, false}});
  const std::string csv = aggregates_csv(r);
  EXPECT_NE(csv.find("overall,2,0.500000,0.750000,1.000000"), std::string::npos) << csv;
  std::vector<NamedReport> named = {{"first", r}, {"second", r}};
  const std::string table = comparison_table_csv(named);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
  EXPECT_EQ(table.rfind("second,", table.size() - 1) != std::string::npos, true);
}
