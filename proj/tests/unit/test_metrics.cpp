#include <gtest/gtest.h>

#include <functional>
#include <string>

#include "helpers.hpp"

using namespace airwrite;

namespace {

// Plain recursive Levenshtein, no tables.
std::size_t levenshtein(const std::string& a, const std::string& b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  const std::string ra = a.substr(1), rb = b.substr(1);
  if (a[0] == b[0]) return levenshtein(ra, rb);
  return 1 + std::min({levenshtein(ra, rb), levenshtein(ra, b), levenshtein(a, rb)});
}

std::vector<std::string> all_strings(std::size_t max_len) {
  std::vector<std::string> out{""};
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].size() == max_len) continue;
    for (char c : {'a', 'b', 'c'}) out.push_back(out[i] + c);
  }
  return out;
}

}  // namespace

TEST(EditOps, TotalMatchesExhaustiveOracle) {
  const auto words = all_strings(4);
  ASSERT_EQ(words.size(), 121u);
  for (const auto& a : words)
    for (const auto& b : words) {
      const EditStats s = edit_ops(a, b);
      ASSERT_EQ(s.distance(), levenshtein(a, b)) << a << " / " << b;
      ASSERT_EQ(s.n_t, a.size());
      // Every alignment satisfies |truth| - D = |pred| - I.
      ASSERT_EQ(a.size() - s.deletions, b.size() - s.insertions);
    }
}

TEST(EditOps, SwappingArgumentsSwapsDeletionsAndInsertions) {
  const auto words = all_strings(4);
  for (const auto& a : words)
    for (const auto& b : words) {
      const EditStats ab = edit_ops(a, b);
      const EditStats ba = edit_ops(b, a);
      ASSERT_EQ(ab.distance(), ba.distance());
      ASSERT_EQ(ab.deletions, ba.insertions) << a << " / " << b;
      ASSERT_EQ(ab.insertions, ba.deletions) << a << " / " << b;
      ASSERT_EQ(ab.substitutions, ba.substitutions) << a << " / " << b;
    }
}

TEST(EditOps, KnownCases) {
  EXPECT_EQ(edit_ops(std::string("kitten"), std::string("sitting")), (EditStats{0, 2, 1, 6}));
  EXPECT_EQ(edit_ops(std::string("abc"), std::string("")), (EditStats{3, 0, 0, 3}));
  EXPECT_EQ(edit_ops(std::string(""), std::string("ab")), (EditStats{0, 0, 2, 0}));
}

TEST(Rates, IdentityAndSingleInsertion) {
  const Rates same = cr_ar(edit_ops(std::string("a"), std::string("a")));
  EXPECT_EQ(same.cr, 1.0);
  EXPECT_EQ(same.ar, 1.0);
  const Rates extra = cr_ar(edit_ops(std::string("ab"), std::string("abc")));
  EXPECT_EQ(extra.cr, 1.0);
  EXPECT_EQ(extra.ar, 0.5);
}

TEST(Rates, CorrectRateBoundsAccuracyRate) {
  const auto words = all_strings(3);
  for (const auto& a : words) {
    if (a.empty()) continue;
    for (const auto& b : words) {
      const EditStats s = edit_ops(a, b);
      const Rates r = cr_ar(s);
      ASSERT_GE(r.cr, r.ar);
      ASSERT_EQ(r.cr == r.ar, s.insertions == 0) << a << " / " << b;
      ASSERT_NEAR(cer(s), 1.0 - r.ar, 1e-15);
    }
  }
}

TEST(Rates, AccuracyRateCanGoNegative) {
  const Rates r = cr_ar(edit_ops(std::string("a"), std::string("abc")));
  EXPECT_EQ(r.cr, 1.0);
  EXPECT_EQ(r.ar, -1.0);
}

TEST(Rates, EmptyTruthIsUndefined) {
  try {
    cr_ar(edit_ops(std::string(""), std::string("a")));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::undefined_metric);
  }
  EXPECT_THROW(cer(std::string(""), std::string("")), Error);
}

TEST(Aggregate, MicroAveragesCounts) {
  std::vector<SampleResult> rows = {
      {"ab", "ab", edit_ops(std::string("ab"), std::string("ab"))},
      {"abcd", "abd", edit_ops(std::string("abcd"), std::string("abd"))},
      {"a", "ax", edit_ops(std::string("a"), std::string("ax"))},
  };
  const MetricsReport r = aggregate(rows);
  EXPECT_EQ(r.total.n_t, 7u);
  EXPECT_DOUBLE_EQ(r.cr, 6.0 / 7.0);
  EXPECT_DOUBLE_EQ(r.ar, 5.0 / 7.0);
  EXPECT_EQ(r.num_samples, 3u);
  const auto j = to_json(r);
  for (const char* key : {"cr", "ar", "cer", "n_t", "d_e", "s_e", "i_e", "num_samples"}) EXPECT_TRUE(j.contains(key));
  EXPECT_FALSE(j.contains("per_sample"));
  EXPECT_EQ(to_json(r, true)["per_sample"].size(), 3u);
  EXPECT_THROW(aggregate({}), Error);
}
