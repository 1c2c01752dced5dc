// Copyright 2026 The Chorus Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "chorus/analytics.hpp"

namespace chorus {
namespace analytics {
namespace {

// ---------------------------------------------------------------------------
// Small corpus builder.

class Builder {
 public:
  Builder &Site(const std::string &id) {
    Ingest(RecordKind::kSite, R"({"site_id":")" + id + R"(","domain_name":")" + id +
                                  R"(.example","category":"news_media"})");
    return *this;
  }
  Builder &Article(const std::string &id, const std::string &site, const std::string &day,
                   std::vector<std::string> entities) {
    Ingest(RecordKind::kArticle, R"({"article_id":")" + id + R"(","site_id":")" + site +
                                     R"(","url":"u","title":"t","body":"b","published_at":")" + day +
                                     R"(T10:00:00Z"})");
    std::sort(entities.begin(), entities.end());
    ann_.article_entities[id] = std::move(entities);
    return *this;
  }
  Builder &Comment(const std::string &id, const std::string &article, const std::string &user,
                   std::optional<double> score, int likes = 0, int dislikes = 0,
                   const std::string &parent = "") {
    std::string line = R"({"comment_id":")" + id + R"(","article_id":")" + article +
                       R"(","user_id":")" + user +
                       R"(","body":"x","created_at":"2017-01-01T12:00:00Z","likes":)" +
                       std::to_string(likes) + R"(,"dislikes":)" + std::to_string(dislikes);
    if (!parent.empty()) line += R"(,"parent_comment_id":")" + parent + "\"";
    Ingest(RecordKind::kComment, line + "}");
    if (score) ann_.comment_scores[id] = *score;
    return *this;
  }
  const CorpusStore &store() const { return store_; }
  const Annotations &ann() const { return ann_; }

 private:
  void Ingest(RecordKind kind, const std::string &line) {
    std::istringstream in(line);
    IngestReport r = IngestStream(in, kind, store_);
    EXPECT_EQ(r.records_stored, 1u) << line;
  }
  CorpusStore store_;
  Annotations ann_;
};

// ---------------------------------------------------------------------------
// Entities

TEST(AggregateEntities, HandExample) {
  Builder b;
  b.Site("s").Article("a1", "s", "2017-01-01", {"E"}).Article("a2", "s", "2017-01-02", {"E"});
  b.Comment("c1", "a1", "u", 0.5).Comment("c2", "a1", "u", 0.5).Comment("c3", "a1", "u", -0.5);
  b.Comment("c4", "a2", "u", 0.5);
  auto aggs = AggregateEntities(b.store(), b.ann());
  ASSERT_EQ(aggs.size(), 1u);
  EXPECT_EQ(aggs[0].comment_count, 4u);
  EXPECT_EQ(aggs[0].article_count, 2u);
  EXPECT_DOUBLE_EQ(aggs[0].density, 2.0);
  EXPECT_DOUBLE_EQ(aggs[0].mean_sentiment, 0.25);
  // Article means 1/6 and 1/2.
  EXPECT_NEAR(aggs[0].article_mean_sentiment, (1.0 / 6 + 0.5) / 2, 1e-15);
}

TEST(AggregateEntities, PerSiteSlicesSumToTotals) {
  Builder b;
  b.Site("A").Site("B");
  b.Article("a1", "A", "2017-01-01", {"E", "F"}).Article("a2", "A", "2017-01-02", {"E"});
  b.Article("b1", "B", "2017-01-02", {"E", "surface:foo"}).Article("x", "B", "2017-01-03", {});
  for (auto [id, s] : {std::pair{"c1", 0.5}, {"c2", 0.5}, {"c3", -0.5}}) b.Comment(id, "a1", "u", s);
  b.Comment("c4", "a2", "u", 0.5).Comment("c5", "a2", "u", 0.0);
  b.Comment("c6", "b1", "v", -0.5);
  auto aggs = AggregateEntities(b.store(), b.ann());
  ASSERT_EQ(aggs.size(), 3u);
  EXPECT_EQ(aggs[0].entity_key, "E");
  EXPECT_EQ(aggs[2].entity_key, "surface:foo");
  EXPECT_FALSE(aggs[2].linked);
  const auto &e = aggs[0];
  const SiteSlice &A = e.per_site.at("A"), &B = e.per_site.at("B");
  EXPECT_EQ(A.article_count, 2u);
  EXPECT_EQ(A.comment_count, 5u);
  EXPECT_NEAR(A.mean_sentiment, 0.2, 1e-15);
  EXPECT_EQ(B.article_count, 1u);
  EXPECT_EQ(B.comment_count, 1u);
  EXPECT_DOUBLE_EQ(B.mean_sentiment, -0.5);
  std::size_t ac = 0, cc = 0;
  for (const auto &[site, s] : e.per_site) {
    ac += s.article_count;
    cc += s.comment_count;
  }
  EXPECT_EQ(ac, e.article_count);
  EXPECT_EQ(cc, e.comment_count);
  EXPECT_EQ(e.density, 2.0);

  // Multiplicity: per-entity article sets sum to at least the number of
  // articles with any entity.
  std::size_t sum = 0;
  for (const auto &a : aggs) sum += a.article_count;
  EXPECT_GE(sum, 3u);

  DateRange none{timeutil::DaysFromCivil(2020, 1, 1), timeutil::DaysFromCivil(2020, 1, 2)};
  EXPECT_TRUE(AggregateEntities(b.store(), b.ann(), none).empty());
}

TEST(AggregateEntities, LikeWeighting) {
  Builder b;
  b.Site("s").Article("a", "s", "2017-01-01", {"E"});
  b.Comment("c1", "a", "u", 1.0, 3).Comment("c2", "a", "u", -1.0, 0);
  AggregateOptions opt;
  opt.weight_by_likes = true;
  // Weights 4 and 1.
  EXPECT_DOUBLE_EQ(AggregateEntities(b.store(), b.ann(), {}, opt)[0].mean_sentiment, 0.6);
  EXPECT_DOUBLE_EQ(AggregateEntities(b.store(), b.ann())[0].mean_sentiment, 0.0);
}

// ---------------------------------------------------------------------------
// Influence

std::size_t BruteHIndex(const std::vector<std::uint64_t> &v) {
  std::size_t best = 0;
  for (std::size_t h = 0; h <= v.size(); ++h) {
    std::size_t at_least = 0;
    for (auto x : v) at_least += x >= h;
    if (at_least >= h) best = h;
  }
  return best;
}

TEST(HIndex, Examples) {
  EXPECT_EQ(HIndex({}), 0u);
  EXPECT_EQ(HIndex({10, 5, 3, 1}), 3u);
  EXPECT_EQ(HIndex({1, 1, 1}), 1u);
  EXPECT_EQ(HIndex({0, 0}), 0u);
  EXPECT_EQ(HIndex({100}), 1u);
}

TEST(HIndex, MatchesBruteForceAndIsMonotone) {
  util::Rng rng(1000);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::uint64_t> v(rng.Below(51));
    for (auto &x : v) x = rng.Below(101);
    std::size_t h = HIndex(v);
    ASSERT_EQ(h, BruteHIndex(v));
    EXPECT_LE(h, v.size());
    v.push_back(rng.Below(101));
    EXPECT_GE(HIndex(v), h);
  }
}

Builder InfluenceFixture() {
  Builder b;
  b.Site("s").Article("a", "s", "2017-01-01", {"E"});
  // u1: likes [10,5,3,1]; u2: one comment with 30 likes.
  b.Comment("c1", "a", "u1", 0.0, 10, 1).Comment("c2", "a", "u1", 0.0, 5);
  b.Comment("c3", "a", "u1", 0.0, 3).Comment("c4", "a", "u1", 0.0, 1, 2);
  b.Comment("c5", "a", "u2", 0.0, 30, 0);
  b.Comment("r1", "a", "u2", 0.0, 0, 0, "c1").Comment("r2", "a", "u3", 0.0, 0, 0, "c1");
  b.Comment("r3", "a", "u3", 0.0, 0, 0, "c2");
  return b;
}

TEST(Influence, MeasuresAndRankings) {
  Builder b = InfluenceFixture();
  auto report = UserInfluence(b.store(), &b.ann(), 10);
  ASSERT_EQ(report.users.size(), 3u);
  const UserAggregate &u1 = report.users[0];
  EXPECT_EQ(u1.user_id, "u1");
  EXPECT_EQ(u1.comments_count, 4u);
  EXPECT_EQ(u1.likes_count, 19u);
  EXPECT_EQ(u1.h_index_likes, 3u);
  EXPECT_EQ(u1.dislikes_count, 3u);
  EXPECT_EQ(u1.h_index_dislikes, 1u);
  EXPECT_EQ(u1.replies_count, 3u);
  EXPECT_EQ(u1.h_index_replies, 1u);
  EXPECT_EQ(u1.top_entities, (std::vector<std::pair<std::string, std::size_t>>{{"E", 4}}));
  const UserAggregate &u3 = report.users[2];
  EXPECT_EQ(u3.replies_written, 2u);
  EXPECT_EQ(u3.replies_count, 0u);
  for (const auto &u : report.users) {
    EXPECT_LE(u.h_index_likes, u.comments_count);
    EXPECT_LE(u.h_index_dislikes, u.comments_count);
    EXPECT_LE(u.h_index_replies, u.comments_count);
  }
  // likes_count leader is u2, h-index-likes leader is u1.
  EXPECT_EQ(report.rankings.at(Metric::kLikesCount).front(), "u2");
  EXPECT_EQ(report.rankings.at(Metric::kHIndexLikes).front(), "u1");
  // Ties by user id: u2 and u3 both wrote two comments.
  EXPECT_EQ(report.rankings.at(Metric::kCommentsCount),
            (std::vector<std::string>{"u1", "u2", "u3"}));

  UserAggregate none = InfluenceOf(b.store(), "ghost", {});
  for (Metric m : kMetrics) EXPECT_EQ(none.Measure(m), 0.0);
}

TEST(Influence, MetricNames) {
  for (Metric m : kMetrics) EXPECT_EQ(ParseMetric(MetricName(m)), m);
  EXPECT_EQ(MetricName(Metric::kHIndexLikes), "h-index-likes");
  EXPECT_THROW(ParseMetric("karma"), ParameterError);
}

// ---------------------------------------------------------------------------
// Correlation

TEST(Pearson, Examples) {
  std::vector<double> x = {1, 2, 3}, y = {3, 2, 1}, z = {1, 2, 4};
  EXPECT_EQ(*Pearson(x, x), 1.0);
  EXPECT_EQ(*Pearson(x, y), -1.0);
  // Means 2 and 7/3; covariance sum 3, variances 2 and 14/3.
  EXPECT_NEAR(*Pearson(x, z), 3.0 / std::sqrt(2.0 * 14.0 / 3.0), 1e-12);
  EXPECT_NEAR(*Pearson(x, z), 0.9820, 1e-4);
  std::vector<double> c = {2, 2, 2};
  EXPECT_FALSE(Pearson(x, c));
  EXPECT_THROW(Pearson(std::vector<double>{1}, std::vector<double>{1}), ParameterError);
  EXPECT_THROW(Pearson(x, std::vector<double>{1, 2}), ParameterError);
}

TEST(Pearson, PropertiesOnRandomData) {
  util::Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x(2 + rng.Below(20)), y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = rng.Uniform(-5, 5);
      y[i] = rng.Uniform(-5, 5);
    }
    double r = *Pearson(x, y);
    EXPECT_GE(r, -1.0);
    EXPECT_LE(r, 1.0);
    EXPECT_EQ(r, *Pearson(y, x));
    std::vector<double> ax(x);
    for (double &v : ax) v = 3.0 * v + 1.0;
    EXPECT_NEAR(*Pearson(ax, y), r, 1e-12);
    EXPECT_NEAR(*Pearson(x, ax), 1.0, 1e-12);
  }
}

void ExpectWellFormed(const CorrelationMatrix &cm) {
  ASSERT_EQ(cm.values.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) {
    if (!cm.degenerate[i]) {
      EXPECT_EQ(cm.values[i][i], 1.0);
    }
    for (std::size_t j = 0; j < 7; ++j) {
      EXPECT_EQ(cm.values[i][j], cm.values[j][i]);
      if (cm.degenerate[i]) {
        EXPECT_FALSE(cm.values[i][j]);
      }
    }
  }
}

TEST(Correlation, SymmetricUnitDiagonal) {
  Builder b = InfluenceFixture();
  auto report = UserInfluence(b.store(), nullptr, 5);
  auto cm = CorrelationOf(report.users);
  ExpectWellFormed(cm);
  EXPECT_EQ(cm.measure_names[4], "h-index-likes");

  util::Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<UserAggregate> users(2 + rng.Below(10));
    for (std::size_t i = 0; i < users.size(); ++i) {
      users[i].user_id = "u" + std::to_string(i);
      users[i].comments_count = rng.Below(10);
      users[i].likes_count = 2 * users[i].comments_count;  // proportional
      users[i].dislikes_count = rng.Below(5);
      users[i].h_index_likes = rng.Below(3);
    }
    auto m = CorrelationOf(users);
    ExpectWellFormed(m);
    if (!m.degenerate[0]) {
      EXPECT_NEAR(*m.values[0][2], 1.0, 1e-12);
    }
  }
  EXPECT_THROW(CorrelationOf(std::vector<UserAggregate>(1)), ParameterError);
}

// ---------------------------------------------------------------------------
// Time series

TEST(DailySeries, TwoLevelMean) {
  Builder b;
  b.Site("s");
  b.Article("a1", "s", "2017-01-01", {"E"}).Article("a2", "s", "2017-01-03", {"E"});
  b.Article("a3", "s", "2017-01-03", {"E"}).Article("a4", "s", "2017-01-04", {"F"});
  b.Comment("c1", "a1", "u", 0.2).Comment("c2", "a1", "u", 0.4);
  b.Comment("c3", "a2", "u", 0.1);
  for (auto id : {"c4", "c5", "c6"}) b.Comment(id, "a3", "u", 0.3);
  b.Comment("c7", "a3", "u", std::nullopt);
  auto s = DailySeries(b.store(), b.ann(), "E");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].day, timeutil::DaysFromCivil(2017, 1, 1));
  EXPECT_NEAR(s[0].mean_sentiment, 0.3, 1e-15);
  EXPECT_EQ(s[0].comment_count, 2u);
  EXPECT_NEAR(s[1].mean_sentiment, 0.2, 1e-15);  // not (0.1 + 0.9) / 4
  EXPECT_EQ(s[1].article_count, 2u);
  EXPECT_NEAR(s[1].std_dev, 0.1, 1e-15);
  EXPECT_THROW(DailySeries(b.store(), b.ann(), "Z"), NotFoundError);
  DateRange empty{timeutil::DaysFromCivil(2018, 1, 1), timeutil::DaysFromCivil(2018, 2, 1)};
  EXPECT_TRUE(DailySeries(b.store(), b.ann(), "E", empty).empty());
}

TimeSeries Series(std::initializer_list<std::pair<Day, double>> pts) {
  TimeSeries s;
  for (auto [d, v] : pts) s.push_back({d, v, 1, 1, 0.0});
  return s;
}

TEST(Interpolate, Examples) {
  auto g = InterpolateLinear(Series({{0, 0.2}, {2, 0.6}}));
  ASSERT_EQ(g.values.size(), 3u);
  EXPECT_NEAR(g.values[1], 0.4, 1e-15);
  EXPECT_EQ(g.observed, (std::vector<bool>{true, false, true}));

  auto h = InterpolateLinear(Series({{10, 0.0}, {13, 0.9}}));
  EXPECT_EQ(h.first_day, 10);
  EXPECT_NEAR(h.values[1], 0.3, 1e-15);
  EXPECT_NEAR(h.values[2], 0.6, 1e-15);

  auto id = InterpolateLinear(Series({{0, 0.1}, {1, -0.2}, {2, 0.7}}));
  EXPECT_EQ(id.values, (std::vector<double>{0.1, -0.2, 0.7}));
  EXPECT_THROW(InterpolateLinear(Series({{0, 0.1}})), ParameterError);
}

// Least-squares fit of the impulse responses with Eigen, evaluated at
// `position`: the column j of the result is the weight of sample j.
std::vector<double> EigenWeights(std::size_t window, std::size_t order, std::size_t position) {
  Eigen::MatrixXd v(window, order + 1);
  for (std::size_t r = 0; r < window; ++r)
    for (std::size_t c = 0; c <= order; ++c) v(r, c) = std::pow(static_cast<double>(r), c);
  std::vector<double> w(window);
  for (std::size_t j = 0; j < window; ++j) {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(window);
    y(j) = 1.0;
    Eigen::VectorXd coef = v.colPivHouseholderQr().solve(y);
    w[j] = v.row(position).dot(coef);
  }
  return w;
}

TEST(SavitzkyGolay, ImpulseCenter) {
  auto w = SavitzkyGolayWeights(5, 2, 2);
  const double want[] = {-3, 12, 17, 12, -3};
  for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(w[j], want[j] / 35.0, 1e-12);
  std::vector<double> impulse = {0, 0, 1, 0, 0};
  EXPECT_NEAR(SavitzkyGolay(impulse, 5, 2)[2], 17.0 / 35.0, 1e-12);
}

TEST(SavitzkyGolay, WeightsMatchLeastSquaresOracle) {
  for (std::size_t window : {3u, 5u, 7u, 9u, 11u})
    for (std::size_t order = 0; order < std::min<std::size_t>(window, 5); ++order)
      for (std::size_t pos = 0; pos < window; ++pos) {
        auto got = SavitzkyGolayWeights(window, order, pos);
        auto want = EigenWeights(window, order, pos);
        for (std::size_t j = 0; j < window; ++j)
          EXPECT_NEAR(got[j], want[j], 1e-9) << window << "/" << order << "@" << pos;
      }
}

TEST(SavitzkyGolay, PolynomialsPassThrough) {
  util::Rng rng(17);
  for (std::size_t window : {5u, 7u, 9u}) {
    for (std::size_t order : {1u, 2u, 3u}) {
      for (std::size_t degree = 0; degree <= order; ++degree) {
        std::vector<double> coef(degree + 1);
        for (double &c : coef) c = rng.Uniform(-1, 1);
        std::vector<double> y(25);
        for (std::size_t i = 0; i < y.size(); ++i) {
          const double x = static_cast<double>(i) / 4.0;
          double v = 0;
          for (std::size_t k = coef.size(); k-- > 0;) v = v * x + coef[k];
          y[i] = v;
        }
        auto out = SavitzkyGolay(y, window, order);
        ASSERT_EQ(out.size(), y.size());
        for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(out[i], y[i], 1e-9);
      }
    }
  }
  std::vector<double> flat(9, 0.37);
  for (double v : SavitzkyGolay(flat, 7, 3)) EXPECT_NEAR(v, 0.37, 1e-12);
}

TEST(SavitzkyGolay, Preconditions) {
  std::vector<double> y(10, 0.0);
  EXPECT_THROW(SavitzkyGolay(y, 4, 2), ParameterError);
  EXPECT_THROW(SavitzkyGolay(y, 1, 0), ParameterError);
  EXPECT_THROW(SavitzkyGolay(y, 5, 5), ParameterError);
  EXPECT_THROW(SavitzkyGolay(std::vector<double>(4, 0.0), 5, 2), ParameterError);
}

TEST(Smooth, BandIsResidualSpreadInWindow) {
  auto s = Smooth(Series({{0, 0.0}, {2, 1.0}, {3, -1.0}, {5, 0.5}, {6, 0.2}}), 5, 2);
  ASSERT_EQ(s.grid.values.size(), 7u);
  ASSERT_EQ(s.smoothed.size(), 7u);
  // Output 3 uses samples 1..5.
  double r[5], mean = 0, var = 0;
  for (int j = 0; j < 5; ++j) mean += (r[j] = s.grid.values[1 + j] - s.smoothed[1 + j]) / 5;
  for (double x : r) var += (x - mean) * (x - mean) / 5;
  EXPECT_NEAR(s.band[3], std::sqrt(var), 1e-12);
  for (double b : s.band) EXPECT_GE(b, 0.0);
}

// ---------------------------------------------------------------------------
// PDF

TEST(Pdf, PointMassAndUniform) {
  std::vector<double> mass(7, 0.05);
  auto p = PdfHistogram(mass);
  EXPECT_DOUBLE_EQ(p.densities[10], 10.0);
  for (std::size_t b = 0; b < kPdfBins; ++b)
    if (b != 10) {
      EXPECT_EQ(p.densities[b], 0.0);
    }

  std::vector<double> centers;
  for (int b = 0; b < 20; ++b) centers.push_back(-0.95 + 0.1 * b);
  auto u = PdfHistogram(centers);
  for (double d : u.densities) EXPECT_NEAR(d, 0.5, 1e-12);
  EXPECT_EQ(u.bin_edges.front(), -1.0);
  EXPECT_EQ(u.bin_edges.back(), 1.0);
}

TEST(Pdf, EdgesAndNormalization) {
  std::vector<double> edge = {-1.0, 1.0, 0.0};
  auto p = PdfHistogram(edge);
  EXPECT_GT(p.densities[0], 0.0);
  EXPECT_GT(p.densities[19], 0.0);  // 1.0 lands in the last bin
  EXPECT_GT(p.densities[10], 0.0);  // 0.0 opens bin 10
  util::Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(1 + rng.Below(200));
    for (double &x : s) x = rng.Uniform(-1, 1);
    auto q = PdfHistogram(s);
    double total = 0;
    for (double d : q.densities) total += d * kPdfBinWidth;
    EXPECT_NEAR(total, 1.0, 1e-9);
  }
  EXPECT_THROW(PdfHistogram(std::vector<double>{}), ParameterError);
  EXPECT_THROW(PdfHistogram(std::vector<double>{1.5}), ParameterError);
}

// ---------------------------------------------------------------------------
// Exports

TEST(Csv, ColumnsAndQuoting) {
  Builder b = InfluenceFixture();
  std::ostringstream out;
  WriteEntityCsv(out, AggregateEntities(b.store(), b.ann()));
  std::string csv = out.str();
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "entity_key,linked,article_count,comment_count,density,mean_sentiment,article_mean_sentiment,"
            "site_count");
  EXPECT_EQ(internal::CsvField("a,\"b\""), "\"a,\"\"b\"\"\"");

  std::ostringstream corr;
  WriteCorrelationCsv(corr, CorrelationOf(UserInfluence(b.store(), nullptr, 3).users));
  EXPECT_NE(corr.str().find("h-index-likes"), std::string::npos);
}

}  // namespace
}  // namespace analytics
}  // namespace chorus
