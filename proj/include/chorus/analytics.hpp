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

// Aggregation of annotated comments: per-entity volume and sentiment, user
// influence measures, correlation between measures, daily sentiment series
// with interpolation and Savitzky-Golay smoothing, and sentiment histograms.
// Everything here is a pure function of an immutable store snapshot.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chorus/common.hpp"
#include "chorus/corpus.hpp"
#include "chorus/timeutil.hpp"

namespace chorus {
namespace analytics {

// Prefix of pseudo-identifiers for mentions that were not linked.
inline constexpr std::string_view kSurfacePrefix = "surface:";

inline bool IsLinkedKey(std::string_view key) { return key.rfind(kSurfacePrefix, 0) != 0; }

// Annotation layer consumed by the aggregations.
struct Annotations {
  // article_id -> sorted, unique entity keys (KB ids or "surface:..." keys).
  std::map<std::string, std::vector<std::string>> article_entities;
  // comment_id -> sentiment score in [-1, 1].
  std::unordered_map<std::string, double> comment_scores;

  std::optional<double> ScoreOf(const Comment &c) const {
    auto it = comment_scores.find(c.comment_id);
    if (it == comment_scores.end()) return std::nullopt;
    return it->second;
  }

  std::span<const std::string> EntitiesOf(const std::string &article_id) const {
    auto it = article_entities.find(article_id);
    if (it == article_entities.end()) return {};
    return it->second;
  }

  bool KnowsEntity(std::string_view key) const {
    for (const auto &[a, keys] : article_entities)
      if (std::binary_search(keys.begin(), keys.end(), key)) return true;
    return false;
  }
};

// ---------------------------------------------------------------------------
// Entity aggregates

struct SiteSlice {
  std::size_t article_count = 0;
  std::size_t comment_count = 0;
  double mean_sentiment = 0.0;
};

struct EntityAggregate {
  std::string entity_key;
  bool linked = true;
  std::size_t comment_count = 0;
  std::size_t article_count = 0;
  double density = 0.0;
  // Mean over comment scores (like-weighted when requested).
  double mean_sentiment = 0.0;
  // Mean over per-article means.
  double article_mean_sentiment = 0.0;
  std::map<std::string, SiteSlice> per_site;
};

struct AggregateOptions {
  // Weight each comment by 1 + likes instead of uniformly.
  bool weight_by_likes = false;
};

namespace internal {

struct MeanAccumulator {
  double sum = 0.0;
  double weight = 0.0;
  void Add(double v, double w = 1.0) {
    sum += v * w;
    weight += w;
  }
  double Mean() const { return weight > 0 ? sum / weight : 0.0; }
};

}  // namespace internal

// One aggregate per entity key mentioned by at least one article published in
// `range`. Every comment counts toward every entity of its parent article.
// Ordered by entity key.
inline std::vector<EntityAggregate> AggregateEntities(const CorpusStore &store,
                                                      const Annotations &ann,
                                                      const DateRange &range = {},
                                                      const AggregateOptions &options = {}) {
  struct Work {
    EntityAggregate agg;
    internal::MeanAccumulator comments, articles;
    std::map<std::string, internal::MeanAccumulator> site_means;
  };
  std::map<std::string, Work> work;
  for (std::size_t a = 0; a < store.articles().size(); ++a) {
    const Article &art = store.articles()[a];
    if (!range.Contains(timeutil::DayOf(art.published_at))) continue;
    auto keys = ann.EntitiesOf(art.article_id);
    if (keys.empty()) continue;

    internal::MeanAccumulator article_mean;
    std::vector<std::pair<double, double>> scored;  // (score, weight)
    for (std::size_t c : store.CommentsOf(a)) {
      const Comment &cm = store.comments()[c];
      if (auto s = ann.ScoreOf(cm)) {
        double w = options.weight_by_likes ? 1.0 + static_cast<double>(cm.likes) : 1.0;
        scored.emplace_back(*s, w);
        article_mean.Add(*s);
      }
    }
    const std::size_t ncomments = store.CommentsOf(a).size();
    for (const std::string &key : keys) {
      Work &w = work[key];
      w.agg.entity_key = key;
      w.agg.linked = IsLinkedKey(key);
      ++w.agg.article_count;
      w.agg.comment_count += ncomments;
      SiteSlice &slice = w.agg.per_site[art.site_id];
      ++slice.article_count;
      slice.comment_count += ncomments;
      for (auto [s, wt] : scored) {
        w.comments.Add(s, wt);
        w.site_means[art.site_id].Add(s, wt);
      }
      if (article_mean.weight > 0) w.articles.Add(article_mean.Mean());
    }
  }
  std::vector<EntityAggregate> out;
  out.reserve(work.size());
  for (auto &[key, w] : work) {
    w.agg.density = Density(w.agg.comment_count, w.agg.article_count);
    w.agg.mean_sentiment = w.comments.Mean();
    w.agg.article_mean_sentiment = w.articles.Mean();
    for (auto &[site, slice] : w.agg.per_site) slice.mean_sentiment = w.site_means[site].Mean();
    out.push_back(std::move(w.agg));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Influence

// Largest h such that at least h values are >= h.
inline std::size_t HIndex(std::vector<std::uint64_t> values) {
  std::sort(values.begin(), values.end(), std::greater<>());
  std::size_t h = 0;
  while (h < values.size() && values[h] >= h + 1) ++h;
  return h;
}

enum class Metric {
  kCommentsCount,
  kRepliesCount,
  kLikesCount,
  kDislikesCount,
  kHIndexLikes,
  kHIndexDislikes,
  kHIndexReplies,
};

inline constexpr std::array<Metric, 7> kMetrics = {
    Metric::kCommentsCount, Metric::kRepliesCount,   Metric::kLikesCount,
    Metric::kDislikesCount, Metric::kHIndexLikes,    Metric::kHIndexDislikes,
    Metric::kHIndexReplies,
};

inline std::string_view MetricName(Metric m) {
  static constexpr std::array<std::string_view, 7> kNames = {
      "comments_count", "replies_count",    "likes_count",    "dislikes_count",
      "h-index-likes",  "h-index-dislikes", "h-index-replies"};
  return kNames[static_cast<std::size_t>(m)];
}

inline Metric ParseMetric(std::string_view s) {
  for (Metric m : kMetrics)
    if (MetricName(m) == s) return m;
  std::string valid;
  for (Metric m : kMetrics) valid += (valid.empty() ? "" : ", ") + std::string(MetricName(m));
  throw ParameterError("unknown metric '" + std::string(s) + "'; valid metrics: " + valid);
}

struct UserAggregate {
  std::string user_id;
  std::size_t comments_count = 0;
  std::size_t replies_count = 0;    // replies received by the user's comments
  std::size_t replies_written = 0;  // the user's own comments that are replies
  std::uint64_t likes_count = 0;
  std::uint64_t dislikes_count = 0;
  std::size_t h_index_likes = 0;
  std::size_t h_index_dislikes = 0;
  std::size_t h_index_replies = 0;
  // Entity keys of the articles the user commented on, by comment count.
  std::vector<std::pair<std::string, std::size_t>> top_entities;

  double Measure(Metric m) const {
    switch (m) {
      case Metric::kCommentsCount: return static_cast<double>(comments_count);
      case Metric::kRepliesCount: return static_cast<double>(replies_count);
      case Metric::kLikesCount: return static_cast<double>(likes_count);
      case Metric::kDislikesCount: return static_cast<double>(dislikes_count);
      case Metric::kHIndexLikes: return static_cast<double>(h_index_likes);
      case Metric::kHIndexDislikes: return static_cast<double>(h_index_dislikes);
      case Metric::kHIndexReplies: return static_cast<double>(h_index_replies);
    }
    return 0.0;
  }
};

// Measures of one user from the store positions of their comments. An empty
// list yields all zeros.
inline UserAggregate InfluenceOf(const CorpusStore &store, std::string user_id,
                                 std::span<const std::size_t> comment_positions,
                                 const Annotations *ann = nullptr,
                                 std::size_t top_entities = 5) {
  UserAggregate u;
  u.user_id = std::move(user_id);
  std::vector<std::uint64_t> likes, dislikes, replies;
  std::map<std::string, std::size_t> entity_counts;
  for (std::size_t pos : comment_positions) {
    const Comment &c = store.comments()[pos];
    ++u.comments_count;
    if (c.parent_comment_id) ++u.replies_written;
    const std::size_t received = store.RepliesTo(pos).size();
    u.replies_count += received;
    u.likes_count += static_cast<std::uint64_t>(c.likes);
    u.dislikes_count += static_cast<std::uint64_t>(c.dislikes);
    likes.push_back(static_cast<std::uint64_t>(c.likes));
    dislikes.push_back(static_cast<std::uint64_t>(c.dislikes));
    replies.push_back(received);
    if (ann)
      for (const std::string &key : ann->EntitiesOf(c.article_id)) ++entity_counts[key];
  }
  u.h_index_likes = HIndex(std::move(likes));
  u.h_index_dislikes = HIndex(std::move(dislikes));
  u.h_index_replies = HIndex(std::move(replies));
  u.top_entities.assign(entity_counts.begin(), entity_counts.end());
  std::stable_sort(u.top_entities.begin(), u.top_entities.end(),
                   [](const auto &a, const auto &b) { return a.second > b.second; });
  if (u.top_entities.size() > top_entities) u.top_entities.resize(top_entities);
  return u;
}

// Top k users by a measure, descending, ties by user id.
inline std::vector<UserAggregate> RankUsers(std::vector<UserAggregate> users, Metric metric,
                                            std::size_t k) {
  std::sort(users.begin(), users.end(), [metric](const UserAggregate &a, const UserAggregate &b) {
    double x = a.Measure(metric), y = b.Measure(metric);
    if (x != y) return x > y;
    return a.user_id < b.user_id;
  });
  if (users.size() > k) users.resize(k);
  return users;
}

struct InfluenceReport {
  std::vector<UserAggregate> users;  // by user id
  std::map<Metric, std::vector<std::string>> rankings;  // top-k user ids per measure
};

// All seven measures for every commenter, plus a top-k ranking per measure.
inline InfluenceReport UserInfluence(const CorpusStore &store, const Annotations *ann,
                                     std::size_t top_k) {
  if (top_k == 0) throw ParameterError("top_k must be positive");
  std::map<std::string, std::vector<std::size_t>> by_user;
  for (std::size_t i = 0; i < store.comments().size(); ++i)
    by_user[store.comments()[i].user_id].push_back(i);
  InfluenceReport r;
  for (const auto &[user, positions] : by_user)
    r.users.push_back(InfluenceOf(store, user, positions, ann));
  for (Metric m : kMetrics)
    for (const UserAggregate &u : RankUsers(r.users, m, top_k)) r.rankings[m].push_back(u.user_id);
  return r;
}

// ---------------------------------------------------------------------------
// Correlation

// Sample Pearson coefficient, clamped to [-1, 1]. nullopt when either input
// has zero variance.
inline std::optional<double> Pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ParameterError("pearson: length mismatch");
  if (x.size() < 2) throw ParameterError("pearson: need at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct CorrelationMatrix {
  std::vector<std::string> measure_names;
  // nullopt entries are undefined (a degenerate measure is involved).
  std::vector<std::vector<std::optional<double>>> values;
  std::vector<bool> degenerate;
};

inline CorrelationMatrix CorrelationOf(std::span<const UserAggregate> users) {
  if (users.size() < 2) throw ParameterError("correlation needs at least two users");
  CorrelationMatrix cm;
  std::vector<std::vector<double>> cols;
  for (Metric m : kMetrics) {
    cm.measure_names.emplace_back(MetricName(m));
    std::vector<double> col;
    for (const UserAggregate &u : users) col.push_back(u.Measure(m));
    cols.push_back(std::move(col));
  }
  const std::size_t k = cols.size();
  cm.values.assign(k, std::vector<std::optional<double>>(k));
  cm.degenerate.assign(k, false);
  for (std::size_t i = 0; i < k; ++i) {
    cm.degenerate[i] = !Pearson(cols[i], cols[i]).has_value();
    for (std::size_t j = i; j < k; ++j) {
      auto r = i == j ? (cm.degenerate[i] ? std::nullopt : std::optional<double>(1.0))
                      : Pearson(cols[i], cols[j]);
      cm.values[i][j] = cm.values[j][i] = r;
    }
  }
  return cm;
}

// ---------------------------------------------------------------------------
// Time series

struct SeriesPoint {
  Day day = 0;
  double mean_sentiment = 0.0;
  std::size_t comment_count = 0;
  std::size_t article_count = 0;
  double std_dev = 0.0;  // population std of the day's article means
};

using TimeSeries = std::vector<SeriesPoint>;

// Daily sentiment of an entity: each article's score is the mean of its
// comment scores, each day's score the mean of its articles' scores. Articles
// without scored comments, and days without such articles, are left out.
inline TimeSeries DailySeries(const CorpusStore &store, const Annotations &ann,
                              const std::string &entity_key, const DateRange &range = {}) {
  if (!ann.KnowsEntity(entity_key)) throw NotFoundError("unknown entity: " + entity_key);
  TimeSeries out;
  for (const auto &[day, positions] : store.ArticlesByDay()) {
    if (!range.Contains(day)) continue;
    std::vector<double> means;
    std::size_t comments = 0;
    for (std::size_t a : positions) {
      const Article &art = store.articles()[a];
      auto keys = ann.EntitiesOf(art.article_id);
      if (!std::binary_search(keys.begin(), keys.end(), entity_key)) continue;
      internal::MeanAccumulator acc;
      std::size_t scored = 0;
      for (std::size_t c : store.CommentsOf(a)) {
        if (auto s = ann.ScoreOf(store.comments()[c])) {
          acc.Add(*s);
          ++scored;
        }
      }
      if (scored == 0) continue;
      means.push_back(acc.Mean());
      comments += scored;
    }
    if (means.empty()) continue;
    SeriesPoint p;
    p.day = day;
    p.article_count = means.size();
    p.comment_count = comments;
    double sum = 0;
    for (double m : means) sum += m;
    p.mean_sentiment = sum / static_cast<double>(means.size());
    double var = 0;
    for (double m : means) var += (m - p.mean_sentiment) * (m - p.mean_sentiment);
    p.std_dev = std::sqrt(var / static_cast<double>(means.size()));
    out.push_back(p);
  }
  return out;
}

// Values on a gap-free daily grid.
struct DailyGrid {
  Day first_day = 0;
  std::vector<double> values;
  std::vector<bool> observed;
};

// Fills every missing day between the first and last observation by linear
// interpolation between its nearest observed neighbours.
inline DailyGrid InterpolateLinear(const TimeSeries &series) {
  if (series.size() < 2) throw ParameterError("interpolation needs at least two points");
  for (std::size_t i = 1; i < series.size(); ++i)
    if (series[i].day <= series[i - 1].day) throw ParameterError("series days must increase");
  DailyGrid g;
  g.first_day = series.front().day;
  const std::size_t n = static_cast<std::size_t>(series.back().day - series.front().day) + 1;
  g.values.assign(n, 0.0);
  g.observed.assign(n, false);
  for (std::size_t i = 0; i + 1 < series.size(); ++i) {
    const SeriesPoint &a = series[i], &b = series[i + 1];
    const double span = static_cast<double>(b.day - a.day);
    for (Day d = a.day; d < b.day; ++d) {
      const double t = static_cast<double>(d - a.day) / span;
      g.values[d - g.first_day] = d == a.day ? a.mean_sentiment
                                             : a.mean_sentiment + t * (b.mean_sentiment - a.mean_sentiment);
    }
    g.observed[a.day - g.first_day] = true;
  }
  g.values[n - 1] = series.back().mean_sentiment;
  g.observed[n - 1] = true;
  return g;
}

// Least-squares weights that, applied to `window` consecutive samples,
// evaluate the best-fitting polynomial of degree `order` at sample
// `position` (0-based within the window).
inline std::vector<double> SavitzkyGolayWeights(std::size_t window, std::size_t order,
                                                std::size_t position) {
  if (window < 3 || window % 2 == 0) throw ParameterError("window must be odd and >= 3");
  if (order >= window) throw ParameterError("order must be smaller than the window");
  if (position >= window) throw ParameterError("position outside window");
  const std::size_t half = window / 2;
  const std::size_t k = order + 1;
  // Abscissae scaled to [-1, 1] keep the normal equations well conditioned.
  const auto x = [&](std::size_t j) {
    return (static_cast<double>(j) - static_cast<double>(half)) / static_cast<double>(half);
  };
  std::vector<std::vector<double>> A(window, std::vector<double>(k));
  for (std::size_t j = 0; j < window; ++j) {
    double p = 1.0;
    for (std::size_t c = 0; c < k; ++c, p *= x(j)) A[j][c] = p;
  }
  // Solve (A^T A) y = phi(x_position) with partial pivoting.
  std::vector<std::vector<double>> G(k, std::vector<double>(k + 1, 0.0));
  for (std::size_t r = 0; r < k; ++r)
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t j = 0; j < window; ++j) G[r][c] += A[j][r] * A[j][c];
  double p = 1.0;
  for (std::size_t r = 0; r < k; ++r, p *= x(position)) G[r][k] = p;
  for (std::size_t col = 0; col < k; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < k; ++r)
      if (std::abs(G[r][col]) > std::abs(G[piv][col])) piv = r;
    std::swap(G[col], G[piv]);
    for (std::size_t r = 0; r < k; ++r) {
      if (r == col) continue;
      const double f = G[r][col] / G[col][col];
      for (std::size_t c = col; c <= k; ++c) G[r][c] -= f * G[col][c];
    }
  }
  std::vector<double> y(k);
  for (std::size_t r = 0; r < k; ++r) y[r] = G[r][k] / G[r][r];
  std::vector<double> w(window, 0.0);
  for (std::size_t j = 0; j < window; ++j)
    for (std::size_t c = 0; c < k; ++c) w[j] += A[j][c] * y[c];
  return w;
}

namespace internal {

// First sample of the window used for output i.
inline std::size_t WindowStart(std::size_t i, std::size_t n, std::size_t window) {
  const std::size_t half = window / 2;
  if (i < half) return 0;
  if (i + half >= n) return n - window;
  return i - half;
}

}  // namespace internal

// Smooths by fitting a degree-`order` polynomial to each centred window. The
// first and last window/2 outputs come from the first and last full window,
// evaluated off-centre. Output length equals input length.
inline std::vector<double> SavitzkyGolay(std::span<const double> values, std::size_t window,
                                         std::size_t order) {
  if (window < 3 || window % 2 == 0) throw ParameterError("window must be odd and >= 3");
  if (order >= window) throw ParameterError("order must be smaller than the window");
  if (values.size() < window) throw ParameterError("series shorter than the window");
  const std::size_t n = values.size();
  std::vector<std::vector<double>> weights(window);
  for (std::size_t p = 0; p < window; ++p) weights[p] = SavitzkyGolayWeights(window, order, p);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t start = internal::WindowStart(i, n, window);
    const auto &w = weights[i - start];
    double s = 0.0;
    for (std::size_t j = 0; j < window; ++j) s += w[j] * values[start + j];
    out[i] = s;
  }
  return out;
}

struct SmoothedSeries {
  DailyGrid grid;
  std::vector<double> smoothed;
  // Population standard deviation of (value - smoothed) over each output's
  // window.
  std::vector<double> band;
  std::size_t window = 0;
  std::size_t order = 0;
};

inline SmoothedSeries Smooth(const TimeSeries &series, std::size_t window, std::size_t order) {
  SmoothedSeries s;
  s.grid = InterpolateLinear(series);
  s.window = window;
  s.order = order;
  s.smoothed = SavitzkyGolay(s.grid.values, window, order);
  const std::size_t n = s.smoothed.size();
  s.band.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t start = internal::WindowStart(i, n, window);
    double mean = 0.0;
    for (std::size_t j = start; j < start + window; ++j) mean += s.grid.values[j] - s.smoothed[j];
    mean /= static_cast<double>(window);
    double var = 0.0;
    for (std::size_t j = start; j < start + window; ++j) {
      const double r = s.grid.values[j] - s.smoothed[j] - mean;
      var += r * r;
    }
    s.band[i] = std::sqrt(var / static_cast<double>(window));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Sentiment PDF

inline constexpr std::size_t kPdfBins = 20;
inline constexpr double kPdfBinWidth = 0.1;

struct SentimentPdf {
  std::array<double, kPdfBins + 1> bin_edges{};
  std::array<double, kPdfBins> densities{};
  std::size_t count = 0;
};

// Fixed-width histogram over [-1, 1]; bins are [lo, hi) except the last,
// which includes 1. density = count / (n * 0.1).
inline SentimentPdf PdfHistogram(std::span<const double> scores) {
  if (scores.empty()) throw ParameterError("pdf of an empty sample");
  SentimentPdf pdf;
  for (std::size_t i = 0; i <= kPdfBins; ++i)
    pdf.bin_edges[i] = (static_cast<double>(i) - 10.0) / 10.0;
  std::array<std::size_t, kPdfBins> counts{};
  for (double s : scores) {
    if (!(s >= -1.0 && s <= 1.0)) throw ParameterError("score outside [-1, 1]");
    auto it = std::upper_bound(pdf.bin_edges.begin(), pdf.bin_edges.end(), s);
    std::size_t bin = static_cast<std::size_t>(it - pdf.bin_edges.begin()) - 1;
    ++counts[std::min(bin, kPdfBins - 1)];
  }
  pdf.count = scores.size();
  for (std::size_t b = 0; b < kPdfBins; ++b)
    pdf.densities[b] = static_cast<double>(counts[b]) / (static_cast<double>(scores.size()) * kPdfBinWidth);
  return pdf;
}

// Scores of every comment on articles mentioning the entity.
inline std::vector<double> EntityScores(const CorpusStore &store, const Annotations &ann,
                                        const std::string &entity_key, const DateRange &range = {}) {
  if (!ann.KnowsEntity(entity_key)) throw NotFoundError("unknown entity: " + entity_key);
  std::vector<double> out;
  for (std::size_t a = 0; a < store.articles().size(); ++a) {
    const Article &art = store.articles()[a];
    if (!range.Contains(timeutil::DayOf(art.published_at))) continue;
    auto keys = ann.EntitiesOf(art.article_id);
    if (!std::binary_search(keys.begin(), keys.end(), entity_key)) continue;
    for (std::size_t c : store.CommentsOf(a))
      if (auto s = ann.ScoreOf(store.comments()[c])) out.push_back(*s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exports

namespace internal {

inline std::string CsvField(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace internal

// Columns: entity_key,linked,article_count,comment_count,density,
// mean_sentiment,article_mean_sentiment,site_count
inline void WriteEntityCsv(std::ostream &out, std::span<const EntityAggregate> rows) {
  out << "entity_key,linked,article_count,comment_count,density,mean_sentiment,"
         "article_mean_sentiment,site_count\n";
  for (const EntityAggregate &e : rows)
    out << internal::CsvField(e.entity_key) << ',' << (e.linked ? 1 : 0) << ',' << e.article_count
        << ',' << e.comment_count << ',' << util::FormatDouble(e.density) << ','
        << util::FormatDouble(e.mean_sentiment) << ',' << util::FormatDouble(e.article_mean_sentiment)
        << ',' << e.per_site.size() << '\n';
}

// Columns: entity_key,site_id,article_count,comment_count,mean_sentiment
inline void WriteEntitySiteCsv(std::ostream &out, std::span<const EntityAggregate> rows) {
  out << "entity_key,site_id,article_count,comment_count,mean_sentiment\n";
  for (const EntityAggregate &e : rows)
    for (const auto &[site, s] : e.per_site)
      out << internal::CsvField(e.entity_key) << ',' << internal::CsvField(site) << ','
          << s.article_count << ',' << s.comment_count << ',' << util::FormatDouble(s.mean_sentiment)
          << '\n';
}

// Columns: user_id,comments_count,replies_count,replies_written,likes_count,
// dislikes_count,h_index_likes,h_index_dislikes,h_index_replies,top_entities
// (top_entities is a ';'-joined list).
inline void WriteUserCsv(std::ostream &out, std::span<const UserAggregate> rows) {
  out << "user_id,comments_count,replies_count,replies_written,likes_count,dislikes_count,"
         "h_index_likes,h_index_dislikes,h_index_replies,top_entities\n";
  for (const UserAggregate &u : rows) {
    std::string top;
    for (const auto &[k, n] : u.top_entities) top += (top.empty() ? "" : ";") + k;
    out << internal::CsvField(u.user_id) << ',' << u.comments_count << ',' << u.replies_count << ','
        << u.replies_written << ',' << u.likes_count << ',' << u.dislikes_count << ','
        << u.h_index_likes << ',' << u.h_index_dislikes << ',' << u.h_index_replies << ','
        << internal::CsvField(top) << '\n';
  }
}

// Columns: measure, then one column per measure; undefined cells are empty.
inline void WriteCorrelationCsv(std::ostream &out, const CorrelationMatrix &cm) {
  out << "measure";
  for (const auto &n : cm.measure_names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < cm.values.size(); ++i) {
    out << cm.measure_names[i];
    for (const auto &v : cm.values[i]) out << ',' << (v ? util::FormatDouble(*v) : "");
    out << '\n';
  }
}

// Columns: day,mean_sentiment,comment_count,article_count,std_dev
inline void WriteSeriesCsv(std::ostream &out, const TimeSeries &series) {
  out << "day,mean_sentiment,comment_count,article_count,std_dev\n";
  for (const SeriesPoint &p : series)
    out << timeutil::FormatDay(p.day) << ',' << util::FormatDouble(p.mean_sentiment) << ','
        << p.comment_count << ',' << p.article_count << ',' << util::FormatDouble(p.std_dev) << '\n';
}

}  // namespace analytics
}  // namespace chorus
