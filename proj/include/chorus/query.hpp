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

// Read-only queries over an annotated store. Every function is a pure
// function of (snapshot, arguments) and returns the JSON body served by the
// /v1 API.

#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "chorus/analytics.hpp"
#include "chorus/corpus.hpp"
#include "chorus/nel.hpp"
#include "chorus/pipeline.hpp"
#include "chorus/timeutil.hpp"

namespace chorus {
namespace query {

using OrderedJson = nlohmann::ordered_json;

struct Snapshot {
  CorpusStore store;
  pipeline::AnnotationSet annotations;
  analytics::Annotations view;
  std::shared_ptr<const nel::KnowledgeBase> kb;  // may be null
  pipeline::SmoothingDefaults smoothing;

  static std::shared_ptr<const Snapshot> Make(CorpusStore store, pipeline::AnnotationSet ann,
                                              std::shared_ptr<const nel::KnowledgeBase> kb,
                                              pipeline::SmoothingDefaults smoothing = {}) {
    auto s = std::make_shared<Snapshot>();
    s->store = std::move(store);
    s->annotations = std::move(ann);
    s->view = s->annotations.View();
    s->kb = std::move(kb);
    s->smoothing = smoothing;
    return s;
  }
};

namespace internal {

inline OrderedJson DayOrNull(const std::optional<Day> &d) {
  return d ? OrderedJson(timeutil::FormatDay(*d)) : OrderedJson(nullptr);
}

inline void RequireEntity(const Snapshot &s, const std::string &key) {
  if (!s.view.KnowsEntity(key)) throw NotFoundError("unknown entity: " + key);
}

inline OrderedJson EntityHeader(const Snapshot &s, const std::string &key) {
  OrderedJson j;
  j["entity"] = key;
  j["linked"] = analytics::IsLinkedKey(key);
  const nel::EntityRecord *rec = s.kb ? s.kb->Find(key) : nullptr;
  j["title"] = rec ? OrderedJson(rec->title) : OrderedJson(nullptr);
  return j;
}

}  // namespace internal

// One bubble per site with at least one article mentioning the entity in the
// range, by comment count descending, then site id.
inline OrderedJson Bubbles(const Snapshot &s, const std::string &key, const DateRange &range) {
  internal::RequireEntity(s, key);
  OrderedJson j = internal::EntityHeader(s, key);
  j["from"] = internal::DayOrNull(range.from);
  j["to"] = internal::DayOrNull(range.to);
  std::vector<std::pair<std::string, analytics::SiteSlice>> sites;
  for (const auto &agg : analytics::AggregateEntities(s.store, s.view, range)) {
    if (agg.entity_key != key) continue;
    sites.assign(agg.per_site.begin(), agg.per_site.end());
  }
  std::stable_sort(sites.begin(), sites.end(), [](const auto &a, const auto &b) {
    return a.second.comment_count > b.second.comment_count;
  });
  OrderedJson bubbles = OrderedJson::array();
  for (const auto &[site_id, slice] : sites) {
    OrderedJson b;
    b["site_id"] = site_id;
    const Site *site = s.store.FindSite(site_id);
    b["domain_name"] = site ? site->domain_name : "";
    b["article_count"] = slice.article_count;
    b["comment_count"] = slice.comment_count;
    b["mean_sentiment"] = slice.mean_sentiment;
    bubbles.push_back(std::move(b));
  }
  j["bubbles"] = std::move(bubbles);
  return j;
}

struct TimelineParams {
  DateRange range;
  std::size_t window = 7;
  std::size_t order = 2;
};

// Raw daily series, plus the interpolated and smoothed grid with its band when
// there are enough points.
inline OrderedJson Timeline(const Snapshot &s, const std::string &key, const TimelineParams &p) {
  if (p.window < 3 || p.window % 2 == 0) throw ParameterError("window must be odd and >= 3");
  if (p.order >= p.window) throw ParameterError("order must be smaller than window");
  internal::RequireEntity(s, key);
  OrderedJson j = internal::EntityHeader(s, key);
  OrderedJson params;
  params["from"] = internal::DayOrNull(p.range.from);
  params["to"] = internal::DayOrNull(p.range.to);
  params["window"] = p.window;
  params["order"] = p.order;
  j["params"] = std::move(params);

  analytics::TimeSeries series = analytics::DailySeries(s.store, s.view, key, p.range);
  OrderedJson raw = OrderedJson::array();
  for (const auto &pt : series) {
    OrderedJson r;
    r["day"] = timeutil::FormatDay(pt.day);
    r["mean_sentiment"] = pt.mean_sentiment;
    r["comment_count"] = pt.comment_count;
    r["article_count"] = pt.article_count;
    r["std_dev"] = pt.std_dev;
    raw.push_back(std::move(r));
  }
  j["raw"] = std::move(raw);

  if (series.size() < 2) {
    j["smoothed"] = nullptr;
    j["notice"] = "fewer than 2 observed days; smoothing omitted";
    return j;
  }
  analytics::DailyGrid grid = analytics::InterpolateLinear(series);
  if (grid.values.size() < p.window) {
    j["smoothed"] = nullptr;
    j["notice"] = "daily grid of " + std::to_string(grid.values.size()) +
                  " days is shorter than the window; smoothing omitted";
    return j;
  }
  analytics::SmoothedSeries sm = analytics::Smooth(series, p.window, p.order);
  OrderedJson pts = OrderedJson::array();
  for (std::size_t i = 0; i < sm.smoothed.size(); ++i) {
    OrderedJson q;
    q["day"] = timeutil::FormatDay(sm.grid.first_day + static_cast<Day>(i));
    q["value"] = sm.grid.values[i];
    q["observed"] = static_cast<bool>(sm.grid.observed[i]);
    q["smoothed"] = sm.smoothed[i];
    q["band"] = sm.band[i];
    pts.push_back(std::move(q));
  }
  j["smoothed"] = std::move(pts);
  return j;
}

inline OrderedJson Pdf(const Snapshot &s, const std::string &key, const DateRange &range) {
  internal::RequireEntity(s, key);
  OrderedJson j = internal::EntityHeader(s, key);
  std::vector<double> scores = analytics::EntityScores(s.store, s.view, key, range);
  j["count"] = scores.size();
  OrderedJson edges = OrderedJson::array();
  for (std::size_t i = 0; i <= analytics::kPdfBins; ++i)
    edges.push_back((static_cast<double>(i) - 10.0) / 10.0);
  j["bin_edges"] = std::move(edges);
  if (scores.empty()) {
    j["densities"] = std::vector<double>(analytics::kPdfBins, 0.0);
    j["notice"] = "no scored comments";
    return j;
  }
  analytics::SentimentPdf pdf = analytics::PdfHistogram(scores);
  j["densities"] = pdf.densities;
  return j;
}

inline OrderedJson UserJson(const analytics::UserAggregate &u) {
  OrderedJson j;
  j["user_id"] = u.user_id;
  j["comments_count"] = u.comments_count;
  j["replies_count"] = u.replies_count;
  j["replies_written"] = u.replies_written;
  j["likes_count"] = u.likes_count;
  j["dislikes_count"] = u.dislikes_count;
  j["h-index-likes"] = u.h_index_likes;
  j["h-index-dislikes"] = u.h_index_dislikes;
  j["h-index-replies"] = u.h_index_replies;
  OrderedJson top = OrderedJson::array();
  for (const auto &[key, n] : u.top_entities) top.push_back({{"entity", key}, {"comments", n}});
  j["top_entities"] = std::move(top);
  return j;
}

inline OrderedJson Influencers(const Snapshot &s, std::string_view metric_name, std::size_t k) {
  analytics::Metric metric = analytics::ParseMetric(metric_name);
  if (k == 0) throw ParameterError("k must be positive");
  analytics::InfluenceReport r = analytics::UserInfluence(s.store, &s.view, 1);
  OrderedJson j;
  j["metric"] = analytics::MetricName(metric);
  j["k"] = k;
  OrderedJson users = OrderedJson::array();
  std::size_t rank = 0;
  for (const auto &u : analytics::RankUsers(std::move(r.users), metric, k)) {
    OrderedJson ju;
    ju["rank"] = ++rank;
    ju["value"] = u.Measure(metric);
    ju.update(UserJson(u));
    users.push_back(std::move(ju));
  }
  j["users"] = std::move(users);
  return j;
}

inline OrderedJson Stats(const Snapshot &s, Bucket bucket) {
  OrderedJson j;
  j["bucket"] = bucket == Bucket::kDay ? "day" : "month";
  j["sites"] = s.store.sites().size();
  j["articles"] = s.store.articles().size();
  j["comments"] = s.store.comments().size();
  j["annotated_articles"] = s.annotations.articles.size();
  j["scored_comments"] = s.annotations.comments.size();
  OrderedJson buckets = OrderedJson::array();
  for (const StatsBucket &b : CorpusStats(s.store, bucket)) {
    OrderedJson jb;
    jb["start"] = timeutil::FormatDay(b.start);
    jb["article_count"] = b.article_count;
    jb["comment_count"] = b.comment_count;
    buckets.push_back(std::move(jb));
  }
  j["buckets"] = std::move(buckets);
  return j;
}

// Case-insensitive prefix match of `q` against KB titles and anchor texts.
// Results are ordered by entity id; each lists the strings that matched and
// whether the entity occurs in the annotated corpus.
inline OrderedJson Search(const Snapshot &s, std::string_view q, std::size_t limit = 20) {
  const std::string needle = util::NormalizePhrase(q);
  if (needle.empty()) throw ParameterError("empty search query");
  std::map<std::string, std::set<std::string>> hits;
  const auto matches = [&](std::string_view text) {
    std::string norm = util::NormalizePhrase(text);
    return norm.compare(0, needle.size(), needle) == 0;
  };
  if (s.kb) {
    for (const auto &[id, rec] : s.kb->entities())
      if (matches(rec.title)) hits[id].insert(rec.title);
    for (const auto &[anchor, targets] : s.kb->anchors())
      if (matches(anchor))
        for (const auto &[id, n] : targets) hits[id].insert(anchor);
  }
  OrderedJson j;
  j["query"] = std::string(q);
  OrderedJson results = OrderedJson::array();
  for (const auto &[id, matched] : hits) {
    if (results.size() == limit) break;
    OrderedJson r;
    r["entity"] = id;
    const nel::EntityRecord *rec = s.kb->Find(id);
    r["title"] = rec ? OrderedJson(rec->title) : OrderedJson(nullptr);
    r["matched"] = matched;
    r["in_corpus"] = s.view.KnowsEntity(id);
    results.push_back(std::move(r));
  }
  j["results"] = std::move(results);
  return j;
}

}  // namespace query
}  // namespace chorus
