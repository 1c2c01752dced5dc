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

// Articles, comments and the sites that publish them. Records arrive as
// NDJSON, are validated one line at a time, and are kept in an in-memory
// store with secondary indexes. A store directory holds one append-only
// segment file per record kind; loading a directory replays the segments.

#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "chorus/common.hpp"
#include "chorus/timeutil.hpp"
#include "json.hpp"

namespace chorus {

enum class SiteCategory {
  kNewsMedia,
  kGovernmentPolitics,
  kArtsEntertainment,
  kOther
};

inline std::string_view CategoryName(SiteCategory c) {
  switch (c) {
    case SiteCategory::kNewsMedia: return "news_media";
    case SiteCategory::kGovernmentPolitics: return "government_politics";
    case SiteCategory::kArtsEntertainment: return "arts_entertainment";
    case SiteCategory::kOther: return "other";
  }
  return "other";
}

inline std::optional<SiteCategory> ParseCategory(std::string_view s) {
  if (s == "news_media") return SiteCategory::kNewsMedia;
  if (s == "government_politics") return SiteCategory::kGovernmentPolitics;
  if (s == "arts_entertainment") return SiteCategory::kArtsEntertainment;
  if (s == "other") return SiteCategory::kOther;
  return std::nullopt;
}

struct Site {
  std::string site_id;
  std::string domain_name;  // always lowercase
  SiteCategory category = SiteCategory::kOther;

  bool operator==(const Site &) const = default;
};

struct Article {
  std::string article_id;
  std::string site_id;
  std::string url;
  std::string title;
  std::string body;
  Timestamp published_at = 0;

  bool operator==(const Article &) const = default;
};

struct Comment {
  std::string comment_id;
  std::string article_id;
  std::string user_id;
  std::optional<std::string> user_name;
  std::string body;
  Timestamp created_at = 0;
  std::int64_t likes = 0;
  std::int64_t dislikes = 0;
  std::optional<std::string> parent_comment_id;

  bool operator==(const Comment &) const = default;
};

enum class RecordKind { kSite, kArticle, kComment };

inline std::optional<RecordKind> ParseRecordKind(std::string_view s) {
  if (s == "site" || s == "sites") return RecordKind::kSite;
  if (s == "article" || s == "articles") return RecordKind::kArticle;
  if (s == "comment" || s == "comments") return RecordKind::kComment;
  return std::nullopt;
}

using Record = std::variant<Site, Article, Comment>;

namespace internal {

using Json = nlohmann::json;

inline const Json &RequireField(const Json &obj, const char *field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) throw SchemaError(field);
  return *it;
}

inline std::string RequireString(const Json &obj, const char *field) {
  const Json &v = RequireField(obj, field);
  if (!v.is_string()) throw SchemaError(field);
  return v.get<std::string>();
}

inline std::string RequireId(const Json &obj, const char *field) {
  std::string id = RequireString(obj, field);
  if (id.empty()) throw ValidationError(std::string(field) + " is empty");
  return id;
}

inline std::optional<std::string> OptionalString(const Json &obj,
                                                 const char *field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw SchemaError(field);
  return it->get<std::string>();
}

inline Timestamp RequireTimestamp(const Json &obj, const char *field) {
  std::string text = RequireString(obj, field);
  auto t = timeutil::ParseTimestamp(text);
  if (!t) throw ValidationError(std::string(field) + " is not RFC 3339: " + text);
  return *t;
}

inline std::int64_t RequireCount(const Json &obj, const char *field) {
  const Json &v = RequireField(obj, field);
  if (v.is_number_unsigned()) {
    auto u = v.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(INT64_MAX))
      throw ValidationError(std::string(field) + " out of range");
    return static_cast<std::int64_t>(u);
  }
  if (v.is_number_integer() && v.get<std::int64_t>() < 0)
    throw ValidationError(std::string(field) + " must be non-negative");
  throw ValidationError(std::string(field) + " must be a non-negative integer");
}

}  // namespace internal

// Parses one NDJSON line into a validated record. Throws ParseError (with the
// byte offset reported by the JSON parser), SchemaError naming the missing
// field, or ValidationError.
inline Record ParseRecord(std::string_view line, RecordKind kind) {
  using internal::Json;
  Json obj;
  try {
    obj = Json::parse(line);
  } catch (const Json::parse_error &e) {
    throw ParseError(e.what(), e.byte);
  }
  if (!obj.is_object()) throw ParseError("record is not a JSON object", 0);

  switch (kind) {
    case RecordKind::kSite: {
      Site s;
      s.site_id = internal::RequireId(obj, "site_id");
      s.domain_name = util::ToLowerUtf8(internal::RequireString(obj, "domain_name"));
      std::string cat = internal::RequireString(obj, "category");
      auto parsed = ParseCategory(cat);
      if (!parsed) throw ValidationError("unknown category: " + cat);
      s.category = *parsed;
      return s;
    }
    case RecordKind::kArticle: {
      Article a;
      a.article_id = internal::RequireId(obj, "article_id");
      a.site_id = internal::RequireId(obj, "site_id");
      a.url = internal::RequireString(obj, "url");
      a.title = internal::RequireString(obj, "title");
      a.body = internal::RequireString(obj, "body");
      a.published_at = internal::RequireTimestamp(obj, "published_at");
      return a;
    }
    case RecordKind::kComment: {
      Comment c;
      c.comment_id = internal::RequireId(obj, "comment_id");
      c.article_id = internal::RequireId(obj, "article_id");
      c.user_id = internal::RequireId(obj, "user_id");
      c.user_name = internal::OptionalString(obj, "user_name");
      c.body = internal::RequireString(obj, "body");
      c.created_at = internal::RequireTimestamp(obj, "created_at");
      c.likes = internal::RequireCount(obj, "likes");
      c.dislikes = internal::RequireCount(obj, "dislikes");
      c.parent_comment_id = internal::OptionalString(obj, "parent_comment_id");
      if (c.parent_comment_id && c.parent_comment_id->empty())
        throw ValidationError("parent_comment_id is empty");
      return c;
    }
  }
  throw ParameterError("unknown record kind");
}

// Canonical NDJSON rendering: schema field order, optional fields omitted when
// absent, timestamps in UTC with a trailing Z.
inline std::string ToNdjson(const Site &s) {
  nlohmann::ordered_json j;
  j["site_id"] = s.site_id;
  j["domain_name"] = s.domain_name;
  j["category"] = CategoryName(s.category);
  return j.dump();
}

inline std::string ToNdjson(const Article &a) {
  nlohmann::ordered_json j;
  j["article_id"] = a.article_id;
  j["site_id"] = a.site_id;
  j["url"] = a.url;
  j["title"] = a.title;
  j["body"] = a.body;
  j["published_at"] = timeutil::FormatTimestamp(a.published_at);
  return j.dump();
}

inline std::string ToNdjson(const Comment &c) {
  nlohmann::ordered_json j;
  j["comment_id"] = c.comment_id;
  j["article_id"] = c.article_id;
  j["user_id"] = c.user_id;
  if (c.user_name) j["user_name"] = *c.user_name;
  j["body"] = c.body;
  j["created_at"] = timeutil::FormatTimestamp(c.created_at);
  j["likes"] = c.likes;
  j["dislikes"] = c.dislikes;
  if (c.parent_comment_id) j["parent_comment_id"] = *c.parent_comment_id;
  return j.dump();
}

// In-memory corpus. Records are immutable once stored and kept in insertion
// order; every secondary index holds positions into those vectors.
//
// Not internally synchronized: one writer at a time, or any number of
// concurrent readers of a store nobody is writing.
class CorpusStore {
 public:
  // Rejection reasons reported by the Add* methods.
  static constexpr std::string_view kDuplicate = "duplicate";
  static constexpr std::string_view kOrphanComment = "orphan_comment";
  static constexpr std::string_view kOrphanReply = "orphan_reply";
  static constexpr std::string_view kUnknownSite = "unknown_site";

  // Each Add* returns an empty optional on success, otherwise the rejection
  // reason; a rejected record leaves the store untouched.
  std::optional<std::string_view> AddSite(Site s) {
    if (site_index_.count(s.site_id)) return kDuplicate;
    site_index_.emplace(s.site_id, sites_.size());
    site_articles_[s.site_id];
    sites_.push_back(std::move(s));
    return std::nullopt;
  }

  std::optional<std::string_view> AddArticle(Article a) {
    if (article_index_.count(a.article_id)) return kDuplicate;
    if (!site_index_.count(a.site_id)) return kUnknownSite;
    std::size_t pos = articles_.size();
    article_index_.emplace(a.article_id, pos);
    site_articles_[a.site_id].push_back(pos);
    day_articles_[timeutil::DayOf(a.published_at)].push_back(pos);
    article_comments_.emplace_back();
    articles_.push_back(std::move(a));
    return std::nullopt;
  }

  std::optional<std::string_view> AddComment(Comment c) {
    if (comment_index_.count(c.comment_id)) return kDuplicate;
    auto art = article_index_.find(c.article_id);
    if (art == article_index_.end()) return kOrphanComment;
    std::optional<std::size_t> parent;
    if (c.parent_comment_id) {
      auto p = comment_index_.find(*c.parent_comment_id);
      if (p == comment_index_.end() ||
          comments_[p->second].article_id != c.article_id)
        return kOrphanReply;
      parent = p->second;
    }
    std::size_t pos = comments_.size();
    comment_index_.emplace(c.comment_id, pos);
    article_comments_[art->second].push_back(pos);
    replies_.emplace_back();
    if (parent) replies_[*parent].push_back(pos);
    comments_.push_back(std::move(c));
    return std::nullopt;
  }

  const std::vector<Site> &sites() const { return sites_; }
  const std::vector<Article> &articles() const { return articles_; }
  const std::vector<Comment> &comments() const { return comments_; }

  const Site *FindSite(std::string_view id) const {
    auto it = site_index_.find(std::string(id));
    return it == site_index_.end() ? nullptr : &sites_[it->second];
  }
  const Article *FindArticle(std::string_view id) const {
    auto it = article_index_.find(std::string(id));
    return it == article_index_.end() ? nullptr : &articles_[it->second];
  }
  const Comment *FindComment(std::string_view id) const {
    auto it = comment_index_.find(std::string(id));
    return it == comment_index_.end() ? nullptr : &comments_[it->second];
  }
  std::optional<std::size_t> ArticlePosition(std::string_view id) const {
    auto it = article_index_.find(std::string(id));
    if (it == article_index_.end()) return std::nullopt;
    return it->second;
  }

  // Positions (into comments()) of the comments on an article.
  std::span<const std::size_t> CommentsOf(std::size_t article_pos) const {
    return article_comments_.at(article_pos);
  }
  // Positions (into comments()) of the direct replies to a comment.
  std::span<const std::size_t> RepliesTo(std::size_t comment_pos) const {
    return replies_.at(comment_pos);
  }
  // Positions (into articles()) of a site's articles; empty for unknown sites.
  std::span<const std::size_t> ArticlesOfSite(std::string_view site_id) const {
    auto it = site_articles_.find(std::string(site_id));
    if (it == site_articles_.end()) return {};
    return it->second;
  }
  const std::map<Day, std::vector<std::size_t>> &ArticlesByDay() const {
    return day_articles_;
  }

  bool empty() const {
    return sites_.empty() && articles_.empty() && comments_.empty();
  }

 private:
  std::vector<Site> sites_;
  std::vector<Article> articles_;
  std::vector<Comment> comments_;
  std::unordered_map<std::string, std::size_t> site_index_;
  std::unordered_map<std::string, std::size_t> article_index_;
  std::unordered_map<std::string, std::size_t> comment_index_;
  std::vector<std::vector<std::size_t>> article_comments_;
  std::vector<std::vector<std::size_t>> replies_;
  std::unordered_map<std::string, std::vector<std::size_t>> site_articles_;
  std::map<Day, std::vector<std::size_t>> day_articles_;
};

struct IngestOptions {
  // Articles published outside these bounds are rejected as "out_of_range".
  DateRange published_bounds;
};

struct IngestReport {
  std::size_t records_read = 0;
  std::size_t records_stored = 0;
  std::size_t records_rejected = 0;
  std::map<std::string, std::size_t> rejection_reasons;
  // Set when the stream failed mid-way; counts cover what was read so far.
  std::optional<std::string> io_error;

  void Reject(std::string_view reason) {
    ++records_rejected;
    ++rejection_reasons[std::string(reason)];
  }

  nlohmann::ordered_json ToJson() const {
    nlohmann::ordered_json j;
    j["records_read"] = records_read;
    j["records_stored"] = records_stored;
    j["records_rejected"] = records_rejected;
    j["rejection_reasons"] = nlohmann::ordered_json::object();
    for (const auto &[reason, n] : rejection_reasons)
      j["rejection_reasons"][reason] = n;
    if (io_error) j["io_error"] = *io_error;
    return j;
  }
};

// Called with the canonical NDJSON line of every record that was stored.
using StoredRecordSink = std::function<void(const std::string &)>;

// Reads NDJSON records of one kind and stores every valid one. Blank lines are
// skipped and not counted. Invalid records are counted per reason:
// "malformed", "missing_field", "invalid_value", "duplicate",
// "orphan_comment", "orphan_reply", "unknown_site", "out_of_range".
inline IngestReport IngestStream(std::istream &in, RecordKind kind,
                                 CorpusStore &store,
                                 const IngestOptions &options = {},
                                 const StoredRecordSink &sink = {}) {
  IngestReport report;
  std::string line;
  while (std::getline(in, line)) {
    std::string_view view = util::StripCR(line);
    if (view.find_first_not_of(" \t") == std::string_view::npos) continue;
    ++report.records_read;
    Record record;
    try {
      record = ParseRecord(view, kind);
    } catch (const ParseError &) {
      report.Reject("malformed");
      continue;
    } catch (const SchemaError &) {
      report.Reject("missing_field");
      continue;
    } catch (const ValidationError &) {
      report.Reject("invalid_value");
      continue;
    }
    std::optional<std::string_view> rejected;
    std::string canonical;
    std::visit(
        [&](auto &r) {
          using T = std::decay_t<decltype(r)>;
          if (sink) canonical = ToNdjson(r);
          if constexpr (std::is_same_v<T, Site>) {
            rejected = store.AddSite(std::move(r));
          } else if constexpr (std::is_same_v<T, Article>) {
            if (!options.published_bounds.Contains(
                    timeutil::DayOf(r.published_at)))
              rejected = "out_of_range";
            else
              rejected = store.AddArticle(std::move(r));
          } else {
            rejected = store.AddComment(std::move(r));
          }
        },
        record);
    if (rejected) {
      report.Reject(*rejected);
    } else {
      ++report.records_stored;
      if (sink) sink(canonical);
    }
  }
  if (in.bad()) report.io_error = "stream read failure";
  return report;
}

enum class Bucket { kDay, kMonth };

struct StatsBucket {
  Day start = 0;
  std::size_t article_count = 0;
  std::size_t comment_count = 0;

  bool operator==(const StatsBucket &) const = default;
};

// Article and comment volume per UTC day or calendar month. Articles are
// bucketed by publication time, comments by creation time. Buckets are
// contiguous from the earliest to the latest record, empty ones included.
inline std::vector<StatsBucket> CorpusStats(const CorpusStore &store,
                                            Bucket bucket) {
  std::map<Day, StatsBucket> counts;
  const auto key = [bucket](Timestamp t) {
    Day d = timeutil::DayOf(t);
    return bucket == Bucket::kDay ? d : timeutil::MonthStart(d);
  };
  for (const Article &a : store.articles()) ++counts[key(a.published_at)].article_count;
  for (const Comment &c : store.comments()) ++counts[key(c.created_at)].comment_count;
  std::vector<StatsBucket> out;
  if (counts.empty()) return out;
  Day last = counts.rbegin()->first;
  for (Day d = counts.begin()->first; d <= last;
       d = bucket == Bucket::kDay ? d + 1 : timeutil::NextMonthStart(d)) {
    StatsBucket b;
    auto it = counts.find(d);
    if (it != counts.end()) b = it->second;
    b.start = d;
    out.push_back(b);
  }
  return out;
}

// Mean number of comments per article.
inline double Density(std::uint64_t comment_count, std::uint64_t article_count) {
  if (article_count == 0) throw ParameterError("density undefined for zero articles");
  return static_cast<double>(comment_count) / static_cast<double>(article_count);
}

// Writes every record in insertion order. Replaying the three streams (sites,
// then articles, then comments) into an empty store reproduces this store.
inline void ExportNdjson(const CorpusStore &store, std::ostream &sites,
                         std::ostream &articles, std::ostream &comments) {
  for (const Site &s : store.sites()) sites << ToNdjson(s) << '\n';
  for (const Article &a : store.articles()) articles << ToNdjson(a) << '\n';
  for (const Comment &c : store.comments()) comments << ToNdjson(c) << '\n';
}

// On-disk layout of a store directory.
struct StoreLayout {
  static constexpr const char *kSites = "sites.ndjson";
  static constexpr const char *kArticles = "articles.ndjson";
  static constexpr const char *kComments = "comments.ndjson";

  static const char *SegmentFor(RecordKind kind) {
    switch (kind) {
      case RecordKind::kSite: return kSites;
      case RecordKind::kArticle: return kArticles;
      case RecordKind::kComment: return kComments;
    }
    return kComments;
  }
};

// Rebuilds a store by replaying the segment files of a directory. Missing
// segments are treated as empty.
inline CorpusStore LoadStore(const std::filesystem::path &dir) {
  CorpusStore store;
  for (RecordKind kind :
       {RecordKind::kSite, RecordKind::kArticle, RecordKind::kComment}) {
    auto path = dir / StoreLayout::SegmentFor(kind);
    if (!std::filesystem::exists(path)) continue;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    IngestReport r = IngestStream(in, kind, store);
    if (r.records_rejected != 0 || r.io_error)
      throw ValidationError("corrupt segment " + path.string());
  }
  return store;
}

// Ingests a stream into `store` and appends every stored record to the
// matching segment file under `dir`.
inline IngestReport IngestIntoDirectory(std::istream &in, RecordKind kind,
                                        CorpusStore &store,
                                        const std::filesystem::path &dir,
                                        const IngestOptions &options = {}) {
  std::filesystem::create_directories(dir);
  auto path = dir / StoreLayout::SegmentFor(kind);
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error("cannot open " + path.string() + " for append");
  IngestReport report = IngestStream(
      in, kind, store, options,
      [&out](const std::string &line) { out << line << '\n'; });
  out.flush();
  if (!out) report.io_error = "segment write failure";
  return report;
}

}  // namespace chorus
