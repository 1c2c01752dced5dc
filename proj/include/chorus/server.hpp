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

// The /v1 JSON API. Readers grab the current snapshot and never block on
// writers; ingest and pipeline runs are serialized, build a new snapshot off
// to the side and publish it with a pointer swap.

#pragma once

#include <charconv>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "chorus/corpus.hpp"
#include "chorus/pipeline.hpp"
#include "chorus/query.hpp"

namespace chorus {
namespace service {

using OrderedJson = nlohmann::ordered_json;

struct Response {
  int status = 200;
  std::string body;
};

namespace internal {

inline int HexValue(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

// Malformed escapes are kept verbatim.
inline std::string PercentDecode(std::string_view s, bool plus_is_space) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      int hi = HexValue(s[i + 1]), lo = HexValue(s[i + 2]);
      if (hi >= 0 && lo >= 0) {
        out.push_back(static_cast<char>(hi * 16 + lo));
        i += 2;
        continue;
      }
    }
    out.push_back(plus_is_space && s[i] == '+' ? ' ' : s[i]);
  }
  return out;
}

using Params = std::map<std::string, std::string>;

inline Params ParseQuery(std::string_view q) {
  Params p;
  for (const std::string &part : util::Split(q, '&')) {
    if (part.empty()) continue;
    auto eq = part.find('=');
    std::string key = PercentDecode(part.substr(0, eq), true);
    std::string val = eq == std::string::npos ? "" : PercentDecode(part.substr(eq + 1), true);
    p[key] = std::move(val);
  }
  return p;
}

inline std::optional<std::string> Get(const Params &p, const std::string &key) {
  auto it = p.find(key);
  if (it == p.end() || it->second.empty()) return std::nullopt;
  return it->second;
}

inline std::size_t GetSize(const Params &p, const std::string &key, std::size_t fallback) {
  auto v = Get(p, key);
  if (!v) return fallback;
  std::size_t out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc() || ptr != v->data() + v->size())
    throw ParameterError(key + " must be a non-negative integer");
  return out;
}

inline DateRange GetRange(const Params &p) {
  DateRange r;
  for (const char *key : {"from", "to"}) {
    auto v = Get(p, key);
    if (!v) continue;
    auto day = timeutil::ParseDay(*v);
    if (!day) throw ParameterError(std::string(key) + " is not a date: " + *v);
    (std::string_view(key) == "from" ? r.from : r.to) = *day;
  }
  return r;
}

inline Response Json(int status, const OrderedJson &j) { return {status, j.dump(2) + "\n"}; }

inline Response ErrorResponse(int status, std::string_view message) {
  OrderedJson j;
  j["error"] = {{"status", status}, {"message", std::string(message)}};
  return Json(status, j);
}

}  // namespace internal

class Service {
 public:
  // `models` may be absent; pipeline runs then fail with 503.
  Service(pipeline::PipelineConfig config, std::optional<pipeline::Models> models,
          std::shared_ptr<const query::Snapshot> snapshot)
      : config_(std::move(config)), models_(std::move(models)), snapshot_(std::move(snapshot)) {
    if (!snapshot_)
      snapshot_ = query::Snapshot::Make({}, {}, models_ ? models_->kb : nullptr, config_.smoothing);
  }

  // Loads the store, its annotations and the models named by the config.
  static std::unique_ptr<Service> Open(const pipeline::PipelineConfig &config) {
    pipeline::Models models = pipeline::Models::Load(config);
    CorpusStore store = LoadStore(config.store_dir);
    auto ann = pipeline::LoadAnnotations(config.store_dir);
    auto snap = query::Snapshot::Make(std::move(store), ann ? std::move(*ann) : pipeline::AnnotationSet{},
                                      models.kb, config.smoothing);
    return std::make_unique<Service>(config, std::move(models), std::move(snap));
  }

  std::shared_ptr<const query::Snapshot> snapshot() const {
    std::lock_guard<std::mutex> lock(snapshot_mu_);
    return snapshot_;
  }

  // Routes one request. `target` is the raw request target (path and query,
  // still percent-encoded), so entity keys may contain encoded slashes.
  Response Handle(std::string_view method, std::string_view target, std::string_view body = {}) {
    try {
      return Route(method, target, body);
    } catch (const NotFoundError &e) {
      return internal::ErrorResponse(404, e.what());
    } catch (const ParameterError &e) {
      return internal::ErrorResponse(400, e.what());
    } catch (const ValidationError &e) {
      return internal::ErrorResponse(400, e.what());
    } catch (const SchemaError &e) {
      return internal::ErrorResponse(400, e.what());
    } catch (const ParseError &e) {
      return internal::ErrorResponse(400, e.what());
    } catch (const std::exception &e) {
      return internal::ErrorResponse(500, e.what());
    }
  }

  // Registers a catch-all handler on an httplib server.
  void Attach(httplib::Server &server) {
    auto handler = [this](const httplib::Request &req, httplib::Response &res) {
      Response r = Handle(req.method, req.target, req.body);
      res.status = r.status;
      res.set_content(r.body, "application/json");
    };
    server.Get(R"(/.*)", handler);
    server.Post(R"(/.*)", handler);
  }

  // Blocks until the server stops.
  bool Listen(const std::string &host, int port) {
    httplib::Server server;
    Attach(server);
    return server.listen(host, port);
  }

 private:
  Response Route(std::string_view method, std::string_view target, std::string_view body) {
    std::string_view path = target, qs;
    if (auto q = target.find('?'); q != std::string_view::npos) {
      path = target.substr(0, q);
      qs = target.substr(q + 1);
    }
    std::vector<std::string> seg;
    for (const std::string &s : util::Split(path, '/'))
      if (!s.empty()) seg.push_back(internal::PercentDecode(s, false));
    const internal::Params params = internal::ParseQuery(qs);
    if (seg.empty() || seg[0] != "v1") return internal::ErrorResponse(404, "no such route");

    const bool get = method == "GET", post = method == "POST";
    const auto wrong_method = [] { return internal::ErrorResponse(405, "method not allowed"); };

    if (seg.size() == 3 && seg[1] == "ingest") {
      if (!post) return wrong_method();
      auto kind = ParseRecordKind(seg[2]);
      if (!kind) return internal::ErrorResponse(404, "unknown record kind: " + seg[2]);
      return internal::Json(200, Ingest(*kind, body).ToJson());
    }
    if (seg.size() == 3 && seg[1] == "pipeline" && seg[2] == "run") {
      if (!post) return wrong_method();
      return RunPipeline();
    }
    if (!get) {
      if (seg.size() >= 2 && (seg[1] == "entities" || seg[1] == "influencers" || seg[1] == "stats"))
        return wrong_method();
      return internal::ErrorResponse(404, "no such route");
    }
    auto snap = snapshot();
    if (seg.size() == 3 && seg[1] == "entities" && seg[2] == "search") {
      auto q = internal::Get(params, "q");
      if (!q) throw ParameterError("missing query parameter q");
      return internal::Json(200, query::Search(*snap, *q, internal::GetSize(params, "limit", 20)));
    }
    if (seg.size() == 4 && seg[1] == "entities") {
      const std::string &key = seg[2];
      const DateRange range = internal::GetRange(params);
      if (seg[3] == "bubbles") return internal::Json(200, query::Bubbles(*snap, key, range));
      if (seg[3] == "pdf") return internal::Json(200, query::Pdf(*snap, key, range));
      if (seg[3] == "timeline") {
        query::TimelineParams tp;
        tp.range = range;
        tp.window = internal::GetSize(params, "window", snap->smoothing.window);
        tp.order = internal::GetSize(params, "order", snap->smoothing.order);
        return internal::Json(200, query::Timeline(*snap, key, tp));
      }
    }
    if (seg.size() == 2 && seg[1] == "influencers") {
      std::string metric = internal::Get(params, "metric").value_or("comments_count");
      return internal::Json(200, query::Influencers(*snap, metric, internal::GetSize(params, "k", 10)));
    }
    if (seg.size() == 2 && seg[1] == "stats") {
      std::string b = internal::Get(params, "bucket").value_or("day");
      if (b != "day" && b != "month") throw ParameterError("bucket must be day or month");
      return internal::Json(200, query::Stats(*snap, b == "day" ? Bucket::kDay : Bucket::kMonth));
    }
    return internal::ErrorResponse(404, "no such route");
  }

  IngestReport Ingest(RecordKind kind, std::string_view body) {
    std::lock_guard<std::mutex> write(write_mu_);
    auto current = snapshot();
    CorpusStore store = current->store;
    std::istringstream in{std::string(body)};
    IngestOptions options{config_.date_bounds};
    IngestReport report = config_.store_dir.empty()
                              ? IngestStream(in, kind, store, options)
                              : IngestIntoDirectory(in, kind, store, config_.store_dir, options);
    Publish(query::Snapshot::Make(std::move(store), current->annotations, current->kb, config_.smoothing));
    return report;
  }

  Response RunPipeline() {
    std::lock_guard<std::mutex> write(write_mu_);
    if (!models_) return internal::ErrorResponse(503, "models are not loaded");
    auto current = snapshot();
    pipeline::PipelineResult r =
        pipeline::RunPipeline(current->store, *models_, config_.link, &current->annotations);
    if (!r.report.skipped) {
      if (!config_.store_dir.empty()) pipeline::SaveAnnotations(config_.store_dir, r.annotations);
      Publish(query::Snapshot::Make(current->store, std::move(r.annotations), current->kb,
                                    config_.smoothing));
    }
    return internal::Json(200, r.report.ToJson());
  }

  void Publish(std::shared_ptr<const query::Snapshot> next) {
    std::lock_guard<std::mutex> lock(snapshot_mu_);
    snapshot_ = std::move(next);
  }

  pipeline::PipelineConfig config_;
  std::optional<pipeline::Models> models_;
  mutable std::mutex snapshot_mu_;
  std::shared_ptr<const query::Snapshot> snapshot_;
  std::mutex write_mu_;
};

}  // namespace service
}  // namespace chorus
