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

// Batch annotation of a store: tag article titles and bodies, link the
// mentions, score every comment, and persist the result beside the store.

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "chorus/analytics.hpp"
#include "chorus/common.hpp"
#include "chorus/corpus.hpp"
#include "chorus/nel.hpp"
#include "chorus/ner.hpp"
#include "chorus/sentiment.hpp"
#include "chorus/textproc.hpp"
#include "chorus/timeutil.hpp"

namespace chorus {
namespace pipeline {

using OrderedJson = nlohmann::ordered_json;

struct SmoothingDefaults {
  std::size_t window = 7;
  std::size_t order = 2;
};

struct PipelineConfig {
  std::filesystem::path store_dir = "store";
  // Empty: mentions come from dictionary spotting against the KB instead of
  // the tagger.
  std::filesystem::path ner_model;
  std::filesystem::path kb_dir;
  std::filesystem::path sentiment_model;
  nel::LinkParams link;
  SmoothingDefaults smoothing;
  DateRange date_bounds;
  std::string host = "127.0.0.1";
  int port = 8080;

  void Validate() const {
    link.Validate();
    if (smoothing.window < 3 || smoothing.window % 2 == 0)
      throw ParameterError("smoothing.window must be odd and >= 3");
    if (smoothing.order >= smoothing.window)
      throw ParameterError("smoothing.order must be smaller than smoothing.window");
    if (port < 0 || port > 65535) throw ParameterError("listen.port out of range");
    if (date_bounds.Empty()) throw ParameterError("date_bounds.from is after date_bounds.to");
  }

  // Relative paths are resolved against `base`.
  static PipelineConfig FromJson(const nlohmann::json &j, const std::filesystem::path &base = {}) {
    if (!j.is_object()) throw SchemaError("config");
    PipelineConfig c;
    const auto path = [&](const char *key, std::filesystem::path &out) {
      if (!j.contains(key) || j[key].is_null()) return;
      if (!j[key].is_string()) throw SchemaError(key);
      std::filesystem::path p = j[key].get<std::string>();
      out = p.is_absolute() || base.empty() ? p : base / p;
    };
    path("store_dir", c.store_dir);
    if (c.store_dir.is_relative() && !base.empty() && !j.contains("store_dir"))
      c.store_dir = base / c.store_dir;
    path("ner_model", c.ner_model);
    path("kb_dir", c.kb_dir);
    path("sentiment_model", c.sentiment_model);
    try {
      if (j.contains("link")) {
        const auto &l = j["link"];
        c.link.lp_min = l.value("lp_min", c.link.lp_min);
        c.link.epsilon = l.value("epsilon", c.link.epsilon);
        c.link.rho_min = l.value("rho_min", c.link.rho_min);
        c.link.context_sentences = l.value("context_sentences", c.link.context_sentences);
      }
      if (j.contains("smoothing")) {
        const auto &s = j["smoothing"];
        c.smoothing.window = s.value("window", c.smoothing.window);
        c.smoothing.order = s.value("order", c.smoothing.order);
      }
      if (j.contains("listen")) {
        const auto &l = j["listen"];
        c.host = l.value("host", c.host);
        c.port = l.value("port", c.port);
      }
    } catch (const nlohmann::json::exception &e) {
      throw SchemaError(std::string("config: ") + e.what());
    }
    if (j.contains("date_bounds")) {
      const auto &d = j["date_bounds"];
      for (const char *key : {"from", "to"}) {
        if (!d.contains(key) || d[key].is_null()) continue;
        if (!d[key].is_string()) throw SchemaError(std::string("date_bounds.") + key);
        auto day = timeutil::ParseDay(d[key].get<std::string>());
        if (!day) throw ValidationError(std::string("bad date in date_bounds.") + key);
        (std::string_view(key) == "from" ? c.date_bounds.from : c.date_bounds.to) = *day;
      }
    }
    c.Validate();
    return c;
  }

  static PipelineConfig Load(const std::filesystem::path &file) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(util::ReadFile(file.string()));
    } catch (const nlohmann::json::parse_error &e) {
      throw ParseError("config " + file.string() + ": " + e.what(), e.byte);
    }
    return FromJson(j, file.parent_path());
  }
};

// Everything the pipeline needs besides the store, loaded once.
struct Models {
  std::optional<ner::TaggerModel> tagger;
  std::shared_ptr<const nel::KnowledgeBase> kb;
  std::optional<sentiment::Classifier> classifier;
  // Hash of the model files, part of the pipeline's content hash.
  std::string fingerprint;

  static Models Load(const PipelineConfig &config) {
    Models m;
    util::Fingerprint fp;
    const auto need = [](const std::filesystem::path &p, const char *what) {
      if (p.empty()) throw ParameterError(std::string(what) + " is not configured");
      if (!std::filesystem::exists(p))
        throw NotFoundError(std::string(what) + " not found: " + p.string());
    };
    need(config.kb_dir, "kb_dir");
    auto kb = nel::KnowledgeBase::LoadDirectory(config.kb_dir);
    kb.Validate();
    for (const char *f : {"entities.tsv", "inlinks.tsv", "anchors.tsv", "anchor_freq.tsv", "meta.tsv"}) {
      auto p = config.kb_dir / f;
      fp.Add(std::filesystem::exists(p) ? util::ReadFile(p.string()) : std::string());
    }
    m.kb = std::make_shared<const nel::KnowledgeBase>(std::move(kb));

    need(config.sentiment_model, "sentiment_model");
    m.classifier = sentiment::LoadClassifier(config.sentiment_model.string());
    fp.Add(util::ReadFile(config.sentiment_model.string()));

    if (!config.ner_model.empty()) {
      need(config.ner_model, "ner_model");
      std::string data = util::ReadFile(config.ner_model.string());
      std::istringstream in(data);
      m.tagger = ner::TaggerModel::Load(in);
      fp.Add(data);
    } else {
      fp.Add("spotter");
    }
    m.fingerprint = fp.hex();
    return m;
  }
};

// ---------------------------------------------------------------------------
// Annotations

struct MentionAnnotation {
  std::string field;  // "title" or "body"
  ner::EntityMention mention;
  // Set when the mention had candidates.
  std::optional<nel::EntityId> entity;
  double link_probability = 0.0;
  double commonness = 0.0;
  double rho = 0.0;
  bool accepted = false;
  // Aggregation key: the entity id when accepted, otherwise a surface key.
  std::string key;
};

struct ArticleAnnotation {
  std::vector<MentionAnnotation> mentions;
  std::vector<std::string> entity_keys;  // sorted, unique
};

struct CommentAnnotation {
  sentiment::Label label = sentiment::Label::kNeutral;
  sentiment::Probabilities probs{};
  double score = 0.0;
};

struct PipelineReport {
  std::size_t documents_processed = 0;
  std::size_t mentions = 0;
  std::size_t links_accepted = 0;
  std::size_t comments_scored = 0;
  std::size_t failures = 0;
  bool skipped = false;
  std::vector<std::string> errors;  // first few failure messages

  OrderedJson ToJson() const {
    OrderedJson j;
    j["status"] = skipped ? "skipped: up-to-date" : "completed";
    j["documents_processed"] = documents_processed;
    j["mentions"] = mentions;
    j["links_accepted"] = links_accepted;
    j["comments_scored"] = comments_scored;
    j["failures"] = failures;
    if (!errors.empty()) j["errors"] = errors;
    return j;
  }
};

struct AnnotationSet {
  std::string content_hash;
  std::map<std::string, ArticleAnnotation> articles;
  std::map<std::string, CommentAnnotation> comments;

  analytics::Annotations View() const {
    analytics::Annotations v;
    for (const auto &[id, a] : articles)
      if (!a.entity_keys.empty()) v.article_entities[id] = a.entity_keys;
    for (const auto &[id, c] : comments) v.comment_scores[id] = c.score;
    return v;
  }

  OrderedJson ToJson() const;
  static AnnotationSet FromJson(const nlohmann::json &j);
};

inline constexpr const char *kAnnotationsFile = "annotations.json";

inline std::string SurfaceKey(std::string_view surface) {
  return std::string(analytics::kSurfacePrefix) + nel::AnchorKey(surface);
}

inline OrderedJson AnnotationSet::ToJson() const {
  OrderedJson j;
  j["format"] = "chorus-annotations";
  j["version"] = 1;
  j["content_hash"] = content_hash;
  OrderedJson arts = OrderedJson::array();
  for (const auto &[id, a] : articles) {
    OrderedJson ja;
    ja["article_id"] = id;
    ja["entity_keys"] = a.entity_keys;
    OrderedJson ms = OrderedJson::array();
    for (const MentionAnnotation &m : a.mentions) {
      OrderedJson jm;
      jm["field"] = m.field;
      jm["surface"] = m.mention.surface;
      jm["type"] = ner::TypeName(m.mention.type);
      jm["token_start"] = m.mention.token_start;
      jm["token_end"] = m.mention.token_end;
      jm["char_start"] = m.mention.char_start;
      jm["char_end"] = m.mention.char_end;
      jm["sentence"] = m.mention.sentence;
      jm["entity"] = m.entity ? OrderedJson(*m.entity) : OrderedJson(nullptr);
      jm["link_probability"] = m.link_probability;
      jm["commonness"] = m.commonness;
      jm["rho"] = m.rho;
      jm["accepted"] = m.accepted;
      jm["key"] = m.key;
      ms.push_back(std::move(jm));
    }
    ja["mentions"] = std::move(ms);
    arts.push_back(std::move(ja));
  }
  j["articles"] = std::move(arts);
  OrderedJson cs = OrderedJson::array();
  for (const auto &[id, c] : comments) {
    OrderedJson jc;
    jc["comment_id"] = id;
    jc["label"] = sentiment::LabelName(c.label);
    jc["probs"] = c.probs;
    jc["score"] = c.score;
    cs.push_back(std::move(jc));
  }
  j["comments"] = std::move(cs);
  return j;
}

inline AnnotationSet AnnotationSet::FromJson(const nlohmann::json &j) {
  if (!j.is_object() || j.value("format", "") != "chorus-annotations")
    throw SchemaError("annotations format");
  if (j.value("version", 0) != 1) throw ValidationError("unsupported annotations version");
  AnnotationSet s;
  try {
    s.content_hash = j.at("content_hash").get<std::string>();
    for (const auto &ja : j.at("articles")) {
      ArticleAnnotation a;
      a.entity_keys = ja.at("entity_keys").get<std::vector<std::string>>();
      for (const auto &jm : ja.at("mentions")) {
        MentionAnnotation m;
        m.field = jm.at("field").get<std::string>();
        m.mention.surface = jm.at("surface").get<std::string>();
        auto type = ner::ParseEntityType(jm.at("type").get<std::string>());
        if (!type) throw ValidationError("unknown entity type in annotations");
        m.mention.type = *type;
        m.mention.token_start = jm.at("token_start").get<std::size_t>();
        m.mention.token_end = jm.at("token_end").get<std::size_t>();
        m.mention.char_start = jm.at("char_start").get<std::size_t>();
        m.mention.char_end = jm.at("char_end").get<std::size_t>();
        m.mention.sentence = jm.at("sentence").get<std::size_t>();
        if (!jm.at("entity").is_null()) m.entity = jm.at("entity").get<std::string>();
        m.link_probability = jm.at("link_probability").get<double>();
        m.commonness = jm.at("commonness").get<double>();
        m.rho = jm.at("rho").get<double>();
        m.accepted = jm.at("accepted").get<bool>();
        m.key = jm.at("key").get<std::string>();
        a.mentions.push_back(std::move(m));
      }
      s.articles[ja.at("article_id").get<std::string>()] = std::move(a);
    }
    for (const auto &jc : j.at("comments")) {
      CommentAnnotation c;
      auto label = sentiment::ParseLabel(jc.at("label").get<std::string>());
      if (!label) throw ValidationError("unknown sentiment label in annotations");
      c.label = *label;
      c.probs = jc.at("probs").get<sentiment::Probabilities>();
      c.score = jc.at("score").get<double>();
      s.comments[jc.at("comment_id").get<std::string>()] = c;
    }
  } catch (const nlohmann::json::exception &e) {
    throw SchemaError(std::string("annotations: ") + e.what());
  }
  return s;
}

inline std::optional<AnnotationSet> LoadAnnotations(const std::filesystem::path &store_dir) {
  auto path = store_dir / kAnnotationsFile;
  if (!std::filesystem::exists(path)) return std::nullopt;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(util::ReadFile(path.string()));
  } catch (const nlohmann::json::parse_error &e) {
    throw ParseError(path.string() + ": " + e.what(), e.byte);
  }
  return AnnotationSet::FromJson(j);
}

// Writes to a temporary file and renames it over the old one.
inline void SaveAnnotations(const std::filesystem::path &store_dir, const AnnotationSet &set) {
  std::filesystem::create_directories(store_dir);
  auto path = store_dir / kAnnotationsFile;
  auto tmp = path;
  tmp += ".tmp";
  util::WriteFile(tmp.string(), set.ToJson().dump(1) + "\n");
  std::filesystem::rename(tmp, path);
}

// Hash of everything the annotations depend on.
inline std::string ContentHash(const CorpusStore &store, const Models &models,
                               const nel::LinkParams &params) {
  util::Fingerprint fp;
  for (const Article &a : store.articles()) fp.Add(ToNdjson(a));
  for (const Comment &c : store.comments()) fp.Add(ToNdjson(c));
  fp.Add(models.fingerprint);
  fp.Add(util::FormatDouble(params.lp_min));
  fp.Add(util::FormatDouble(params.epsilon));
  fp.Add(util::FormatDouble(params.rho_min));
  fp.Add(std::to_string(params.context_sentences));
  return fp.hex();
}

// Mentions of one article and their links. Title sentences come first; body
// sentence indices continue after them so both fields share one context.
inline ArticleAnnotation AnnotateArticle(const Article &article, const Models &models,
                                         const nel::LinkParams &params) {
  ArticleAnnotation out;
  std::vector<ner::EntityMention> all;
  std::vector<std::string> fields;
  std::size_t sentence_offset = 0;
  for (const auto &[name, text] : {std::pair<const char *, const std::string &>{"title", article.title},
                                   {"body", article.body}}) {
    auto mentions = models.tagger ? ner::TagText(*models.tagger, text) : nel::SpotAnchors(*models.kb, text);
    for (auto &m : mentions) {
      m.sentence += sentence_offset;
      all.push_back(std::move(m));
      fields.emplace_back(name);
    }
    sentence_offset += std::max<std::size_t>(1, Tokenize(text).Sentences().size());
  }
  auto linked = nel::LinkMentions(*models.kb, all, params);
  for (std::size_t i = 0; i < all.size(); ++i) {
    MentionAnnotation ma;
    ma.field = fields[i];
    ma.mention = all[i];
    for (const nel::LinkedEntity &le : linked) {
      if (le.mention.sentence != all[i].sentence || le.mention.token_start != all[i].token_start ||
          le.mention.token_end != all[i].token_end)
        continue;
      ma.entity = le.entity;
      ma.link_probability = le.link_probability;
      ma.commonness = le.commonness;
      ma.rho = le.rho;
      ma.accepted = le.accepted;
      break;
    }
    ma.key = ma.accepted ? *ma.entity : SurfaceKey(all[i].surface);
    if (ma.key == analytics::kSurfacePrefix) continue;  // nothing left after normalization
    out.entity_keys.push_back(ma.key);
    out.mentions.push_back(std::move(ma));
  }
  std::sort(out.entity_keys.begin(), out.entity_keys.end());
  out.entity_keys.erase(std::unique(out.entity_keys.begin(), out.entity_keys.end()),
                        out.entity_keys.end());
  return out;
}

struct PipelineResult {
  PipelineReport report;
  AnnotationSet annotations;
};

// Annotates every article and comment of the store. When `previous` carries
// the same content hash nothing is recomputed. Failures on one document are
// counted and reported; they never abort the batch.
inline PipelineResult RunPipeline(const CorpusStore &store, const Models &models,
                                  const nel::LinkParams &params,
                                  const AnnotationSet *previous = nullptr) {
  params.Validate();
  PipelineResult r;
  const std::string hash = ContentHash(store, models, params);
  if (previous && previous->content_hash == hash) {
    r.annotations = *previous;
    r.report.skipped = true;
    return r;
  }
  r.annotations.content_hash = hash;
  constexpr std::size_t kMaxErrors = 20;
  const auto fail = [&](const std::string &what, const std::exception &e) {
    ++r.report.failures;
    if (r.report.errors.size() < kMaxErrors) r.report.errors.push_back(what + ": " + e.what());
  };
  for (const Article &a : store.articles()) {
    try {
      ArticleAnnotation ann = AnnotateArticle(a, models, params);
      r.report.mentions += ann.mentions.size();
      for (const auto &m : ann.mentions) r.report.links_accepted += m.accepted ? 1 : 0;
      r.annotations.articles[a.article_id] = std::move(ann);
      ++r.report.documents_processed;
    } catch (const std::exception &e) {
      fail("article " + a.article_id, e);
    }
  }
  for (const Comment &c : store.comments()) {
    try {
      sentiment::Prediction p = sentiment::Predict(*models.classifier, c.body);
      CommentAnnotation ca;
      ca.label = p.label;
      ca.probs = p.probs;
      ca.score = sentiment::ScoreFromProbs(p.probs);
      r.annotations.comments[c.comment_id] = ca;
      ++r.report.comments_scored;
    } catch (const std::exception &e) {
      fail("comment " + c.comment_id, e);
    }
  }
  return r;
}

// RunPipeline against the annotations persisted in the store directory, saving
// the new ones when anything changed.
inline PipelineResult RunPipelineOnDirectory(const PipelineConfig &config, const CorpusStore &store,
                                             const Models &models) {
  auto previous = LoadAnnotations(config.store_dir);
  PipelineResult r = RunPipeline(store, models, config.link, previous ? &*previous : nullptr);
  if (!r.report.skipped) SaveAnnotations(config.store_dir, r.annotations);
  return r;
}

}  // namespace pipeline
}  // namespace chorus
