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

// Named entity recognition with a linear sequence tagger over BILOU labels.
// Scores are sums of sparse feature weights plus label-transition weights;
// decoding is exact Viterbi restricted to structurally valid BILOU sequences,
// and training is the averaged structured perceptron.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "chorus/common.hpp"
#include "chorus/textproc.hpp"

namespace chorus {
namespace ner {

enum class EntityType {
  kPerson,
  kOrg,
  kProduct,
  kFacility,
  kLocation,
  kGpe,
  kDate,
  kEvent,
  kOther,
};

inline constexpr std::array<EntityType, 9> kEntityTypes = {
    EntityType::kPerson,   EntityType::kOrg,   EntityType::kProduct,
    EntityType::kFacility, EntityType::kLocation, EntityType::kGpe,
    EntityType::kDate,     EntityType::kEvent, EntityType::kOther,
};

inline std::string_view TypeName(EntityType t) {
  static constexpr std::array<std::string_view, 9> kNames = {
      "PERSON", "ORG", "PRODUCT", "FACILITY", "LOCATION",
      "GPE",    "DATE", "EVENT",  "OTHER"};
  return kNames[static_cast<std::size_t>(t)];
}

inline std::optional<EntityType> ParseEntityType(std::string_view s) {
  for (EntityType t : kEntityTypes)
    if (TypeName(t) == s) return t;
  return std::nullopt;
}

enum class Bilou : std::uint8_t { kO, kB, kI, kL, kU };

struct Tag {
  Bilou kind = Bilou::kO;
  EntityType type = EntityType::kOther;  // ignored for O

  static Tag O() { return {}; }
  static Tag Of(Bilou kind, EntityType type) { return {kind, type}; }

  bool operator==(const Tag &other) const {
    return kind == other.kind && (kind == Bilou::kO || type == other.type);
  }

  std::string ToString() const {
    static constexpr std::array<char, 5> kPrefix = {'O', 'B', 'I', 'L', 'U'};
    if (kind == Bilou::kO) return "O";
    std::string s(1, kPrefix[static_cast<int>(kind)]);
    s += '-';
    s += TypeName(type);
    return s;
  }

  static std::optional<Tag> Parse(std::string_view s) {
    if (s == "O") return O();
    if (s.size() < 3 || s[1] != '-') return std::nullopt;
    Bilou kind;
    switch (s[0]) {
      case 'B': kind = Bilou::kB; break;
      case 'I': kind = Bilou::kI; break;
      case 'L': kind = Bilou::kL; break;
      case 'U': kind = Bilou::kU; break;
      default: return std::nullopt;
    }
    auto type = ParseEntityType(s.substr(2));
    if (!type) return std::nullopt;
    return Of(kind, *type);
  }
};

using TagSequence = std::vector<Tag>;

// BILOU structure. `prev` is nullptr at the start of a sentence.
inline bool CanFollow(const Tag *prev, const Tag &next) {
  const bool open = prev && (prev->kind == Bilou::kB || prev->kind == Bilou::kI);
  if (!open) return next.kind == Bilou::kO || next.kind == Bilou::kB || next.kind == Bilou::kU;
  return (next.kind == Bilou::kI || next.kind == Bilou::kL) && next.type == prev->type;
}

inline bool CanEnd(const Tag &last) {
  return last.kind != Bilou::kB && last.kind != Bilou::kI;
}

// Position of the first structural violation, or nullopt for a valid
// sequence. A sequence left open at the end reports its length.
inline std::optional<std::size_t> FirstInvalid(std::span<const Tag> tags) {
  for (std::size_t i = 0; i < tags.size(); ++i)
    if (!CanFollow(i == 0 ? nullptr : &tags[i - 1], tags[i])) return i;
  if (!tags.empty() && !CanEnd(tags.back())) return tags.size();
  return std::nullopt;
}

inline bool IsValid(std::span<const Tag> tags) { return !FirstInvalid(tags); }

// O first, then B/I/L/U for every entity type. Decoding breaks ties in favour
// of earlier labels, so an untrained model tags everything O.
inline std::vector<Tag> DefaultLabelSet() {
  std::vector<Tag> labels{Tag::O()};
  for (EntityType t : kEntityTypes)
    for (Bilou k : {Bilou::kB, Bilou::kI, Bilou::kL, Bilou::kU})
      labels.push_back(Tag::Of(k, t));
  return labels;
}

struct EntityMention {
  std::size_t token_start = 0;  // half-open token span
  std::size_t token_end = 0;
  std::size_t char_start = 0;   // half-open, Unicode scalar values
  std::size_t char_end = 0;
  EntityType type = EntityType::kOther;
  std::string surface;
  std::size_t sentence = 0;

  bool SameSpan(const EntityMention &o) const {
    return token_start == o.token_start && token_end == o.token_end && type == o.type;
  }
};

// Named phrase lists, e.g. "LOCATION" -> {"london", "new york"}. Phrases are
// stored normalized (lowercase, single spaces).
struct Gazetteers {
  std::map<std::string, std::set<std::string>> lists;

  void Add(const std::string &name, std::string_view phrase) {
    std::string norm = util::NormalizePhrase(phrase);
    if (!norm.empty()) lists[name].insert(std::move(norm));
  }

  // One phrase per line.
  void Load(const std::string &name, std::istream &in) {
    std::string line;
    while (std::getline(in, line)) Add(name, util::StripCR(line));
  }

  bool empty() const { return lists.empty(); }
};

inline constexpr std::size_t kMaxGazetteerWindow = 3;

// Feature strings for one position of a sentence, sorted and unique.
inline std::vector<std::string> ExtractFeatures(std::span<const Token> sentence,
                                                std::size_t position,
                                                const Gazetteers &gazetteers) {
  if (position >= sentence.size()) throw ParameterError("position out of range");
  std::vector<std::string> f;
  const auto lower = [&](std::size_t i) { return util::ToLowerUtf8(sentence[i].text); };

  const std::string cur = lower(position);
  f.push_back("bias");
  f.push_back("w=" + cur);
  f.push_back("shape=" + sentence[position].shape);
  if (position == 0) {
    f.push_back("sent_initial");
    f.push_back("w-1=<s>");
  } else {
    f.push_back("w-1=" + lower(position - 1));
    f.push_back("shape-1=" + sentence[position - 1].shape);
  }
  if (position + 1 == sentence.size()) {
    f.push_back("w+1=</s>");
  } else {
    f.push_back("w+1=" + lower(position + 1));
    f.push_back("shape+1=" + sentence[position + 1].shape);
  }
  const std::u32string u = util::DecodeUtf8(cur);
  const std::size_t k = std::min<std::size_t>(3, u.size());
  f.push_back("pre3=" + util::EncodeUtf8(u.substr(0, k)));
  f.push_back("suf3=" + util::EncodeUtf8(u.substr(u.size() - k)));

  // Every window of 1..3 tokens that covers the position.
  if (!gazetteers.empty()) {
    for (std::size_t len = 1; len <= kMaxGazetteerWindow; ++len) {
      const std::size_t first = position + 1 >= len ? position + 1 - len : 0;
      for (std::size_t begin = first; begin <= position; ++begin) {
        if (begin + len > sentence.size()) break;
        std::string phrase;
        for (std::size_t i = begin; i < begin + len; ++i) {
          if (i > begin) phrase += ' ';
          phrase += lower(i);
        }
        for (const auto &[name, phrases] : gazetteers.lists)
          if (phrases.count(phrase))
            f.push_back("gaz:" + name + ":" + std::to_string(len));
      }
    }
  }
  std::sort(f.begin(), f.end());
  f.erase(std::unique(f.begin(), f.end()), f.end());
  return f;
}

// Sparse linear scorer over a fixed, ordered label set.
class TaggerModel {
 public:
  TaggerModel() : TaggerModel(DefaultLabelSet()) {}
  explicit TaggerModel(std::vector<Tag> labels) : labels_(std::move(labels)) {
    if (labels_.empty()) throw ParameterError("empty label set");
    transitions_.assign((labels_.size() + 1) * labels_.size(), 0.0);
  }

  const std::vector<Tag> &labels() const { return labels_; }
  std::size_t num_labels() const { return labels_.size(); }

  std::optional<std::size_t> LabelIndex(const Tag &t) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == t) return i;
    return std::nullopt;
  }

  // Index of the pseudo-label that precedes the first token.
  std::size_t start_index() const { return labels_.size(); }

  double FeatureWeight(const std::string &feature, std::size_t label) const {
    auto it = features_.find(feature);
    return it == features_.end() ? 0.0 : it->second[label];
  }
  void SetFeatureWeight(const std::string &feature, std::size_t label, double w) {
    auto &row = features_[feature];
    if (row.empty()) row.assign(labels_.size(), 0.0);
    row.at(label) = w;
  }
  const std::vector<double> *FeatureRow(const std::string &feature) const {
    auto it = features_.find(feature);
    return it == features_.end() ? nullptr : &it->second;
  }

  // `from` may be start_index().
  double Transition(std::size_t from, std::size_t to) const {
    return transitions_.at(from * labels_.size() + to);
  }
  void SetTransition(std::size_t from, std::size_t to, double w) {
    transitions_.at(from * labels_.size() + to) = w;
  }

  const std::unordered_map<std::string, std::vector<double>> &features() const {
    return features_;
  }

  Gazetteers &gazetteers() { return gazetteers_; }
  const Gazetteers &gazetteers() const { return gazetteers_; }

  // Sum of feature weights per label at every position of a sentence.
  std::vector<std::vector<double>> Emissions(std::span<const Token> sentence) const {
    std::vector<std::vector<double>> em(sentence.size(),
                                        std::vector<double>(labels_.size(), 0.0));
    for (std::size_t t = 0; t < sentence.size(); ++t) {
      for (const std::string &f : ExtractFeatures(sentence, t, gazetteers_)) {
        const std::vector<double> *row = FeatureRow(f);
        if (!row) continue;
        for (std::size_t l = 0; l < labels_.size(); ++l) em[t][l] += (*row)[l];
      }
    }
    return em;
  }

  void Save(std::ostream &out) const;
  static TaggerModel Load(std::istream &in);

 private:
  std::vector<Tag> labels_;
  std::unordered_map<std::string, std::vector<double>> features_;
  std::vector<double> transitions_;  // (labels + 1) x labels, last row = start
  Gazetteers gazetteers_;
};

// Exact max-score decoding over structurally valid sequences given per
// position label scores and a (labels+1) x labels transition table whose last
// row holds start scores. Among equal-score optima the sequence that is
// smallest position by position in label order wins. Returns label indexes.
inline std::vector<std::size_t> ViterbiIndexes(
    const std::vector<Tag> &labels, const std::vector<std::vector<double>> &emissions,
    const std::function<double(std::size_t, std::size_t)> &transition) {
  const std::size_t n = emissions.size();
  const std::size_t k = labels.size();
  std::vector<std::size_t> path;
  if (n == 0) return path;
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  // allowed[from][to], with from == k meaning sentence start.
  std::vector<std::vector<bool>> allowed(k + 1, std::vector<bool>(k));
  for (std::size_t from = 0; from <= k; ++from)
    for (std::size_t to = 0; to < k; ++to)
      allowed[from][to] = CanFollow(from == k ? nullptr : &labels[from], labels[to]);

  // Best score of positions t..n-1 given label l at t, and the successor
  // that achieves it. Filling right to left lets the forward walk pick the
  // earliest label at each step among those that keep the optimum.
  std::vector<std::vector<double>> suffix(n, std::vector<double>(k, kNegInf));
  std::vector<std::vector<std::size_t>> next(n, std::vector<std::size_t>(k, 0));
  for (std::size_t l = 0; l < k; ++l)
    suffix[n - 1][l] = CanEnd(labels[l]) ? emissions[n - 1][l] : kNegInf;
  for (std::size_t t = n - 1; t-- > 0;) {
    for (std::size_t l = 0; l < k; ++l) {
      double best = kNegInf;
      std::size_t arg = 0;
      for (std::size_t m = 0; m < k; ++m) {
        if (!allowed[l][m] || suffix[t + 1][m] == kNegInf) continue;
        double s = transition(l, m) + suffix[t + 1][m];
        if (s > best) {
          best = s;
          arg = m;
        }
      }
      suffix[t][l] = best == kNegInf ? kNegInf : emissions[t][l] + best;
      next[t][l] = arg;
    }
  }
  double best = kNegInf;
  std::size_t first = 0;
  for (std::size_t l = 0; l < k; ++l) {
    if (!allowed[k][l] || suffix[0][l] == kNegInf) continue;
    double s = transition(k, l) + suffix[0][l];
    if (s > best) {
      best = s;
      first = l;
    }
  }
  if (best == kNegInf) throw ValidationError("label set admits no valid tag sequence");
  path.push_back(first);
  for (std::size_t t = 0; t + 1 < n; ++t) path.push_back(next[t][path.back()]);
  return path;
}

inline TagSequence ViterbiDecode(const TaggerModel &model, std::span<const Token> sentence) {
  auto idx = ViterbiIndexes(model.labels(), model.Emissions(sentence),
                            [&model](std::size_t a, std::size_t b) {
                              return model.Transition(a, b);
                            });
  TagSequence tags;
  tags.reserve(idx.size());
  for (std::size_t i : idx) tags.push_back(model.labels()[i]);
  return tags;
}

// Total score of a tag sequence under the model (-inf when invalid).
inline double SequenceScore(const TaggerModel &model, std::span<const Token> sentence,
                            std::span<const Tag> tags) {
  if (!IsValid(tags)) return -std::numeric_limits<double>::infinity();
  auto em = model.Emissions(sentence);
  double score = 0.0;
  std::size_t prev = model.start_index();
  for (std::size_t t = 0; t < tags.size(); ++t) {
    auto l = model.LabelIndex(tags[t]);
    if (!l) return -std::numeric_limits<double>::infinity();
    score += model.Transition(prev, *l) + em[t][*l];
    prev = *l;
  }
  return score;
}

// ---------------------------------------------------------------------------
// Spans <-> tags

// Converts tags over `tokens[begin, begin + tags.size())` into mentions. Total
// on invalid input: a stray I/L opens a span, and a span still open at a break
// or the end is closed there.
inline std::vector<EntityMention> MentionsFromTags(const TokenizedText &text,
                                                   std::size_t begin,
                                                   std::span<const Tag> tags,
                                                   std::size_t sentence = 0) {
  std::vector<EntityMention> out;
  std::optional<std::size_t> open;
  EntityType open_type = EntityType::kOther;
  const auto close = [&](std::size_t end) {
    const Token &a = text.tokens[begin + *open];
    const Token &b = text.tokens[begin + end - 1];
    EntityMention m;
    m.token_start = begin + *open;
    m.token_end = begin + end;
    m.char_start = a.start;
    m.char_end = b.end;
    m.type = open_type;
    m.surface = text.source.size() >= b.byte_end
                    ? text.source.substr(a.byte_start, b.byte_end - a.byte_start)
                    : std::string();
    m.sentence = sentence;
    out.push_back(std::move(m));
    open.reset();
  };
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const Tag &t = tags[i];
    const bool continues = open && open_type == t.type &&
                           (t.kind == Bilou::kI || t.kind == Bilou::kL);
    if (open && !continues) close(i);
    switch (t.kind) {
      case Bilou::kO:
        break;
      case Bilou::kU:
        open = i;
        open_type = t.type;
        close(i + 1);
        break;
      case Bilou::kB:
      case Bilou::kI:
        if (!open) {
          open = i;
          open_type = t.type;
        }
        break;
      case Bilou::kL:
        if (!open) {
          open = i;
          open_type = t.type;
        }
        close(i + 1);
        break;
    }
  }
  if (open) close(tags.size());
  return out;
}

// BILOU encoding of non-overlapping mentions over `length` tokens. Mention
// token offsets are relative to `begin`.
inline TagSequence TagsFromMentions(std::size_t length,
                                    std::span<const EntityMention> mentions,
                                    std::size_t begin = 0) {
  TagSequence tags(length, Tag::O());
  for (const EntityMention &m : mentions) {
    std::size_t s = m.token_start - begin, e = m.token_end - begin;
    if (s >= e || e > length) throw ParameterError("mention outside sequence");
    if (e - s == 1) {
      tags[s] = Tag::Of(Bilou::kU, m.type);
      continue;
    }
    tags[s] = Tag::Of(Bilou::kB, m.type);
    for (std::size_t i = s + 1; i + 1 < e; ++i) tags[i] = Tag::Of(Bilou::kI, m.type);
    tags[e - 1] = Tag::Of(Bilou::kL, m.type);
  }
  return tags;
}

// Tokenizes, decodes every sentence and returns typed mentions sorted by
// position.
inline std::vector<EntityMention> TagText(const TaggerModel &model, std::string_view text) {
  TokenizedText tt = Tokenize(text);
  std::vector<EntityMention> out;
  const auto sentences = tt.Sentences();
  for (std::size_t s = 0; s < sentences.size(); ++s) {
    auto [b, e] = sentences[s];
    std::span<const Token> toks(tt.tokens.data() + b, e - b);
    TagSequence tags = ViterbiDecode(model, toks);
    for (auto &m : MentionsFromTags(tt, b, tags, s)) out.push_back(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct LabeledSentence {
  std::vector<Token> tokens;
  TagSequence gold;
};

struct TrainReport {
  // Training-set tag errors made while learning, one entry per epoch.
  std::vector<std::size_t> mistakes_per_epoch;
};

// Averaged structured perceptron. Each epoch visits the sentences in a
// seed-determined order, decodes with the current weights and on a mismatch
// adds the gold features/transitions and subtracts the predicted ones. The
// returned weights are the average of the weight vector over every step.
inline TaggerModel TrainPerceptron(std::span<const LabeledSentence> data, int epochs,
                                   std::uint64_t seed, const Gazetteers &gazetteers = {},
                                   std::vector<Tag> labels = DefaultLabelSet(),
                                   TrainReport *report = nullptr) {
  if (epochs < 0) throw ParameterError("epochs must be non-negative");
  if (data.empty()) throw ParameterError("no training data");
  TaggerModel model(labels);
  model.gazetteers() = gazetteers;
  const std::size_t k = labels.size();

  // Intern features and labels once.
  std::unordered_map<std::string, std::size_t> feature_ids;
  std::vector<std::string> feature_names;
  std::vector<std::vector<std::vector<std::size_t>>> feats(data.size());
  std::vector<std::vector<std::size_t>> gold(data.size());
  for (std::size_t s = 0; s < data.size(); ++s) {
    const LabeledSentence &ls = data[s];
    if (ls.gold.size() != ls.tokens.size())
      throw ValidationError("sentence " + std::to_string(s) + ": tag count mismatch");
    if (auto bad = FirstInvalid(ls.gold))
      throw ValidationError("sentence " + std::to_string(s) +
                            ": invalid BILOU sequence at position " + std::to_string(*bad));
    for (std::size_t t = 0; t < ls.tokens.size(); ++t) {
      auto li = model.LabelIndex(ls.gold[t]);
      if (!li)
        throw ValidationError("sentence " + std::to_string(s) + ": label " +
                              ls.gold[t].ToString() + " not in label set");
      gold[s].push_back(*li);
      std::vector<std::size_t> ids;
      for (std::string &f : ExtractFeatures(ls.tokens, t, gazetteers)) {
        auto [it, inserted] = feature_ids.emplace(f, feature_names.size());
        if (inserted) feature_names.push_back(std::move(f));
        ids.push_back(it->second);
      }
      feats[s].push_back(std::move(ids));
    }
  }

  const std::size_t nf = feature_names.size();
  std::vector<double> w(nf * k, 0.0), u(nf * k, 0.0);
  std::vector<double> tw((k + 1) * k, 0.0), tu((k + 1) * k, 0.0);
  double c = 1.0;

  const auto update = [&](std::size_t s, const std::vector<std::size_t> &seq, double sign) {
    std::size_t prev = k;
    for (std::size_t t = 0; t < seq.size(); ++t) {
      for (std::size_t f : feats[s][t]) {
        w[f * k + seq[t]] += sign;
        u[f * k + seq[t]] += sign * c;
      }
      tw[prev * k + seq[t]] += sign;
      tu[prev * k + seq[t]] += sign * c;
      prev = seq[t];
    }
  };

  util::Rng rng(seed);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.Shuffle(order);
    std::size_t mistakes = 0;
    for (std::size_t s : order) {
      std::vector<std::vector<double>> em(feats[s].size(), std::vector<double>(k, 0.0));
      for (std::size_t t = 0; t < feats[s].size(); ++t)
        for (std::size_t f : feats[s][t])
          for (std::size_t l = 0; l < k; ++l) em[t][l] += w[f * k + l];
      auto pred = ViterbiIndexes(labels, em, [&](std::size_t a, std::size_t b) {
        return tw[a * k + b];
      });
      if (pred != gold[s]) {
        for (std::size_t t = 0; t < pred.size(); ++t) mistakes += pred[t] != gold[s][t];
        update(s, gold[s], +1.0);
        update(s, pred, -1.0);
      }
      c += 1.0;
    }
    if (report) report->mistakes_per_epoch.push_back(mistakes);
  }

  for (std::size_t f = 0; f < nf; ++f) {
    for (std::size_t l = 0; l < k; ++l) {
      double avg = w[f * k + l] - u[f * k + l] / c;
      if (avg != 0.0) model.SetFeatureWeight(feature_names[f], l, avg);
    }
  }
  for (std::size_t a = 0; a <= k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      model.SetTransition(a, b, tw[a * k + b] - tu[a * k + b] / c);
  return model;
}

// ---------------------------------------------------------------------------
// Evaluation

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t correct = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
};

inline Prf MakePrf(std::size_t correct, std::size_t predicted, std::size_t gold) {
  Prf p;
  p.correct = correct;
  p.predicted = predicted;
  p.gold = gold;
  p.precision = predicted ? static_cast<double>(correct) / predicted : 0.0;
  p.recall = gold ? static_cast<double>(correct) / gold : 0.0;
  p.f1 = p.precision + p.recall > 0
             ? 2 * p.precision * p.recall / (p.precision + p.recall)
             : 0.0;
  return p;
}

struct SpanEvaluation {
  std::map<EntityType, Prf> per_type;
  // Unweighted mean of per-type precision, recall and F1 over the types that
  // have at least one gold mention.
  Prf macro;
  // Pooled counts over all types.
  Prf micro;
};

using MentionsByDocument = std::map<std::string, std::vector<EntityMention>>;

// Exact-match span evaluation: a prediction is correct iff its token span and
// type equal those of a gold mention. Duplicate mentions count once.
inline SpanEvaluation EvaluateSpans(const MentionsByDocument &gold,
                                    const MentionsByDocument &predicted) {
  if (gold.size() != predicted.size())
    throw ParameterError("gold and predicted cover different documents");
  using Key = std::tuple<std::size_t, std::size_t, EntityType>;
  std::map<EntityType, std::array<std::size_t, 3>> counts;  // correct, pred, gold
  for (const auto &[doc, g] : gold) {
    auto p = predicted.find(doc);
    if (p == predicted.end()) throw ParameterError("document missing from predictions: " + doc);
    std::set<Key> gs, ps;
    for (const auto &m : g) gs.emplace(m.token_start, m.token_end, m.type);
    for (const auto &m : p->second) ps.emplace(m.token_start, m.token_end, m.type);
    for (const Key &key : gs) ++counts[std::get<2>(key)][2];
    for (const Key &key : ps) {
      ++counts[std::get<2>(key)][1];
      if (gs.count(key)) ++counts[std::get<2>(key)][0];
    }
  }
  SpanEvaluation ev;
  std::size_t tc = 0, tp = 0, tg = 0, typed = 0;
  for (const auto &[type, c] : counts) {
    Prf prf = MakePrf(c[0], c[1], c[2]);
    ev.per_type[type] = prf;
    tc += c[0];
    tp += c[1];
    tg += c[2];
    if (c[2] > 0) {
      ++typed;
      ev.macro.precision += prf.precision;
      ev.macro.recall += prf.recall;
      ev.macro.f1 += prf.f1;
    }
  }
  if (typed) {
    ev.macro.precision /= typed;
    ev.macro.recall /= typed;
    ev.macro.f1 /= typed;
  }
  ev.macro.correct = tc;
  ev.macro.predicted = tp;
  ev.macro.gold = tg;
  ev.micro = MakePrf(tc, tp, tg);
  return ev;
}

// ---------------------------------------------------------------------------
// I/O

// Builds tokens for pre-split words, separated by single spaces.
inline std::vector<Token> TokensFromWords(std::span<const std::string> words) {
  std::vector<Token> tokens;
  std::size_t chars = 0, bytes = 0;
  for (const std::string &w : words) {
    Token t;
    t.text = w;
    t.start = chars;
    t.byte_start = bytes;
    chars += util::DecodeUtf8(w).size();
    bytes += w.size();
    t.end = chars;
    t.byte_end = bytes;
    t.shape = ShapeOf(w);
    tokens.push_back(std::move(t));
    ++chars;
    ++bytes;
  }
  return tokens;
}

// Rewrites a BIO sequence as BILOU. Sequences that already use L or U are
// returned unchanged.
inline TagSequence BioToBilou(TagSequence tags) {
  for (const Tag &t : tags)
    if (t.kind == Bilou::kL || t.kind == Bilou::kU) return tags;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    Tag &t = tags[i];
    if (t.kind == Bilou::kO) continue;
    const bool cont_next = i + 1 < tags.size() && tags[i + 1].kind == Bilou::kI &&
                           tags[i + 1].type == t.type;
    const bool cont_prev = t.kind == Bilou::kI && i > 0 && tags[i - 1].kind != Bilou::kO &&
                           tags[i - 1].type == t.type;
    if (!cont_prev && !cont_next) t.kind = Bilou::kU;
    else if (!cont_prev) t.kind = Bilou::kB;
    else if (cont_next) t.kind = Bilou::kI;
    else t.kind = Bilou::kL;
  }
  return tags;
}

// CoNLL-style input: "token<TAB>tag" per line, blank line between sentences.
// Tags may be BIO or BILOU.
inline std::vector<LabeledSentence> ReadConll(std::istream &in) {
  std::vector<LabeledSentence> out;
  std::vector<std::string> words;
  TagSequence tags;
  std::size_t line_no = 0;
  const auto flush = [&] {
    if (words.empty()) return;
    LabeledSentence s;
    s.tokens = TokensFromWords(words);
    s.gold = BioToBilou(std::move(tags));
    out.push_back(std::move(s));
    words.clear();
    tags.clear();
  };
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view v = util::StripCR(line);
    if (v.find_first_not_of(" \t") == std::string_view::npos) {
      flush();
      continue;
    }
    auto tab = v.rfind('\t');
    if (tab == std::string_view::npos || tab == 0)
      throw ParseError("line " + std::to_string(line_no) + ": expected token<TAB>tag", 0);
    auto tag = Tag::Parse(v.substr(tab + 1));
    if (!tag)
      throw ParseError("line " + std::to_string(line_no) + ": bad tag " +
                           std::string(v.substr(tab + 1)),
                       tab + 1);
    words.emplace_back(v.substr(0, tab));
    tags.push_back(*tag);
  }
  flush();
  return out;
}

inline void WriteConll(std::ostream &out, std::span<const LabeledSentence> data) {
  for (const LabeledSentence &s : data) {
    for (std::size_t i = 0; i < s.tokens.size(); ++i)
      out << s.tokens[i].text << '\t' << s.gold[i].ToString() << '\n';
    out << '\n';
  }
}

inline constexpr std::string_view kModelMagic = "chorus-ner-model";
inline constexpr int kModelVersion = 1;

// Flat text format: a version line, the ordered label set, gazetteer phrases,
// then (feature, tag, weight) and (tag, tag, weight) triples with zero weights
// omitted. Gazetteer and weight lines are sorted, so equal models serialize
// to equal bytes.
inline void TaggerModel::Save(std::ostream &out) const {
  out << kModelMagic << '\t' << kModelVersion << '\n';
  for (const Tag &t : labels_) out << "L\t" << t.ToString() << '\n';
  for (const auto &[name, phrases] : gazetteers_.lists)
    for (const std::string &p : phrases) out << "G\t" << name << '\t' << p << '\n';
  std::vector<std::string> lines;
  for (const auto &[f, row] : features_)
    for (std::size_t l = 0; l < labels_.size(); ++l)
      if (row[l] != 0.0)
        lines.push_back("F\t" + f + '\t' + labels_[l].ToString() + '\t' +
                        util::FormatDouble(row[l]));
  for (std::size_t a = 0; a <= labels_.size(); ++a)
    for (std::size_t b = 0; b < labels_.size(); ++b)
      if (double v = Transition(a, b); v != 0.0)
        lines.push_back("T\t" + (a == labels_.size() ? std::string("<s>") : labels_[a].ToString()) +
                        '\t' + labels_[b].ToString() + '\t' + util::FormatDouble(v));
  std::sort(lines.begin(), lines.end());
  for (const std::string &l : lines) out << l << '\n';
}

inline TaggerModel TaggerModel::Load(std::istream &in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty model file", 0);
  auto head = util::Split(util::StripCR(line), '\t');
  if (head.size() != 2 || head[0] != kModelMagic)
    throw ParseError("not a tagger model", 0);
  if (head[1] != std::to_string(kModelVersion))
    throw ValidationError("unsupported tagger model version " + head[1]);

  std::vector<Tag> labels;
  std::vector<std::vector<std::string>> rest;
  while (std::getline(in, line)) {
    auto parts = util::Split(util::StripCR(line), '\t');
    if (parts.size() == 1 && parts[0].empty()) continue;
    if (parts[0] == "L" && parts.size() == 2) {
      auto t = Tag::Parse(parts[1]);
      if (!t) throw ParseError("bad label " + parts[1], 0);
      labels.push_back(*t);
    } else {
      rest.push_back(std::move(parts));
    }
  }
  TaggerModel model(labels);
  const auto label_of = [&](const std::string &s) {
    auto t = Tag::Parse(s);
    auto idx = t ? model.LabelIndex(*t) : std::nullopt;
    if (!idx) throw ValidationError("label not in label set: " + s);
    return *idx;
  };
  const auto weight_of = [](const std::string &s) {
    char *end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || !std::isfinite(v))
      throw ValidationError("bad weight " + s);
    return v;
  };
  for (const auto &p : rest) {
    if (p[0] == "G" && p.size() == 3) {
      model.gazetteers_.Add(p[1], p[2]);
    } else if (p[0] == "F" && p.size() == 4) {
      model.SetFeatureWeight(p[1], label_of(p[2]), weight_of(p[3]));
    } else if (p[0] == "T" && p.size() == 4) {
      std::size_t from = p[1] == "<s>" ? model.start_index() : label_of(p[1]);
      model.SetTransition(from, label_of(p[2]), weight_of(p[3]));
    } else {
      throw ParseError("unrecognized model line", 0);
    }
  }
  return model;
}

}  // namespace ner
}  // namespace chorus
