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

// Generated fixtures and brute-force oracles shared by the unit tests and the
// acceptance binary.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "chorus/common.hpp"
#include "chorus/ner.hpp"
#include "chorus/sentiment.hpp"

namespace chorus {
namespace testing {

// ---------------------------------------------------------------------------
// NER: a corpus in which every token's identity determines its tag.

struct NameLexicon {
  ner::EntityType type;
  std::vector<std::string> unit;   // U-
  std::vector<std::string> begin;  // B-
  std::vector<std::string> inside; // I- (three-token names only)
  std::vector<std::string> last;   // L-
};

inline std::vector<NameLexicon> SyntheticLexicon() {
  using ner::EntityType;
  return {
      {EntityType::kPerson, {"Obama", "Merkel", "Macron", "Putin", "Trudeau"},
       {"Angela", "Boris", "Donald", "Jean"}, {"Claude"}, {"Johnson", "Trump", "Juncker", "Corbyn"}},
      {EntityType::kOrg, {"Google", "Tesla", "Siemens", "Nokia", "Airbus"},
       {"Deutsche", "Goldman"}, {}, {"Bank", "Sachs"}},
      {EntityType::kGpe, {"London", "Berlin", "Paris", "Madrid", "Ljubljana"},
       {"New", "Los", "San"}, {}, {"York", "Angeles", "Francisco"}},
      {EntityType::kProduct, {"iPhone", "Kindle", "Galaxy", "Prius"}, {}, {}, {}},
      {EntityType::kEvent, {"Brexit", "Olympics", "Eurovision"}, {"World"}, {}, {"Cup"}},
  };
}

inline const std::vector<std::string> &FillerWords() {
  static const std::vector<std::string> kWords = {
      "the",   "said",   "on",     "a",       "in",        "after",     "report",
      "shares", "talks", "visited", "met",    "with",      "and",       "about",
      "today", "fans",   "praised", "criticized", "announced", "week",  "of"};
  return kWords;
}

template <typename T>
const T &Pick(util::Rng &rng, const std::vector<T> &v) {
  return v[rng.Below(v.size())];
}

inline std::vector<ner::LabeledSentence> SyntheticNerCorpus(std::size_t sentences,
                                                           std::uint64_t seed) {
  using ner::Bilou;
  using ner::Tag;
  util::Rng rng(seed);
  const auto lex = SyntheticLexicon();
  std::vector<ner::LabeledSentence> out;
  for (std::size_t s = 0; s < sentences; ++s) {
    std::vector<std::string> words;
    ner::TagSequence tags;
    const std::size_t entities = 1 + rng.Below(3);
    for (std::size_t e = 0; e < entities; ++e) {
      for (std::size_t f = rng.Below(3); f > 0; --f) {
        words.push_back(Pick(rng, FillerWords()));
        tags.push_back(Tag::O());
      }
      const NameLexicon &nl = lex[rng.Below(lex.size())];
      const bool multi = !nl.begin.empty() && rng.Below(2) == 1;
      if (!multi) {
        words.push_back(Pick(rng, nl.unit));
        tags.push_back(Tag::Of(Bilou::kU, nl.type));
        continue;
      }
      words.push_back(Pick(rng, nl.begin));
      tags.push_back(Tag::Of(Bilou::kB, nl.type));
      if (!nl.inside.empty() && rng.Below(3) == 0) {
        words.push_back(Pick(rng, nl.inside));
        tags.push_back(Tag::Of(Bilou::kI, nl.type));
      }
      words.push_back(Pick(rng, nl.last));
      tags.push_back(Tag::Of(Bilou::kL, nl.type));
    }
    for (std::size_t f = rng.Below(3); f > 0; --f) {
      words.push_back(Pick(rng, FillerWords()));
      tags.push_back(Tag::O());
    }
    words.push_back(".");
    tags.push_back(Tag::O());
    out.push_back({ner::TokensFromWords(words), std::move(tags)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Viterbi oracle: enumerate every label sequence in lexicographic order and
// keep the first one with the strictly best forward-summed score.

struct EnumerationResult {
  std::vector<std::size_t> best;  // empty when no sequence is valid
  double score = -std::numeric_limits<double>::infinity();
};

inline EnumerationResult EnumerateBest(const ner::TaggerModel &model,
                                       std::span<const Token> sentence) {
  const std::size_t n = sentence.size(), k = model.num_labels();
  const auto em = model.Emissions(sentence);
  EnumerationResult r;
  std::vector<std::size_t> seq(n, 0);
  while (true) {
    ner::TagSequence tags;
    for (std::size_t i : seq) tags.push_back(model.labels()[i]);
    if (ner::IsValid(tags)) {
      double s = 0.0;
      std::size_t prev = model.start_index();
      for (std::size_t t = 0; t < n; ++t) {
        s += model.Transition(prev, seq[t]) + em[t][seq[t]];
        prev = seq[t];
      }
      if (r.best.empty() || s > r.score) {
        r.best = seq;
        r.score = s;
      }
    }
    std::size_t pos = n;
    while (pos > 0 && seq[pos - 1] + 1 == k) seq[--pos] = 0;
    if (pos == 0) break;
    ++seq[pos - 1];
  }
  return r;
}

// A random model over a random label subset that always contains O, with one
// emission feature per (token, label). Integer weights in [-3, 3] when
// `integer_weights`, giving many exact ties.
struct RandomTaggingProblem {
  ner::TaggerModel model;
  std::vector<Token> sentence;
};

inline RandomTaggingProblem MakeRandomTaggingProblem(util::Rng &rng, std::size_t max_len,
                                                     std::size_t max_labels, bool integer_weights) {
  std::vector<ner::Tag> all = ner::DefaultLabelSet();
  std::vector<ner::Tag> labels = {ner::Tag::O()};
  // Favour one or two types so that B/I/L chains are actually reachable.
  const ner::EntityType t1 = ner::kEntityTypes[rng.Below(ner::kEntityTypes.size())];
  const ner::EntityType t2 = ner::kEntityTypes[rng.Below(ner::kEntityTypes.size())];
  const std::size_t want = 1 + rng.Below(max_labels);
  std::size_t guard = 0;
  while (labels.size() < want && guard++ < 1000) {
    ner::Tag cand = all[1 + rng.Below(all.size() - 1)];
    if (rng.Below(4) != 0) cand.type = rng.Below(2) ? t1 : t2;
    if (std::find(labels.begin(), labels.end(), cand) == labels.end()) labels.push_back(cand);
  }
  // Shuffle the label order too: tie-breaking follows the label set, not O.
  rng.Shuffle(labels);
  RandomTaggingProblem p{ner::TaggerModel(labels), {}};
  const auto weight = [&] {
    return integer_weights ? static_cast<double>(static_cast<int>(rng.Below(7)) - 3)
                           : rng.Uniform(-2.0, 2.0);
  };
  const std::size_t n = 1 + rng.Below(max_len);
  std::vector<std::string> words;
  for (std::size_t i = 0; i < n; ++i) words.push_back("t" + std::to_string(rng.Below(4)));
  p.sentence = ner::TokensFromWords(words);
  for (std::size_t w = 0; w < 4; ++w)
    for (std::size_t l = 0; l < labels.size(); ++l)
      p.model.SetFeatureWeight("w=t" + std::to_string(w), l, weight());
  for (std::size_t a = 0; a <= labels.size(); ++a)
    for (std::size_t b = 0; b < labels.size(); ++b) p.model.SetTransition(a, b, weight());
  return p;
}

// ---------------------------------------------------------------------------
// Sentiment: texts whose label is determined by class keywords.

inline std::vector<sentiment::LabeledText> SeparableSentimentCorpus(std::size_t n,
                                                                   std::uint64_t seed) {
  static const std::vector<std::string> kPos = {"great", "love", "excellent", "wonderful", "happy",
                                                "superb", "brilliant", "enjoy", "fantastic", "nice"};
  static const std::vector<std::string> kNeg = {"awful", "hate", "terrible", "horrible", "sad",
                                                "worst", "disgusting", "angry", "poor", "ugly"};
  static const std::vector<std::string> kNeu = {"maybe", "perhaps", "neutral", "unsure", "average",
                                                "okay", "whatever", "fine", "meh", "so-so"};
  static const std::vector<std::string> kFiller = {
      "the", "this", "was", "is", "a", "article", "comment", "news", "i", "it",
      "they", "about", "on", "story", "people", "really", "very", "and", "of", "today"};
  util::Rng rng(seed);
  std::vector<sentiment::LabeledText> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto label = static_cast<sentiment::Label>(i % sentiment::kNumClasses);
    const auto &pool = label == sentiment::Label::kPositive   ? kPos
                       : label == sentiment::Label::kNegative ? kNeg
                                                              : kNeu;
    std::vector<std::string> words;
    const std::size_t len = 4 + rng.Below(7);
    for (std::size_t w = 0; w < len; ++w) words.push_back(Pick(rng, kFiller));
    for (std::size_t k = 1 + rng.Below(2); k > 0; --k)
      words[rng.Below(words.size())] = Pick(rng, pool);
    std::string text;
    for (const auto &w : words) text += (text.empty() ? "" : " ") + w;
    out.push_back({text, label});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Central finite differences against Backward() for every trainable parameter
// of a CNN. The padding embedding row is frozen and skipped.

struct GradientCheckResult {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double max_relative_error = 0.0;
  std::string worst;  // parameter name of the largest error
};

inline GradientCheckResult CheckGradients(sentiment::SentimentModel model,
                                          const std::vector<sentiment::Example> &data,
                                          double step, double tolerance) {
  using namespace sentiment;
  const auto loss = [&](const SentimentModel &m) {
    double l = 0.0;
    for (const Example &ex : data) l += CrossEntropy(Forward(m, ex.ids).probs, ex.label);
    return l;
  };
  Gradients g = Gradients::ZerosLike(model);
  for (const Example &ex : data) Backward(model, Forward(model, ex.ids), ex.label, g);

  GradientCheckResult r;
  const auto check = [&](double &param, double analytic, const std::string &name) {
    const double saved = param;
    param = saved + step;
    const double up = loss(model);
    param = saved - step;
    const double down = loss(model);
    param = saved;
    const double numeric = (up - down) / (2 * step);
    // Gradients below 1e-7 in magnitude are compared on that absolute scale.
    const double rel =
        std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-7});
    ++r.checked;
    if (rel > tolerance) ++r.failures;
    if (rel > r.max_relative_error) {
      r.max_relative_error = rel;
      r.worst = name;
    }
  };
  const std::size_t d = model.shape.dim;
  for (std::size_t row = 1; row < model.shape.vocab_size; ++row) {
    auto it = g.embedding_rows.find(static_cast<int>(row));
    for (std::size_t c = 0; c < d; ++c)
      check(model.embedding[row * d + c], it == g.embedding_rows.end() ? 0.0 : it->second[c],
            "embedding[" + std::to_string(row) + "," + std::to_string(c) + "]");
  }
  for (std::size_t w = 0; w < model.filters.size(); ++w) {
    for (std::size_t i = 0; i < model.filters[w].size(); ++i)
      check(model.filters[w][i], g.filters[w][i],
            "filter" + std::to_string(w) + "[" + std::to_string(i) + "]");
    for (std::size_t i = 0; i < model.filter_bias[w].size(); ++i)
      check(model.filter_bias[w][i], g.filter_bias[w][i],
            "filter_bias" + std::to_string(w) + "[" + std::to_string(i) + "]");
  }
  for (std::size_t i = 0; i < model.dense.size(); ++i)
    check(model.dense[i], g.dense[i], "dense[" + std::to_string(i) + "]");
  for (std::size_t c = 0; c < kNumClasses; ++c)
    check(model.dense_bias[c], g.dense_bias[c], "dense_bias[" + std::to_string(c) + "]");
  return r;
}

// The small model and inputs used for gradient checks: |V| = 20, d = 8, four
// maps per width, biases nonzero so that ReLU kinks sit away from zero, and
// inputs at least as long as the widest filter so no padding window exists.
inline std::pair<sentiment::SentimentModel, std::vector<sentiment::Example>> GradientCheckFixture(
    std::uint64_t seed) {
  using namespace sentiment;
  CnnShape shape;
  shape.vocab_size = 20;
  shape.dim = 8;
  shape.maps = 4;
  SentimentModel m = SentimentModel::Random(shape, seed, 0.5);
  util::Rng rng(seed + 1);
  for (auto &b : m.filter_bias)
    for (double &x : b) x = rng.Uniform(-0.2, 0.2);
  for (double &x : m.dense_bias) x = rng.Uniform(-0.2, 0.2);
  std::vector<Example> data;
  for (std::size_t i = 0; i < 6; ++i) {
    Example ex;
    for (std::size_t t = 5 + rng.Below(5); t > 0; --t)
      ex.ids.push_back(static_cast<int>(1 + rng.Below(shape.vocab_size - 1)));
    ex.label = static_cast<Label>(i % kNumClasses);
    data.push_back(std::move(ex));
  }
  return {std::move(m), std::move(data)};
}

// Trains a CNN on the separable fixture; used for the accuracy and
// determinism checks.
struct SeparableRun {
  sentiment::CnnClassifier classifier;
  double train_accuracy = 0.0;
};

inline SeparableRun TrainSeparable(std::uint64_t seed, int epochs = 30) {
  using namespace sentiment;
  auto data = SeparableSentimentCorpus(300, 99);
  std::vector<std::string> texts;
  for (const auto &lt : data) texts.push_back(lt.text);
  SeparableRun run;
  run.classifier.vocab = Vocab::Build(texts);
  CnnShape shape;
  shape.vocab_size = run.classifier.vocab.size();
  shape.dim = 32;
  run.classifier.model = SentimentModel::Random(shape, seed);
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.seed = seed;
  cfg.learning_rate = 0.1;
  cfg.batch_size = 8;
  auto examples = EncodeAll(run.classifier.vocab, data, cfg.max_tokens);
  Train(run.classifier.model, examples, cfg);
  run.train_accuracy = Evaluate(Classifier(run.classifier), data).accuracy;
  return run;
}

}  // namespace testing
}  // namespace chorus
