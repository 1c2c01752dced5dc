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

// Three-class comment sentiment.
//
// The main classifier is a convolutional text model: token embeddings, one
// bank of feature maps per filter width, ReLU, max-over-time pooling, and a
// dense softmax layer, trained with mini-batch SGD on cross-entropy. A
// unigram+bigram logistic model serves as a baseline. Class probabilities are
// mapped to a score in [-1, 1] as P(positive) - P(negative).

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "chorus/common.hpp"
#include "chorus/textproc.hpp"
#include "json.hpp"

namespace chorus {
namespace sentiment {

enum class Label { kNegative = 0, kNeutral = 1, kPositive = 2 };
inline constexpr std::size_t kNumClasses = 3;

inline std::string_view LabelName(Label l) {
  static constexpr std::array<std::string_view, 3> kNames = {"negative", "neutral", "positive"};
  return kNames[static_cast<std::size_t>(l)];
}

inline std::optional<Label> ParseLabel(std::string_view s) {
  for (std::size_t i = 0; i < kNumClasses; ++i)
    if (LabelName(static_cast<Label>(i)) == s) return static_cast<Label>(i);
  return std::nullopt;
}

using Probabilities = std::array<double, kNumClasses>;

// Lowercased tokens of a text.
inline std::vector<std::string> Words(std::string_view text) {
  std::vector<std::string> out;
  for (const Token &t : Tokenize(text).tokens) out.push_back(util::ToLowerUtf8(t.text));
  return out;
}

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnknown = 1;

  Vocab() : tokens_{"<pad>", "<unk>"} {}

  // Ids are assigned in order of first appearance among tokens that occur at
  // least `min_frequency` times.
  static Vocab Build(std::span<const std::string> texts, std::size_t min_frequency = 1) {
    std::unordered_map<std::string, std::size_t> freq;
    std::vector<std::string> order;
    for (const std::string &text : texts)
      for (std::string &w : Words(text))
        if (freq[w]++ == 0) order.push_back(std::move(w));
    Vocab v;
    for (const std::string &w : order)
      if (freq[w] >= min_frequency) v.Add(w);
    return v;
  }

  int Add(const std::string &token) {
    auto [it, inserted] = ids_.emplace(token, static_cast<int>(tokens_.size()));
    if (inserted) tokens_.push_back(token);
    return it->second;
  }

  int Id(const std::string &token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnknown : it->second;
  }

  // Token ids of a text, truncated to max_tokens.
  std::vector<int> Encode(std::string_view text, std::size_t max_tokens) const {
    std::vector<int> ids;
    for (const std::string &w : Words(text)) {
      if (ids.size() >= max_tokens) break;
      ids.push_back(Id(w));
    }
    return ids;
  }

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string> &tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

struct CnnShape {
  std::size_t vocab_size = 2;
  std::size_t dim = 100;
  std::size_t maps = 64;  // feature maps per filter width
  std::vector<std::size_t> widths = {3, 4, 5};

  std::size_t pooled() const { return maps * widths.size(); }
  std::size_t max_width() const {
    return widths.empty() ? 0 : *std::max_element(widths.begin(), widths.end());
  }
  bool operator==(const CnnShape &) const = default;
};

// Parameters of the convolutional classifier. Row 0 of the embedding is the
// padding vector and stays zero.
struct SentimentModel {
  CnnShape shape;
  std::vector<double> embedding;                 // vocab_size x dim
  std::vector<std::vector<double>> filters;      // per width: maps x (h * dim)
  std::vector<std::vector<double>> filter_bias;  // per width: maps
  std::vector<double> dense;                     // pooled x 3
  std::array<double, kNumClasses> dense_bias{};

  static SentimentModel Zeros(const CnnShape &shape) {
    if (shape.vocab_size < 2 || shape.dim == 0 || shape.maps == 0 || shape.widths.empty())
      throw ParameterError("degenerate model shape");
    SentimentModel m;
    m.shape = shape;
    m.embedding.assign(shape.vocab_size * shape.dim, 0.0);
    for (std::size_t h : shape.widths) {
      if (h == 0) throw ParameterError("zero filter width");
      m.filters.emplace_back(shape.maps * h * shape.dim, 0.0);
      m.filter_bias.emplace_back(shape.maps, 0.0);
    }
    m.dense.assign(shape.pooled() * kNumClasses, 0.0);
    return m;
  }

  // Every weight uniform in [-scale, scale]; biases zero; padding row zero.
  static SentimentModel Random(const CnnShape &shape, std::uint64_t seed, double scale = 0.05) {
    SentimentModel m = Zeros(shape);
    util::Rng rng(seed);
    for (std::size_t i = shape.dim; i < m.embedding.size(); ++i)
      m.embedding[i] = rng.Uniform(-scale, scale);
    for (auto &f : m.filters)
      for (double &x : f) x = rng.Uniform(-scale, scale);
    for (double &x : m.dense) x = rng.Uniform(-scale, scale);
    return m;
  }

  const double *Row(int id) const { return embedding.data() + static_cast<std::size_t>(id) * shape.dim; }

  void Validate() const {
    const auto finite = [](std::span<const double> v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    bool ok = embedding.size() == shape.vocab_size * shape.dim &&
              filters.size() == shape.widths.size() &&
              filter_bias.size() == shape.widths.size() &&
              dense.size() == shape.pooled() * kNumClasses;
    for (std::size_t w = 0; ok && w < shape.widths.size(); ++w)
      ok = filters[w].size() == shape.maps * shape.widths[w] * shape.dim &&
           filter_bias[w].size() == shape.maps;
    if (!ok) throw ValidationError("model parameters do not match the declared shape");
    bool fin = finite(embedding) && finite(dense) && finite(dense_bias);
    for (std::size_t w = 0; w < filters.size(); ++w)
      fin = fin && finite(filters[w]) && finite(filter_bias[w]);
    if (!fin) throw ValidationError("non-finite model parameter");
  }

  bool operator==(const SentimentModel &) const = default;
};

// Everything backward() needs from a forward pass.
struct ForwardPass {
  std::vector<int> ids;          // padded input
  std::vector<double> pooled;    // pooled features, width-major
  std::vector<std::size_t> argmax;  // window start of each pooled maximum
  std::vector<double> preact;    // conv value before ReLU at that window
  std::array<double, kNumClasses> logits{};
  Probabilities probs{};
};

inline Probabilities Softmax(const std::array<double, kNumClasses> &z) {
  const double m = *std::max_element(z.begin(), z.end());
  Probabilities p;
  double sum = 0.0;
  for (std::size_t c = 0; c < kNumClasses; ++c) sum += p[c] = std::exp(z[c] - m);
  for (double &x : p) x /= sum;
  return p;
}

// Embeds, convolves every window with every filter, applies ReLU, takes the
// maximum over time per feature map, then the dense layer and softmax. Inputs
// shorter than the widest filter are padded with id 0.
inline ForwardPass Forward(const SentimentModel &model, std::span<const int> token_ids) {
  const CnnShape &s = model.shape;
  ForwardPass fp;
  fp.ids.assign(token_ids.begin(), token_ids.end());
  for (int id : fp.ids)
    if (id < 0 || static_cast<std::size_t>(id) >= s.vocab_size)
      throw ParameterError("token id " + std::to_string(id) + " outside vocabulary");
  if (fp.ids.size() < s.max_width()) fp.ids.resize(s.max_width(), Vocab::kPad);
  const std::size_t n = fp.ids.size();
  const std::size_t d = s.dim;

  fp.pooled.assign(s.pooled(), 0.0);
  fp.argmax.assign(s.pooled(), 0);
  fp.preact.assign(s.pooled(), 0.0);
  for (std::size_t w = 0; w < s.widths.size(); ++w) {
    const std::size_t h = s.widths[w];
    for (std::size_t f = 0; f < s.maps; ++f) {
      const double *kernel = model.filters[w].data() + f * h * d;
      double best = 0.0, best_z = 0.0;
      std::size_t best_pos = 0;
      bool first = true;
      for (std::size_t p = 0; p + h <= n; ++p) {
        double z = model.filter_bias[w][f];
        for (std::size_t j = 0; j < h; ++j) {
          const double *e = model.Row(fp.ids[p + j]);
          const double *k = kernel + j * d;
          for (std::size_t c = 0; c < d; ++c) z += k[c] * e[c];
        }
        double a = z > 0.0 ? z : 0.0;
        if (first || a > best) {
          best = a;
          best_z = z;
          best_pos = p;
          first = false;
        }
      }
      const std::size_t i = w * s.maps + f;
      fp.pooled[i] = best;
      fp.argmax[i] = best_pos;
      fp.preact[i] = best_z;
    }
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    double z = model.dense_bias[c];
    for (std::size_t i = 0; i < fp.pooled.size(); ++i) z += fp.pooled[i] * model.dense[i * kNumClasses + c];
    fp.logits[c] = z;
  }
  fp.probs = Softmax(fp.logits);
  return fp;
}

inline double CrossEntropy(const Probabilities &p, Label gold) {
  return -std::log(std::max(p[static_cast<std::size_t>(gold)], 1e-300));
}

// Loss gradients. Embedding gradients are kept only for rows the input
// touched; the padding row never receives one.
struct Gradients {
  std::map<int, std::vector<double>> embedding_rows;
  std::vector<std::vector<double>> filters;
  std::vector<std::vector<double>> filter_bias;
  std::vector<double> dense;
  std::array<double, kNumClasses> dense_bias{};

  static Gradients ZerosLike(const SentimentModel &m) {
    Gradients g;
    for (std::size_t w = 0; w < m.filters.size(); ++w) {
      g.filters.emplace_back(m.filters[w].size(), 0.0);
      g.filter_bias.emplace_back(m.filter_bias[w].size(), 0.0);
    }
    g.dense.assign(m.dense.size(), 0.0);
    return g;
  }
};

// Accumulates d(cross-entropy)/d(parameter) for one example into `grad`.
inline void Backward(const SentimentModel &model, const ForwardPass &fp, Label gold,
                     Gradients &grad) {
  const CnnShape &s = model.shape;
  const std::size_t d = s.dim;
  std::array<double, kNumClasses> dlogit;
  for (std::size_t c = 0; c < kNumClasses; ++c)
    dlogit[c] = fp.probs[c] - (c == static_cast<std::size_t>(gold) ? 1.0 : 0.0);
  for (std::size_t c = 0; c < kNumClasses; ++c) grad.dense_bias[c] += dlogit[c];

  for (std::size_t i = 0; i < fp.pooled.size(); ++i) {
    double dpool = 0.0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      grad.dense[i * kNumClasses + c] += fp.pooled[i] * dlogit[c];
      dpool += model.dense[i * kNumClasses + c] * dlogit[c];
    }
    // ReLU passes gradient only where the pooled window was active.
    if (fp.preact[i] <= 0.0) continue;
    const std::size_t w = i / s.maps, f = i % s.maps;
    const std::size_t h = s.widths[w];
    const std::size_t p = fp.argmax[i];
    grad.filter_bias[w][f] += dpool;
    const double *kernel = model.filters[w].data() + f * h * d;
    double *gk = grad.filters[w].data() + f * h * d;
    for (std::size_t j = 0; j < h; ++j) {
      const int id = fp.ids[p + j];
      const double *e = model.Row(id);
      for (std::size_t c = 0; c < d; ++c) gk[j * d + c] += dpool * e[c];
      if (id == Vocab::kPad) continue;
      auto &row = grad.embedding_rows[id];
      if (row.empty()) row.assign(d, 0.0);
      for (std::size_t c = 0; c < d; ++c) row[c] += dpool * kernel[j * d + c];
    }
  }
}

// params -= scale * grad
inline void ApplyGradients(SentimentModel &model, const Gradients &g, double scale) {
  for (const auto &[id, row] : g.embedding_rows) {
    double *e = model.embedding.data() + static_cast<std::size_t>(id) * model.shape.dim;
    for (std::size_t c = 0; c < row.size(); ++c) e[c] -= scale * row[c];
  }
  for (std::size_t w = 0; w < g.filters.size(); ++w) {
    for (std::size_t i = 0; i < g.filters[w].size(); ++i) model.filters[w][i] -= scale * g.filters[w][i];
    for (std::size_t i = 0; i < g.filter_bias[w].size(); ++i)
      model.filter_bias[w][i] -= scale * g.filter_bias[w][i];
  }
  for (std::size_t i = 0; i < g.dense.size(); ++i) model.dense[i] -= scale * g.dense[i];
  for (std::size_t c = 0; c < kNumClasses; ++c) model.dense_bias[c] -= scale * g.dense_bias[c];
}

struct TrainConfig {
  double learning_rate = 0.01;
  int epochs = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::size_t max_tokens = 64;

  void Validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
      throw ParameterError("learning rate must be a finite non-negative number");
    if (epochs < 0) throw ParameterError("epochs must be non-negative");
    if (batch_size == 0) throw ParameterError("batch size must be positive");
    if (max_tokens == 0) throw ParameterError("max_tokens must be positive");
  }
};

struct Example {
  std::vector<int> ids;
  Label label = Label::kNeutral;
};

struct LabeledText {
  std::string text;
  Label label = Label::kNeutral;
};

inline std::vector<Example> EncodeAll(const Vocab &vocab, std::span<const LabeledText> data,
                                      std::size_t max_tokens) {
  std::vector<Example> out;
  out.reserve(data.size());
  for (const LabeledText &lt : data) out.push_back({vocab.Encode(lt.text, max_tokens), lt.label});
  return out;
}

// Mini-batch SGD with a fixed learning rate: each batch applies the mean
// gradient of its examples. The example order is reshuffled every epoch from
// `config.seed`. Returns the mean training loss of every epoch.
inline std::vector<double> Train(SentimentModel &model, std::span<const Example> data,
                                 const TrainConfig &config) {
  config.Validate();
  if (data.empty()) throw ParameterError("no training data");
  model.Validate();
  util::Rng rng(config.seed);
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> trace;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.Shuffle(order);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      Gradients g = Gradients::ZerosLike(model);
      for (std::size_t k = start; k < end; ++k) {
        const Example &ex = data[order[k]];
        std::span<const int> ids(ex.ids);
        if (ids.size() > config.max_tokens) ids = ids.first(config.max_tokens);
        ForwardPass fp = Forward(model, ids);
        double loss = CrossEntropy(fp.probs, ex.label);
        if (!std::isfinite(loss) || !std::isfinite(fp.logits[0] + fp.logits[1] + fp.logits[2]))
          throw Error("non-finite loss at epoch " + std::to_string(epoch) + ", example " +
                      std::to_string(order[k]) + "; lower the learning rate");
        total += loss;
        Backward(model, fp, ex.label, g);
      }
      ApplyGradients(model, g, config.learning_rate / static_cast<double>(end - start));
    }
    trace.push_back(total / static_cast<double>(data.size()));
  }
  return trace;
}

// Index of the largest probability; ties go to the lower class index.
inline Label Argmax(const Probabilities &p) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c)
    if (p[c] > p[best]) best = c;
  return static_cast<Label>(best);
}

struct Prediction {
  Label label = Label::kNeutral;
  Probabilities probs{};
};

// P(positive) - P(negative). The input must be a distribution: entries in
// [0, 1] summing to 1 within 1e-6.
inline double ScoreFromProbs(const Probabilities &p) {
  double sum = 0.0;
  for (double x : p) {
    if (!(x >= 0.0 && x <= 1.0)) throw ParameterError("probability outside [0,1]");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ParameterError("probabilities do not sum to 1");
  return p[static_cast<std::size_t>(Label::kPositive)] - p[static_cast<std::size_t>(Label::kNegative)];
}

// Vocabulary and CNN parameters together.
struct CnnClassifier {
  Vocab vocab;
  SentimentModel model;
  std::size_t max_tokens = 64;

  Prediction Predict(std::string_view text) const {
    ForwardPass fp = Forward(model, vocab.Encode(text, max_tokens));
    return {Argmax(fp.probs), fp.probs};
  }

  void Save(std::ostream &out) const;
  static CnnClassifier Load(std::istream &in);
};

// Reads "token v1 ... vd" lines and copies vectors of in-vocabulary tokens
// into the embedding. Returns the number of rows set.
inline std::size_t LoadEmbeddings(CnnClassifier &clf, std::istream &in) {
  std::size_t set = 0;
  std::string line;
  const std::size_t d = clf.model.shape.dim;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    std::vector<double> v;
    double x;
    while (ls >> x) v.push_back(x);
    if (v.size() != d) continue;
    int id = clf.vocab.Id(util::ToLowerUtf8(token));
    if (id == Vocab::kUnknown || id == Vocab::kPad) continue;
    std::copy(v.begin(), v.end(), clf.model.embedding.begin() + static_cast<std::size_t>(id) * d);
    ++set;
  }
  return set;
}

// ---------------------------------------------------------------------------
// Linear baseline

// One-vs-rest logistic regression over unigram and bigram presence features.
// Probabilities are the softmax of the three per-class logits.
class LinearSentimentModel {
 public:
  static std::vector<std::string> Features(std::string_view text) {
    std::vector<std::string> words = Words(text);
    std::vector<std::string> f;
    for (std::size_t i = 0; i < words.size(); ++i) {
      f.push_back("u:" + words[i]);
      if (i + 1 < words.size()) f.push_back("b:" + words[i] + ' ' + words[i + 1]);
    }
    std::sort(f.begin(), f.end());
    f.erase(std::unique(f.begin(), f.end()), f.end());
    return f;
  }

  std::array<double, kNumClasses> Logits(std::span<const std::string> features) const {
    std::array<double, kNumClasses> z = bias_;
    for (const std::string &f : features) {
      auto it = weights_.find(f);
      if (it == weights_.end()) continue;
      for (std::size_t c = 0; c < kNumClasses; ++c) z[c] += it->second[c];
    }
    return z;
  }

  Prediction Predict(std::string_view text) const {
    auto p = Softmax(Logits(Features(text)));
    return {Argmax(p), p};
  }

  void Train(std::span<const LabeledText> data, const TrainConfig &config) {
    config.Validate();
    if (data.empty()) throw ParameterError("no training data");
    std::vector<std::vector<std::string>> feats;
    for (const LabeledText &lt : data) feats.push_back(Features(lt.text));
    util::Rng rng(config.seed);
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      rng.Shuffle(order);
      for (std::size_t i : order) {
        auto z = Logits(feats[i]);
        for (std::size_t c = 0; c < kNumClasses; ++c) {
          double y = static_cast<std::size_t>(data[i].label) == c ? 1.0 : 0.0;
          double g = 1.0 / (1.0 + std::exp(-z[c])) - y;
          bias_[c] -= config.learning_rate * g;
          for (const std::string &f : feats[i]) weights_[f][c] -= config.learning_rate * g;
        }
      }
    }
  }

  void SetWeight(const std::string &feature, Label l, double w) {
    weights_[feature][static_cast<std::size_t>(l)] = w;
  }
  void SetBias(Label l, double b) { bias_[static_cast<std::size_t>(l)] = b; }

  void Save(std::ostream &out) const;
  static LinearSentimentModel Load(std::istream &in);

 private:
  std::map<std::string, std::array<double, kNumClasses>> weights_;
  std::array<double, kNumClasses> bias_{};
};

// Either model behind one prediction call.
using Classifier = std::variant<CnnClassifier, LinearSentimentModel>;

inline Prediction Predict(const Classifier &clf, std::string_view text) {
  return std::visit([&](const auto &m) { return m.Predict(text); }, clf);
}

// ---------------------------------------------------------------------------
// Evaluation

struct Evaluation {
  double accuracy = 0.0;
  double avg_recall = 0.0;
  double macro_precision = 0.0;
  double macro_f1 = 0.0;
  std::array<double, kNumClasses> recall{};
  std::array<double, kNumClasses> precision{};
  std::array<double, kNumClasses> f1{};
  // confusion[gold][predicted]
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};
  // Classes with no gold example; their recall is reported as 0.
  std::array<bool, kNumClasses> absent_from_gold{};
};

inline Evaluation Evaluate(std::span<const Label> gold, std::span<const Label> predicted) {
  if (gold.empty()) throw ParameterError("empty test set");
  if (gold.size() != predicted.size()) throw ParameterError("gold/predicted length mismatch");
  Evaluation ev;
  for (std::size_t i = 0; i < gold.size(); ++i)
    ++ev.confusion[static_cast<std::size_t>(gold[i])][static_cast<std::size_t>(predicted[i])];
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::size_t tp = ev.confusion[c][c], g = 0, p = 0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      g += ev.confusion[c][k];
      p += ev.confusion[k][c];
    }
    ev.absent_from_gold[c] = g == 0;
    ev.recall[c] = g ? static_cast<double>(tp) / g : 0.0;
    ev.precision[c] = p ? static_cast<double>(tp) / p : 0.0;
    double s = ev.recall[c] + ev.precision[c];
    ev.f1[c] = s > 0 ? 2 * ev.recall[c] * ev.precision[c] / s : 0.0;
  }
  std::size_t correct = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) correct += ev.confusion[c][c];
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    ev.avg_recall += ev.recall[c] / kNumClasses;
    ev.macro_precision += ev.precision[c] / kNumClasses;
    ev.macro_f1 += ev.f1[c] / kNumClasses;
  }
  return ev;
}

inline Evaluation Evaluate(const Classifier &clf, std::span<const LabeledText> test) {
  std::vector<Label> gold, pred;
  for (const LabeledText &lt : test) {
    gold.push_back(lt.label);
    pred.push_back(Predict(clf, lt.text).label);
  }
  return Evaluate(gold, pred);
}

// ---------------------------------------------------------------------------
// I/O

// NDJSON lines {"text": ..., "label": "negative|neutral|positive"}.
inline std::vector<LabeledText> ReadLabeledNdjson(std::istream &in) {
  std::vector<LabeledText> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view v = util::StripCR(line);
    if (v.find_first_not_of(" \t") == std::string_view::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(v);
    } catch (const nlohmann::json::parse_error &e) {
      throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), e.byte);
    }
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) throw SchemaError("text");
    if (!j.contains("label") || !j["label"].is_string()) throw SchemaError("label");
    auto label = ParseLabel(j["label"].get<std::string>());
    if (!label) throw ValidationError("line " + std::to_string(line_no) + ": unknown label");
    out.push_back({j["text"].get<std::string>(), *label});
  }
  return out;
}


inline constexpr std::string_view kCnnMagic = "chorus-sentiment-cnn";
inline constexpr std::string_view kLinearMagic = "chorus-sentiment-linear";
inline constexpr int kFormatVersion = 1;

namespace internal {

inline void WriteRow(std::ostream &out, std::span<const double> v) {
  for (std::size_t i = 0; i < v.size(); ++i) out << (i ? " " : "") << util::FormatDouble(v[i]);
  out << '\n';
}

inline std::vector<double> ReadRow(std::istream &in, std::size_t expected, const char *what) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(std::string("truncated model: ") + what, 0);
  std::vector<double> v;
  std::istringstream ls(line);
  std::string tok;
  while (ls >> tok) {
    char *end = nullptr;
    double x = std::strtod(tok.c_str(), &end);
    if (*end != '\0' || !std::isfinite(x)) throw ValidationError(std::string("bad value in ") + what);
    v.push_back(x);
  }
  if (v.size() != expected)
    throw ValidationError(std::string("shape mismatch in ") + what + ": expected " +
                          std::to_string(expected) + " values, got " + std::to_string(v.size()));
  return v;
}

inline std::string ReadHeader(std::istream &in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty model file", 0);
  return std::string(util::StripCR(line));
}

}  // namespace internal

// Text container: magic + version, a dimensions line, the vocabulary (one
// token per line), then every parameter block row by row.
inline void CnnClassifier::Save(std::ostream &out) const {
  const CnnShape &s = model.shape;
  out << kCnnMagic << ' ' << kFormatVersion << '\n';
  out << "dims " << s.vocab_size << ' ' << s.dim << ' ' << s.maps << ' ' << max_tokens << ' '
      << s.widths.size();
  for (std::size_t h : s.widths) out << ' ' << h;
  out << '\n';
  for (const std::string &t : vocab.tokens()) out << t << '\n';
  for (std::size_t v = 0; v < s.vocab_size; ++v)
    internal::WriteRow(out, std::span<const double>(model.embedding).subspan(v * s.dim, s.dim));
  for (std::size_t w = 0; w < s.widths.size(); ++w) {
    const std::size_t row = s.widths[w] * s.dim;
    for (std::size_t f = 0; f < s.maps; ++f)
      internal::WriteRow(out, std::span<const double>(model.filters[w]).subspan(f * row, row));
    internal::WriteRow(out, model.filter_bias[w]);
  }
  for (std::size_t i = 0; i < s.pooled(); ++i)
    internal::WriteRow(out, std::span<const double>(model.dense).subspan(i * kNumClasses, kNumClasses));
  internal::WriteRow(out, model.dense_bias);
}

inline CnnClassifier CnnClassifier::Load(std::istream &in) {
  std::string head = internal::ReadHeader(in);
  if (head != std::string(kCnnMagic) + ' ' + std::to_string(kFormatVersion))
    throw ParseError("not a CNN sentiment model (version " + std::to_string(kFormatVersion) + ")", 0);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing dims line", 0);
  std::istringstream dims(line);
  std::string tag;
  CnnShape s;
  std::size_t nw = 0;
  CnnClassifier clf;
  dims >> tag >> s.vocab_size >> s.dim >> s.maps >> clf.max_tokens >> nw;
  if (!dims || tag != "dims" || nw == 0 || nw > 16) throw ValidationError("bad dims line");
  s.widths.resize(nw);
  for (std::size_t &h : s.widths)
    if (!(dims >> h) || h == 0) throw ValidationError("bad filter width");
  if (s.vocab_size < 2 || s.dim == 0 || s.maps == 0 || clf.max_tokens == 0)
    throw ValidationError("bad dims line");

  std::vector<std::string> tokens;
  for (std::size_t v = 0; v < s.vocab_size; ++v) {
    if (!std::getline(in, line)) throw ParseError("truncated vocabulary", 0);
    tokens.emplace_back(util::StripCR(line));
  }
  if (tokens[0] != "<pad>" || tokens[1] != "<unk>") throw ValidationError("reserved vocabulary ids corrupted");
  for (std::size_t v = 2; v < tokens.size(); ++v)
    if (clf.vocab.Add(tokens[v]) != static_cast<int>(v)) throw ValidationError("duplicate vocabulary token");

  SentimentModel m = SentimentModel::Zeros(s);
  for (std::size_t v = 0; v < s.vocab_size; ++v) {
    auto row = internal::ReadRow(in, s.dim, "embedding");
    std::copy(row.begin(), row.end(), m.embedding.begin() + v * s.dim);
  }
  if (std::any_of(m.embedding.begin(), m.embedding.begin() + s.dim, [](double x) { return x != 0.0; }))
    throw ValidationError("padding embedding must be zero");
  for (std::size_t w = 0; w < s.widths.size(); ++w) {
    const std::size_t row = s.widths[w] * s.dim;
    for (std::size_t f = 0; f < s.maps; ++f) {
      auto r = internal::ReadRow(in, row, "filters");
      std::copy(r.begin(), r.end(), m.filters[w].begin() + f * row);
    }
    m.filter_bias[w] = internal::ReadRow(in, s.maps, "filter bias");
  }
  for (std::size_t i = 0; i < s.pooled(); ++i) {
    auto r = internal::ReadRow(in, kNumClasses, "dense");
    std::copy(r.begin(), r.end(), m.dense.begin() + i * kNumClasses);
  }
  auto b = internal::ReadRow(in, kNumClasses, "dense bias");
  std::copy(b.begin(), b.end(), m.dense_bias.begin());
  m.Validate();
  clf.model = std::move(m);
  return clf;
}

// Text container: magic + version, a bias line, then one
// "feature<TAB>w_neg w_neu w_pos" line per feature in sorted order.
inline void LinearSentimentModel::Save(std::ostream &out) const {
  out << kLinearMagic << ' ' << kFormatVersion << '\n';
  out << "bias\t";
  internal::WriteRow(out, bias_);
  for (const auto &[f, w] : weights_) {
    out << f << '\t';
    internal::WriteRow(out, w);
  }
}

inline LinearSentimentModel LinearSentimentModel::Load(std::istream &in) {
  std::string head = internal::ReadHeader(in);
  if (head != std::string(kLinearMagic) + ' ' + std::to_string(kFormatVersion))
    throw ParseError("not a linear sentiment model", 0);
  LinearSentimentModel m;
  std::string line;
  bool saw_bias = false;
  while (std::getline(in, line)) {
    std::string_view v = util::StripCR(line);
    if (v.empty()) continue;
    auto tab = v.find('\t');
    if (tab == std::string_view::npos) throw ParseError("expected feature<TAB>weights", 0);
    std::istringstream rest{std::string(v.substr(tab + 1))};
    auto w = internal::ReadRow(rest, kNumClasses, "linear weights");
    std::array<double, kNumClasses> arr{w[0], w[1], w[2]};
    if (v.substr(0, tab) == "bias") {
      m.bias_ = arr;
      saw_bias = true;
    } else {
      m.weights_[std::string(v.substr(0, tab))] = arr;
    }
  }
  if (!saw_bias) throw ValidationError("linear model without bias line");
  return m;
}

// Loads either model kind, dispatching on the header line.
inline Classifier LoadClassifier(const std::string &path) {
  std::string data = util::ReadFile(path);
  std::istringstream in(data);
  if (data.rfind(kCnnMagic, 0) == 0) return CnnClassifier::Load(in);
  if (data.rfind(kLinearMagic, 0) == 0) return LinearSentimentModel::Load(in);
  throw ParseError("unrecognized sentiment model: " + path, 0);
}

}  // namespace sentiment
}  // namespace chorus
