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

#include <numeric>
#include <sstream>

#include "chorus/sentiment.hpp"
#include "support/synthetic.hpp"

namespace chorus {
namespace sentiment {
namespace {

double Sum(const Probabilities &p) { return p[0] + p[1] + p[2]; }

CnnShape TinyShape() {
  CnnShape s;
  s.vocab_size = 6;
  s.dim = 4;
  s.maps = 2;
  return s;
}

TEST(Vocab, ReservedIdsAndFirstAppearanceOrder) {
  std::vector<std::string> texts = {"b a b", "c a", "d"};
  Vocab v = Vocab::Build(texts, 2);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<pad>", "<unk>", "b", "a"}));
  EXPECT_EQ(v.Id("b"), 2);
  EXPECT_EQ(v.Id("c"), Vocab::kUnknown);
  EXPECT_EQ(v.Encode("A b zzz a", 3), (std::vector<int>{3, 2, 1}));
}

TEST(Forward, ZeroModelIsUniform) {
  SentimentModel m = SentimentModel::Zeros(TinyShape());
  auto fp = Forward(m, std::vector<int>{2, 3});
  for (double p : fp.probs) EXPECT_DOUBLE_EQ(p, 1.0 / 3.0);
  EXPECT_EQ(fp.ids.size(), 5u);  // padded up to the widest filter
}

TEST(Forward, ProbabilitiesAreADistribution) {
  SentimentModel m = SentimentModel::Random(TinyShape(), 4, 1.0);
  util::Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<int> ids;
    for (std::size_t t = rng.Below(12); t > 0; --t) ids.push_back(static_cast<int>(rng.Below(6)));
    auto p = Forward(m, ids).probs;
    EXPECT_NEAR(Sum(p), 1.0, 1e-9);
    for (double x : p) {
      EXPECT_GT(x, 0.0);
      EXPECT_LT(x, 1.0);
    }
  }
  EXPECT_THROW(Forward(m, std::vector<int>{6}), ParameterError);
  EXPECT_THROW(Forward(m, std::vector<int>{-1}), ParameterError);
}

TEST(Forward, RepeatedTokenPoolsToOneWindowValue) {
  // One width-2 filter over d = 2; every window of "x x x x" is identical.
  CnnShape s;
  s.vocab_size = 3;
  s.dim = 2;
  s.maps = 1;
  s.widths = {2};
  SentimentModel m = SentimentModel::Zeros(s);
  m.embedding = {0, 0, 0, 0, 0.5, -1.0};
  m.filters[0] = {1.0, 0.25, 2.0, -0.5};
  m.filter_bias[0][0] = 0.1;
  // 0.1 + (1*0.5 + 0.25*-1) + (2*0.5 + -0.5*-1) = 0.1 + 0.25 + 1.5
  auto fp = Forward(m, std::vector<int>{2, 2, 2, 2});
  EXPECT_DOUBLE_EQ(fp.pooled[0], 1.85);
  EXPECT_EQ(fp.argmax[0], 0u);
}

TEST(Backward, ConfidentCorrectPredictionHasTinyGradient) {
  SentimentModel m = SentimentModel::Random(TinyShape(), 2);
  m.dense_bias = {-40.0, -40.0, 40.0};
  auto fp = Forward(m, std::vector<int>{2, 3, 4});
  Gradients g = Gradients::ZerosLike(m);
  Backward(m, fp, Label::kPositive, g);
  double norm = 0.0;
  for (double x : g.dense) norm += x * x;
  for (double x : g.dense_bias) norm += x * x;
  EXPECT_LT(norm, 1e-30);
}

TEST(Backward, PaddingRowGetsNoGradient) {
  SentimentModel m = SentimentModel::Random(TinyShape(), 3, 1.0);
  for (auto &b : m.filter_bias) std::fill(b.begin(), b.end(), 0.5);
  Gradients g = Gradients::ZerosLike(m);
  Backward(m, Forward(m, std::vector<int>{2}), Label::kNegative, g);
  EXPECT_EQ(g.embedding_rows.count(Vocab::kPad), 0u);
  EXPECT_EQ(g.embedding_rows.count(5), 0u);  // untouched
  EXPECT_EQ(g.embedding_rows.count(2), 1u);
}

TEST(Backward, MatchesFiniteDifferences) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto [model, data] = chorus::testing::GradientCheckFixture(seed);
    auto r = chorus::testing::CheckGradients(model, data, 1e-4, 1e-3);
    EXPECT_EQ(r.failures, 0u) << "seed " << seed << " worst " << r.worst << " rel "
                              << r.max_relative_error;
    EXPECT_GT(r.checked, 500u);
  }
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  SentimentModel m = SentimentModel::Random(TinyShape(), 5);
  SentimentModel before = m;
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.epochs = 2;
  std::vector<Example> data = {{{2, 3}, Label::kNegative}, {{4, 5}, Label::kPositive}};
  auto trace = Train(m, data, cfg);
  EXPECT_EQ(trace.size(), 2u);
  EXPECT_EQ(m, before);
  EXPECT_THROW(Train(m, std::vector<Example>{}, cfg), ParameterError);
  cfg.learning_rate = -1.0;
  EXPECT_THROW(Train(m, data, cfg), ParameterError);
}

TEST(Train, SeparableFixtureIsLearnedDeterministically) {
  auto a = chorus::testing::TrainSeparable(17);
  auto b = chorus::testing::TrainSeparable(17);
  EXPECT_GE(a.train_accuracy, 0.95);
  EXPECT_EQ(a.classifier.model, b.classifier.model);
  EXPECT_EQ(a.classifier.Predict("this was great").label, Label::kPositive);
  EXPECT_EQ(a.classifier.Predict("this was awful").label, Label::kNegative);
}

TEST(Predict, EmptyTextAndComposition) {
  CnnClassifier clf;
  std::vector<std::string> texts = {"good movie", "bad movie"};
  clf.vocab = Vocab::Build(texts);
  CnnShape s = TinyShape();
  s.vocab_size = clf.vocab.size();
  clf.model = SentimentModel::Random(s, 1, 1.0);
  auto empty = clf.Predict("");
  EXPECT_NEAR(Sum(empty.probs), 1.0, 1e-9);
  auto p = clf.Predict("good movie");
  EXPECT_EQ(p.probs, Forward(clf.model, clf.vocab.Encode("good movie", 64)).probs);
}

TEST(Score, FromProbabilities) {
  EXPECT_EQ(ScoreFromProbs({1, 0, 0}), -1.0);
  EXPECT_NEAR(ScoreFromProbs({1.0 / 3, 1.0 / 3, 1.0 / 3}), 0.0, 1e-15);
  EXPECT_NEAR(ScoreFromProbs({0.2, 0.3, 0.5}), 0.3, 1e-15);
  EXPECT_EQ(ScoreFromProbs({0.1, 0.2, 0.7}), -ScoreFromProbs({0.7, 0.2, 0.1}));
  EXPECT_THROW(ScoreFromProbs({0.5, 0.5, 0.5}), ParameterError);
  EXPECT_THROW(ScoreFromProbs({-0.1, 0.6, 0.5}), ParameterError);
}

TEST(Argmax, TiesGoToLowerIndex) {
  EXPECT_EQ(Argmax({0.4, 0.4, 0.2}), Label::kNegative);
  EXPECT_EQ(Argmax({0.2, 0.4, 0.4}), Label::kNeutral);
}

TEST(Evaluate, AverageRecall) {
  // Recalls: negative 1/2, neutral 1/1, positive 3/4.
  std::vector<Label> gold = {Label::kNegative, Label::kNegative, Label::kNeutral, Label::kPositive,
                             Label::kPositive, Label::kPositive, Label::kPositive};
  std::vector<Label> pred = {Label::kNegative, Label::kPositive, Label::kNeutral, Label::kPositive,
                             Label::kPositive, Label::kPositive, Label::kNeutral};
  auto ev = Evaluate(gold, pred);
  EXPECT_NEAR(ev.avg_recall, 0.75, 1e-12);
  EXPECT_EQ(ev.confusion[0][2], 1u);
  EXPECT_NEAR(ev.accuracy, 5.0 / 7.0, 1e-12);

  auto perfect = Evaluate(gold, gold);
  EXPECT_EQ(perfect.avg_recall, 1.0);

  std::vector<Label> only_pos = {Label::kPositive};
  auto partial = Evaluate(only_pos, only_pos);
  EXPECT_TRUE(partial.absent_from_gold[0]);
  EXPECT_NEAR(partial.avg_recall, 1.0 / 3.0, 1e-12);
  EXPECT_THROW(Evaluate(std::vector<Label>{}, std::vector<Label>{}), ParameterError);
}

TEST(Linear, FeaturesAndPrediction) {
  auto f = LinearSentimentModel::Features("Great great movie");
  EXPECT_EQ(f, (std::vector<std::string>{"b:great great", "b:great movie", "u:great", "u:movie"}));
  LinearSentimentModel m;
  m.SetWeight("u:great", Label::kPositive, 3.0);
  auto p = m.Predict("great");
  EXPECT_EQ(p.label, Label::kPositive);
  EXPECT_NEAR(p.probs[2], std::exp(3.0) / (std::exp(3.0) + 2.0), 1e-12);
  EXPECT_EQ(m.Predict("").probs, (Probabilities{1.0 / 3, 1.0 / 3, 1.0 / 3}));
}

TEST(Linear, LearnsSeparableFixture) {
  auto data = chorus::testing::SeparableSentimentCorpus(150, 3);
  LinearSentimentModel m;
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.learning_rate = 0.5;
  m.Train(data, cfg);
  EXPECT_GE(Evaluate(Classifier(m), data).accuracy, 0.95);
}

TEST(ModelIo, CnnAndLinearRoundTrip) {
  CnnClassifier clf;
  std::vector<std::string> texts = {"good movie", "bad movie"};
  clf.vocab = Vocab::Build(texts);
  CnnShape s = TinyShape();
  s.vocab_size = clf.vocab.size();
  clf.model = SentimentModel::Random(s, 8);
  clf.max_tokens = 32;
  std::ostringstream out;
  clf.Save(out);
  std::istringstream in(out.str());
  CnnClassifier back = CnnClassifier::Load(in);
  EXPECT_EQ(back.model, clf.model);
  EXPECT_EQ(back.vocab.tokens(), clf.vocab.tokens());
  EXPECT_EQ(back.max_tokens, 32u);

  std::string corrupt = out.str();
  corrupt.replace(corrupt.find("chorus-sentiment-cnn"), 20, "chorus-sentiment-xyz");
  std::istringstream bad(corrupt);
  EXPECT_THROW(CnnClassifier::Load(bad), ParseError);

  LinearSentimentModel lm;
  lm.SetWeight("u:good", Label::kPositive, 0.5);
  lm.SetBias(Label::kNeutral, 0.25);
  std::ostringstream lo;
  lm.Save(lo);
  std::istringstream li(lo.str());
  std::ostringstream again;
  LinearSentimentModel::Load(li).Save(again);
  EXPECT_EQ(lo.str(), again.str());
}

TEST(Embeddings, LoadsInVocabularyRows) {
  CnnClassifier clf;
  std::vector<std::string> texts = {"good"};
  clf.vocab = Vocab::Build(texts);
  CnnShape s = TinyShape();
  s.vocab_size = clf.vocab.size();
  clf.model = SentimentModel::Zeros(s);
  std::istringstream in("good 1 2 3 4\nbad 1 1 1 1\nGood 1 2\n");
  EXPECT_EQ(LoadEmbeddings(clf, in), 1u);
  EXPECT_EQ(clf.model.embedding[2 * 4 + 3], 4.0);
}

}  // namespace
}  // namespace sentiment
}  // namespace chorus
