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

// chorus: command-line front end. Every subcommand reads the same JSON config
// (--config); anything random takes --seed.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "chorus/analytics.hpp"
#include "chorus/corpus.hpp"
#include "chorus/nel.hpp"
#include "chorus/ner.hpp"
#include "chorus/pipeline.hpp"
#include "chorus/query.hpp"
#include "chorus/sentiment.hpp"
#include "chorus/server.hpp"

namespace {

using namespace chorus;

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;

  pipeline::PipelineConfig Config() const {
    if (config_path.empty()) return {};
    return pipeline::PipelineConfig::Load(config_path);
  }
};

// Snapshot for read-only commands: no models needed, the KB is optional.
std::shared_ptr<const query::Snapshot> LoadSnapshot(const pipeline::PipelineConfig &config) {
  std::shared_ptr<const nel::KnowledgeBase> kb;
  if (!config.kb_dir.empty() && std::filesystem::exists(config.kb_dir))
    kb = std::make_shared<const nel::KnowledgeBase>(nel::KnowledgeBase::LoadDirectory(config.kb_dir));
  auto ann = pipeline::LoadAnnotations(config.store_dir);
  return query::Snapshot::Make(LoadStore(config.store_dir),
                               ann ? std::move(*ann) : pipeline::AnnotationSet{}, std::move(kb),
                               config.smoothing);
}

std::ofstream OpenOut(const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  return out;
}

int Ingest(const Globals &g, const std::string &kind_name, const std::vector<std::string> &inputs) {
  auto config = g.Config();
  auto kind = ParseRecordKind(kind_name);
  if (!kind) throw ParameterError("unknown record kind: " + kind_name);
  CorpusStore store = LoadStore(config.store_dir);
  IngestOptions options{config.date_bounds};
  IngestReport total;
  const auto merge = [&](const IngestReport &r) {
    total.records_read += r.records_read;
    total.records_stored += r.records_stored;
    total.records_rejected += r.records_rejected;
    for (const auto &[k, n] : r.rejection_reasons) total.rejection_reasons[k] += n;
    if (r.io_error) total.io_error = r.io_error;
  };
  if (inputs.empty()) {
    merge(IngestIntoDirectory(std::cin, *kind, store, config.store_dir, options));
  } else {
    for (const std::string &path : inputs) {
      std::ifstream in(path, std::ios::binary);
      if (!in) throw NotFoundError("cannot open " + path);
      merge(IngestIntoDirectory(in, *kind, store, config.store_dir, options));
    }
  }
  std::cout << total.ToJson().dump(2) << "\n";
  return total.io_error ? 1 : 0;
}

// Pages as NDJSON: {"id": ..., "title": ..., "text": "... [[Target|anchor]] ..."}.
int BuildKb(const std::string &pages_path, const std::string &out_dir) {
  std::ifstream in(pages_path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + pages_path);
  std::vector<nel::Page> pages;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (util::StripCR(line).find_first_not_of(" \t") == std::string_view::npos) continue;
    try {
      auto j = nlohmann::json::parse(line);
      pages.push_back({j.at("id").get<std::string>(), j.value("title", j.at("id").get<std::string>()),
                       j.value("text", "")});
    } catch (const nlohmann::json::exception &e) {
      throw ParseError(pages_path + ":" + std::to_string(lineno) + ": " + e.what(), 0);
    }
  }
  nel::KnowledgeBase kb = nel::BuildKnowledgeBase(pages);
  kb.SaveDirectory(out_dir);
  nlohmann::ordered_json j;
  j["entities"] = kb.entities().size();
  j["anchors"] = kb.anchors().size();
  j["total_pages"] = kb.total_pages();
  std::cout << j.dump(2) << "\n";
  return 0;
}

std::vector<ner::LabeledSentence> ReadConllFile(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path);
  return ner::ReadConll(in);
}

ner::MentionsByDocument MentionsOf(const std::vector<ner::LabeledSentence> &data,
                                   const ner::TaggerModel *model) {
  ner::MentionsByDocument out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    TokenizedText tt;
    tt.tokens = data[i].tokens;
    ner::TagSequence tags = model ? ner::ViterbiDecode(*model, tt.tokens) : data[i].gold;
    out[std::to_string(i)] = ner::MentionsFromTags(tt, 0, tags, 0);
  }
  return out;
}

nlohmann::ordered_json PrfJson(const ner::Prf &p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

int TrainNer(const Globals &g, const std::string &train, const std::string &dev, int epochs,
             const std::vector<std::string> &gazetteers, const std::string &out) {
  auto data = ReadConllFile(train);
  ner::Gazetteers gaz;
  for (const std::string &spec : gazetteers) {
    auto eq = spec.find('=');
    if (eq == std::string::npos) throw ParameterError("gazetteer must be NAME=FILE: " + spec);
    std::ifstream in(spec.substr(eq + 1), std::ios::binary);
    if (!in) throw NotFoundError("cannot open " + spec.substr(eq + 1));
    gaz.Load(spec.substr(0, eq), in);
  }
  ner::TrainReport report;
  ner::TaggerModel model =
      ner::TrainPerceptron(data, epochs, g.seed, gaz, ner::DefaultLabelSet(), &report);
  auto os = OpenOut(out);
  model.Save(os);
  nlohmann::ordered_json j;
  j["sentences"] = data.size();
  j["mistakes_per_epoch"] = report.mistakes_per_epoch;
  if (!dev.empty()) {
    auto held = ReadConllFile(dev);
    ner::SpanEvaluation ev = ner::EvaluateSpans(MentionsOf(held, nullptr), MentionsOf(held, &model));
    j["dev"]["macro"] = PrfJson(ev.macro);
    j["dev"]["micro"] = PrfJson(ev.micro);
    for (const auto &[type, prf] : ev.per_type) j["dev"]["per_type"][std::string(ner::TypeName(type))] = PrfJson(prf);
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

std::vector<sentiment::LabeledText> ReadLabeled(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFoundError("cannot open " + path);
  return sentiment::ReadLabeledNdjson(in);
}

struct SentimentOptions {
  std::string train, dev, out, kind = "cnn", embeddings;
  int epochs = 10;
  double lr = 0.01;
  std::size_t batch = 16, dim = 100, maps = 64, max_tokens = 64, min_freq = 1;
};

int TrainSentiment(const Globals &g, const SentimentOptions &o) {
  auto data = ReadLabeled(o.train);
  sentiment::TrainConfig tc;
  tc.learning_rate = o.lr;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch;
  tc.seed = g.seed;
  tc.max_tokens = o.max_tokens;
  sentiment::Classifier clf;
  nlohmann::ordered_json j;
  j["examples"] = data.size();
  if (o.kind == "linear") {
    sentiment::LinearSentimentModel m;
    m.Train(data, tc);
    clf = std::move(m);
  } else if (o.kind == "cnn") {
    std::vector<std::string> texts;
    for (const auto &d : data) texts.push_back(d.text);
    sentiment::CnnClassifier c;
    c.vocab = sentiment::Vocab::Build(texts, o.min_freq);
    c.max_tokens = o.max_tokens;
    sentiment::CnnShape shape;
    shape.vocab_size = c.vocab.size();
    shape.dim = o.dim;
    shape.maps = o.maps;
    c.model = sentiment::SentimentModel::Random(shape, g.seed);
    if (!o.embeddings.empty()) {
      std::ifstream in(o.embeddings, std::ios::binary);
      if (!in) throw NotFoundError("cannot open " + o.embeddings);
      j["pretrained_rows"] = sentiment::LoadEmbeddings(c, in);
    }
    auto examples = sentiment::EncodeAll(c.vocab, data, o.max_tokens);
    j["loss_per_epoch"] = sentiment::Train(c.model, examples, tc);
    clf = std::move(c);
  } else {
    throw ParameterError("--model must be cnn or linear");
  }
  {
    auto os = OpenOut(o.out);
    std::visit([&os](const auto &m) { m.Save(os); }, clf);
  }
  const auto eval_json = [](const sentiment::Evaluation &ev) {
    nlohmann::ordered_json e;
    e["avg_recall"] = ev.avg_recall;
    e["macro_f1"] = ev.macro_f1;
    e["accuracy"] = ev.accuracy;
    return e;
  };
  j["train"] = eval_json(sentiment::Evaluate(clf, data));
  if (!o.dev.empty()) j["dev"] = eval_json(sentiment::Evaluate(clf, ReadLabeled(o.dev)));
  std::cout << j.dump(2) << "\n";
  return 0;
}

int Run(const Globals &g) {
  auto config = g.Config();
  auto models = pipeline::Models::Load(config);
  CorpusStore store = LoadStore(config.store_dir);
  auto r = pipeline::RunPipelineOnDirectory(config, store, models);
  std::cout << r.report.ToJson().dump(2) << "\n";
  return 0;
}

int Serve(const Globals &g, const std::string &host, int port) {
  auto config = g.Config();
  if (!host.empty()) config.host = host;
  if (port >= 0) config.port = port;
  auto service = service::Service::Open(config);
  std::cerr << "listening on " << config.host << ":" << config.port << "\n";
  return service->Listen(config.host, config.port) ? 0 : 1;
}

// `target` is an API path such as "/v1/influencers?metric=h-index-likes&k=5".
int Query(const Globals &g, const std::string &target) {
  auto config = g.Config();
  service::Service svc(config, std::nullopt, LoadSnapshot(config));
  service::Response r = svc.Handle("GET", target);
  (r.status == 200 ? std::cout : std::cerr) << r.body;
  return r.status == 200 ? 0 : 1;
}

int Export(const Globals &g, const std::string &what, const std::string &entity,
           const std::string &out_path) {
  auto config = g.Config();
  auto snap = LoadSnapshot(config);
  std::ostringstream os;
  if (what == "entities" || what == "entity-sites") {
    auto rows = analytics::AggregateEntities(snap->store, snap->view);
    if (what == "entities")
      analytics::WriteEntityCsv(os, rows);
    else
      analytics::WriteEntitySiteCsv(os, rows);
  } else if (what == "users" || what == "correlation") {
    auto report = analytics::UserInfluence(snap->store, &snap->view, 1);
    if (what == "users")
      analytics::WriteUserCsv(os, report.users);
    else
      analytics::WriteCorrelationCsv(os, analytics::CorrelationOf(report.users));
  } else if (what == "series") {
    if (entity.empty()) throw ParameterError("--entity is required for series");
    for (const auto &p : analytics::DailySeries(snap->store, snap->view, entity)) {
      nlohmann::ordered_json j;
      j["day"] = timeutil::FormatDay(p.day);
      j["mean_sentiment"] = p.mean_sentiment;
      j["comment_count"] = p.comment_count;
      j["article_count"] = p.article_count;
      j["std_dev"] = p.std_dev;
      os << j.dump() << "\n";
    }
  } else if (what == "corpus") {
    if (out_path.empty()) throw ParameterError("--out DIR is required for corpus");
    std::filesystem::create_directories(out_path);
    auto dir = std::filesystem::path(out_path);
    auto s = OpenOut((dir / StoreLayout::kSites).string());
    auto a = OpenOut((dir / StoreLayout::kArticles).string());
    auto c = OpenOut((dir / StoreLayout::kComments).string());
    ExportNdjson(snap->store, s, a, c);
    return 0;
  } else {
    throw ParameterError("unknown export: " + what);
  }
  if (out_path.empty()) {
    std::cout << os.str();
  } else {
    auto out = OpenOut(out_path);
    out << os.str();
  }
  return 0;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"chorus: entity-centric comment analytics"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Pipeline config (JSON)");
  app.add_option("--seed", g.seed, "Seed for everything random");

  std::string kind;
  std::vector<std::string> inputs;
  auto *ingest = app.add_subcommand("ingest", "Ingest NDJSON records into the store");
  ingest->add_option("kind", kind, "sites | articles | comments")->required();
  ingest->add_option("files", inputs, "Input files (default: stdin)");

  std::string pages, kb_out;
  auto *build_kb = app.add_subcommand("build-kb", "Build a knowledge base from linked pages");
  build_kb->add_option("--pages", pages, "Pages NDJSON")->required();
  build_kb->add_option("--out", kb_out, "Output directory")->required();

  std::string ner_train, ner_dev, ner_out;
  int ner_epochs = 20;
  std::vector<std::string> gazetteers;
  auto *train_ner = app.add_subcommand("train-ner", "Train the averaged perceptron tagger");
  train_ner->add_option("--train", ner_train, "CoNLL training file")->required();
  train_ner->add_option("--dev", ner_dev, "CoNLL held-out file");
  train_ner->add_option("--epochs", ner_epochs, "Epochs");
  train_ner->add_option("--gazetteer", gazetteers, "NAME=FILE, repeatable");
  train_ner->add_option("--out", ner_out, "Model path")->required();

  SentimentOptions so;
  auto *train_sent = app.add_subcommand("train-sentiment", "Train the sentiment classifier");
  train_sent->add_option("--train", so.train, "Labeled NDJSON")->required();
  train_sent->add_option("--dev", so.dev, "Held-out labeled NDJSON");
  train_sent->add_option("--model", so.kind, "cnn | linear");
  train_sent->add_option("--epochs", so.epochs, "Epochs");
  train_sent->add_option("--lr", so.lr, "Learning rate");
  train_sent->add_option("--batch", so.batch, "Mini-batch size");
  train_sent->add_option("--dim", so.dim, "Embedding dimension");
  train_sent->add_option("--maps", so.maps, "Feature maps per width");
  train_sent->add_option("--max-tokens", so.max_tokens, "Tokens kept per text");
  train_sent->add_option("--min-freq", so.min_freq, "Minimum token frequency");
  train_sent->add_option("--embeddings", so.embeddings, "Pretrained vectors (token v1 ... vd)");
  train_sent->add_option("--out", so.out, "Model path")->required();

  auto *run = app.add_subcommand("run", "Annotate the store (tag, link, score)");

  std::string host;
  int port = -1;
  auto *serve = app.add_subcommand("serve", "Serve the /v1 API");
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--port", port, "Listen port");

  std::string target;
  auto *query = app.add_subcommand("query", "Answer one API GET request, e.g. /v1/stats?bucket=month");
  query->add_option("target", target, "API path with query string")->required();

  std::string what, entity, out_path;
  auto *exp = app.add_subcommand("export", "Export aggregates as CSV/NDJSON or the corpus as NDJSON");
  exp->add_option("what", what, "entities | entity-sites | users | correlation | series | corpus")
      ->required();
  exp->add_option("--entity", entity, "Entity key (series)");
  exp->add_option("--out", out_path, "Output file or directory");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*ingest) return Ingest(g, kind, inputs);
    if (*build_kb) return BuildKb(pages, kb_out);
    if (*train_ner) return TrainNer(g, ner_train, ner_dev, ner_epochs, gazetteers, ner_out);
    if (*train_sent) return TrainSentiment(g, so);
    if (*run) return Run(g);
    if (*serve) return Serve(g, host, port);
    if (*query) return Query(g, target);
    if (*exp) return Export(g, what, entity, out_path);
  } catch (const std::exception &e) {
    std::cerr << "chorus: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
