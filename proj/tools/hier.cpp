// Copyright 2026 The HIER Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// hier: command-line front end for clustering, relation scoring, reasoning,
// training and evaluation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "hier/hier.hpp"

namespace {

using nlohmann::json;

// Writes JSON Lines to a file, or to stdout when the path is empty or "-".
class LineSink {
 public:
  explicit LineSink(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw hier::InvalidArgument("cannot open " + path + " for writing");
    }
  }
  void write(const json& j) { out() << j.dump() << '\n'; }

 private:
  std::ostream& out() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }
  std::ofstream file_;
};

std::vector<double> rows_of(const hier::Tensor& t, std::size_t r) {
  auto v = t.row_values(r);
  return {v.begin(), v.end()};
}

json matrix_json(const hier::Tensor& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.rows(); ++r) rows.push_back(rows_of(t, r));
  return rows;
}

// Settings used when a command runs without --config: a 16-wide synthetic task.
hier::Config desk_config() {
  hier::Config c;
  c.d = 16;
  c.k = 8;
  c.l = 4;
  c.epochs = 20;
  return c;
}

hier::Config config_or_desk(const std::string& path) { return path.empty() ? desk_config() : hier::load_config(path); }

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw hier::InvalidArgument("--seeds: '" + item + "' is not a non-negative integer");
    }
  }
  return seeds;
}

hier::Linear linear_from(const hier::Checkpoint& ck, const std::string& prefix) {
  const auto block = [&](const std::string& name) {
    for (const auto& b : ck.blocks)
      if (b.name == name) return hier::Tensor(b.rows, b.cols, b.values);
    throw hier::ValidationError("checkpoint has no block " + name);
  };
  return {block(prefix + ".weight"), block(prefix + ".bias")};
}

hier::RelationEncoder relation_encoder_from(const hier::Checkpoint& ck) {
  return {linear_from(ck, "relation.compress"), linear_from(ck, "relation.expand"),
          linear_from(ck, "relation.concept_head"), linear_from(ck, "relation.relation_head")};
}

// ---- subcommands ----

struct GenerateArgs {
  hier::SyntheticOptions options;
  std::string out;
};

void run_generate(const GenerateArgs& a) {
  const hier::Dataset ds = hier::generate_synthetic(a.options);
  hier::hse::write_file(ds, a.out);
  std::cout << json{{"written", a.out}, {"samples", ds.samples.size()}, {"d", ds.d()}, {"labels", ds.labels.names}}.dump()
            << '\n';
}

struct ClusterArgs {
  std::string input, out;
  std::size_t k = 50, iterations = 30;
  std::uint64_t seed = 0;
  double alpha = 0.5;
};

void run_cluster(const ClusterArgs& a) {
  const hier::Dataset ds = hier::ingest_embeddings(a.input);
  LineSink sink(a.out);
  const hier::Tensor labels = ds.labels.as_tensor();
  for (const auto& s : ds.samples) {
    hier::ClusteringOptions opt;
    opt.k = std::min(a.k, s.sequence.size());
    opt.iterations = a.iterations;
    const auto [concepts, assign] = hier::cluster(s.sequence.as_tensor(), labels, hier::Tensor::scalar(a.alpha), opt,
                                                  hier::sample_seed(a.seed, s.id));
    std::vector<double> mass(opt.k, 0.0);
    std::vector<std::size_t> members(opt.k, 0);
    for (std::size_t i = 0; i < assign.probs.rows(); ++i) {
      std::size_t best = 0;
      for (std::size_t m = 0; m < opt.k; ++m) {
        mass[m] += assign.probs.at(i, m);
        if (assign.probs.at(i, m) > assign.probs.at(i, best)) best = m;
      }
      ++members[best];
    }
    sink.write({{"id", s.id},
                {"label", ds.labels.names[s.label]},
                {"label_index", s.label},
                {"num_labels", ds.num_classes()},
                {"k", opt.k},
                {"iterations", assign.iteration},
                {"alpha", a.alpha},
                {"centroids", matrix_json(concepts.centroids)},
                {"assignment_mass", mass},
                {"assignment_members", members},
                {"label_weights", matrix_json(concepts.label_weights)}});
  }
}

struct RelationsArgs {
  std::string concepts, out, mode = "standard", model;
  double ratio = 0.5;
  std::uint64_t seed = 0;
  std::optional<std::size_t> budget;
};

void run_relations(const RelationsArgs& a) {
  const hier::JsMode mode = hier::parse_js_mode(a.mode);
  std::ifstream in(a.concepts);
  if (!in) throw hier::InvalidArgument("cannot open " + a.concepts);
  std::optional<hier::RelationEncoder> encoder;
  if (!a.model.empty()) encoder = relation_encoder_from(hier::load_checkpoint(a.model));
  LineSink sink(a.out);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw hier::ParseError(a.concepts + " line " + std::to_string(line_no) + ": " + e.what(), 0);
    }
    const auto rows = rec.at("centroids").get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw hier::ValidationError(a.concepts + " line " + std::to_string(line_no) + ": no centroids");
    const std::size_t d = rows.front().size();
    std::vector<double> flat;
    for (const auto& r : rows) {
      if (r.size() != d) throw hier::DimensionError(a.concepts + " line " + std::to_string(line_no) + ": ragged centroids");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    if (!encoder) {
      std::mt19937_64 rng(a.seed);
      encoder = hier::RelationEncoder::init(d, rec.at("num_labels").get<std::size_t>(), rng);
    }
    const hier::Tensor concepts(rows.size(), d, std::move(flat));
    const auto pairs = hier::score_all_pairs(concepts, *encoder, mode);
    const auto selection = hier::select_relations(pairs.scored, a.ratio, a.budget);
    json selected = json::array();
    for (const auto& rel : selection.selected)
      selected.push_back({{"i", rel.i}, {"j", rel.j}, {"score", rel.score}, {"vector", rows_of(pairs.relations, rel.row)}});
    sink.write({{"id", rec.value("id", "")},
                {"mode", hier::to_string(mode)},
                {"total_pairs", pairs.scored.size()},
                {"retention_ratio", a.ratio},
                {"relations", selected}});
  }
}

hier::HierModel model_for(const hier::Checkpoint& ck, const hier::Dataset& ds, hier::Ablation ablation) {
  if (ds.labels.names != ck.label_names) throw hier::ValidationError("checkpoint label set does not match the input");
  hier::HierModel model(hier::with_ablation(ck.config, ablation), ds.labels);
  hier::restore(model, ck);
  return model;
}

struct ReasonArgs {
  std::string model, input, ablate = "none", out;
};

void run_reason(const ReasonArgs& a) {
  const hier::Dataset ds = hier::ingest_embeddings(a.input);
  const hier::HierModel model = model_for(hier::load_checkpoint(a.model), ds, hier::parse_ablation(a.ablate));
  LineSink sink(a.out);
  for (const auto& s : ds.samples) {
    const auto r = model.forward(s);
    json relations = json::array();
    for (std::size_t i = 0; i < r.relations.size(); ++i)
      relations.push_back({{"i", r.relations[i].i},
                           {"j", r.relations[i].j},
                           {"js", r.relations[i].score},
                           {"gate", i < r.relation_scores.size() ? r.relation_scores[i] : 1.0}});
    sink.write({{"id", s.id},
                {"label", ds.labels.names[s.label]},
                {"predicted", ds.labels.names[r.prediction]},
                {"predicted_index", r.prediction},
                {"logits", std::vector<double>(r.class_logits.values().begin(), r.class_logits.values().end())},
                {"concept_scores", r.concept_scores},
                {"relation_scores", r.relation_scores},
                {"relations", relations}});
  }
}

struct TrainArgs {
  std::string config, out = "hier.hck", history;
};

void run_train(const TrainArgs& a) {
  const hier::Config config = hier::load_config(a.config);
  const hier::DatasetSplits data = hier::load_data(config);
  LineSink history(a.history);
  const hier::TrainResult r =
      hier::train(config, data.train, data.validation, [&](const hier::EpochRecord& rec) { history.write(hier::to_json(rec)); });
  hier::save_checkpoint(r.checkpoint, a.out);
  json summary{{"checkpoint", a.out}, {"best_epoch", r.best_epoch}};
  if (!data.test.empty()) summary["test"] = hier::to_json(hier::evaluate(r.checkpoint, data.test));
  std::cout << summary.dump() << '\n';
}

struct EvalArgs {
  std::string checkpoint, input;
};

void run_eval(const EvalArgs& a) {
  const hier::Dataset ds = hier::ingest_embeddings(a.input);
  std::cout << hier::to_json(hier::evaluate(hier::load_checkpoint(a.checkpoint), ds)).dump() << '\n';
}

struct SweepArgs {
  std::string config, seeds = "0,1,2,3,4";
};

void run_sweep(const SweepArgs& a) {
  const auto seeds = parse_seeds(a.seeds);
  const hier::SweepResult r = hier::run_seed_sweep(hier::load_config(a.config), seeds);
  for (std::size_t i = 0; i < r.runs.size(); ++i)
    std::cout << json{{"seed", r.seeds[i]}, {"test", hier::to_json(r.runs[i])}}.dump() << '\n';
  std::cout << json{{"summary", hier::to_json(r.summary)}}.dump() << '\n';
}

struct AblateArgs {
  std::string which, config;
};

void run_ablate(const AblateArgs& a) {
  const hier::Ablation which = hier::parse_ablation(a.which);
  const hier::Config base = config_or_desk(a.config);
  const hier::DatasetSplits data = hier::load_data(base);
  for (hier::Ablation v : {hier::Ablation::kNone, which}) {
    const hier::Config c = hier::with_ablation(base, v);
    const hier::TrainResult r = hier::train(c, data.train, data.validation);
    const hier::Metrics m = hier::evaluate(r.checkpoint, data.test.empty() ? data.validation : data.test);
    std::cout << json{{"variant", v == hier::Ablation::kNone ? "full" : "w/o " + a.which}, {"test", hier::to_json(m)}}.dump()
              << '\n';
    if (v == hier::Ablation::kNone && which == hier::Ablation::kNone) break;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HIER hierarchical multimodal intent pipeline"};
  app.require_subcommand(1);

  GenerateArgs gen;
  gen.options.d = 16;
  auto* g = app.add_subcommand("generate", "Write a synthetic embedding file (HSE)");
  g->add_option("--out", gen.out, "Output .hse path")->required();
  g->add_option("--classes", gen.options.n_classes, "Number of classes");
  g->add_option("--samples-per-class", gen.options.samples_per_class, "Samples per class");
  g->add_option("--d", gen.options.d, "Embedding width");
  g->add_option("--tokens", gen.options.tokens_per_sample, "Tokens per sample");
  g->add_option("--noise", gen.options.noise_std, "Gaussian noise standard deviation");
  g->add_option("--distractors", gen.options.distractor_fraction, "Fraction of tokens drawn from other classes");
  g->add_option("--seed", gen.options.seed, "Generator seed");
  g->callback([&] { run_generate(gen); });

  ClusterArgs cl;
  auto* c = app.add_subcommand("cluster", "Cluster each sample's tokens into concepts");
  c->add_option("--input", cl.input, "Input .hse file")->required();
  c->add_option("--k", cl.k, "Concept count (clamped to the token count)");
  c->add_option("--iters", cl.iterations, "Clustering iterations");
  c->add_option("--seed", cl.seed, "Seeding RNG seed");
  c->add_option("--alpha", cl.alpha, "Label-guidance mixing weight in [0, 1]");
  c->add_option("--out", cl.out, "Output JSON Lines path (stdout if omitted)");
  c->callback([&] { run_cluster(cl); });

  RelationsArgs rel;
  auto* r = app.add_subcommand("relations", "Score and select concept-pair relations");
  r->add_option("--concepts", rel.concepts, "Concepts JSON Lines written by 'cluster'")->required();
  r->add_option("--ratio", rel.ratio, "Retention ratio in (0, 1]");
  r->add_option("--mode", rel.mode, "JS mode: standard|paper-verbatim");
  r->add_option("--budget", rel.budget, "Upper bound on retained relations");
  r->add_option("--model", rel.model, "Checkpoint supplying the relation encoder");
  r->add_option("--seed", rel.seed, "Seed for a fresh encoder when --model is absent");
  r->add_option("--out", rel.out, "Output JSON Lines path (stdout if omitted)");
  r->callback([&] { run_relations(rel); });

  ReasonArgs rs;
  auto* re = app.add_subcommand("reason", "Run the full pipeline and print per-sample predictions");
  re->add_option("--model", rs.model, "Checkpoint file")->required();
  re->add_option("--input", rs.input, "Input .hse file")->required();
  re->add_option("--ablate", rs.ablate, "none|concept|relation|cot|evolution");
  re->add_option("--out", rs.out, "Output JSON Lines path (stdout if omitted)");
  re->callback([&] { run_reason(rs); });

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model from a config file");
  t->add_option("--config", tr.config, "Config file (key = value)")->required();
  t->add_option("--out", tr.out, "Checkpoint output path");
  t->add_option("--history", tr.history, "Per-epoch JSON Lines path (stdout if omitted)");
  t->callback([&] { run_train(tr); });

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on an embedding file");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("--input", ev.input, "Input .hse file")->required();
  e->callback([&] { run_eval(ev); });

  SweepArgs sw;
  auto* s = app.add_subcommand("sweep", "Train and test once per seed, then report mean and std");
  s->add_option("--config", sw.config, "Config file")->required();
  s->add_option("--seeds", sw.seeds, "Comma-separated seeds");
  s->callback([&] { run_sweep(sw); });

  AblateArgs ab;
  auto* a = app.add_subcommand("ablate", "Compare the full model with one component switched off");
  a->add_option("--which", ab.which, "concept|relation|cot|evolution")->required();
  a->add_option("--config", ab.config, "Config file (a 16-wide synthetic task if omitted)");
  a->callback([&] { run_ablate(ab); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err);
  } catch (const hier::Error& err) {
    std::cerr << "hier: " << err.what() << '\n';
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "hier: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
