#include "docie/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "docie/corpus.hpp"
#include "docie/error.hpp"
#include "docie/eval.hpp"
#include "docie/kg.hpp"
#include "docie/model.hpp"
#include "docie/train.hpp"
#include "json.hpp"

namespace docie {

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitBadConfig = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitSchemaMismatch = 4;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write file: " + path);
  out << content;
}

std::string hardware_descriptor() {
  std::string cpu = "unknown cpu";
  std::ifstream info("/proc/cpuinfo");
  std::string line;
  while (std::getline(info, line)) {
    if (line.rfind("model name", 0) == 0) {
      const auto colon = line.find(':');
      if (colon != std::string::npos) cpu = line.substr(colon + 2);
      break;
    }
  }
  return cpu + ", " + std::to_string(std::thread::hardware_concurrency()) +
         " hw threads";
}

Schema schema_from_config(const json& cfg) {
  if (!cfg.contains("schema") || cfg["schema"] == "desk")
    return make_desk_schema();
  return parse_schema_json(cfg["schema"].dump());
}

LossWeights weights_from_config(const json& cfg) {
  LossWeights w;
  if (!cfg.contains("loss_weights")) return w;
  const auto& jw = cfg["loss_weights"];
  if (jw.is_array()) {
    if (jw.size() != 5)
      throw ConfigError("loss_weights array must have 5 entries");
    w.md = jw[0].get<double>();
    w.et = jw[1].get<double>();
    w.ed = jw[2].get<double>();
    w.coref = jw[3].get<double>();
    w.rc = jw[4].get<double>();
  } else {
    w.md = jw.value("md", w.md);
    w.et = jw.value("et", w.et);
    w.ed = jw.value("ed", w.ed);
    w.coref = jw.value("coref", w.coref);
    w.rc = jw.value("rc", w.rc);
  }
  return w;
}

int run_gen(const std::string& out_path, const std::string& kg_path,
            std::uint64_t seed, std::size_t n_docs) {
  Schema schema = make_desk_schema();
  Corpus corpus = generate_synthetic_corpus(seed, n_docs, schema);
  write_corpus(corpus, out_path);
  if (!kg_path.empty()) write_kg(generate_desk_kg(schema), kg_path);
  std::cout << "wrote " << corpus.size() << " documents to " << out_path
            << std::endl;
  return kExitOk;
}

int run_train(const std::string& config_path, std::int64_t seed_override) {
  json cfg;
  try {
    cfg = json::parse(read_file(config_path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + config_path + ": " + e.what());
  }

  Schema schema = schema_from_config(cfg);
  if (!cfg.contains("train_corpus"))
    throw ConfigError("config: train_corpus missing");
  Corpus train_corpus =
      parse_corpus(cfg["train_corpus"].get<std::string>(), schema);
  Corpus dev_corpus;
  if (cfg.contains("dev_corpus") && !cfg["dev_corpus"].is_null())
    dev_corpus = parse_corpus(cfg["dev_corpus"].get<std::string>(), schema);
  if (!cfg.contains("kg")) throw ConfigError("config: kg missing");
  KgSnapshot kg = load_kg(cfg["kg"].get<std::string>());

  ModelConfig model_cfg;
  if (cfg.contains("model"))
    model_cfg = model_config_from_json(cfg["model"].dump());
  if (cfg.contains("seed")) model_cfg.seed = cfg["seed"].get<std::uint64_t>();
  if (seed_override >= 0)
    model_cfg.seed = static_cast<std::uint64_t>(seed_override);

  TrainConfig train_cfg;
  train_cfg.mode = TrainingMode::parse(cfg.value("mode", std::string("docie")));
  train_cfg.base_weights = weights_from_config(cfg);
  train_cfg.epochs = cfg.value("epochs", train_cfg.epochs);
  train_cfg.batch_size = cfg.value("batch_size", train_cfg.batch_size);
  train_cfg.learning_rate = cfg.value("learning_rate", train_cfg.learning_rate);
  train_cfg.eval_every = cfg.value("eval_every", train_cfg.eval_every);
  const std::string out = cfg.value("out", std::string("model"));
  train_cfg.checkpoint_prefix = out;
  train_cfg.metrics_path = out + ".metrics.jsonl";

  Vocabulary vocab = build_model_vocab(train_corpus, kg);
  CandidateTable table = build_candidate_table(
      train_corpus, static_cast<std::size_t>(model_cfg.ed.max_candidates));
  JointModel model(schema, vocab, model_cfg);

  TrainResult result = train(model, train_corpus, dev_corpus, table, kg,
                             train_cfg);
  json summary;
  summary["checkpoint"] = out;
  summary["metrics"] = train_cfg.metrics_path;
  summary["epochs"] = train_cfg.epochs;
  summary["best_epoch"] = result.best_epoch;
  summary["best_dev_f1"] = result.best_dev_f1;
  std::cout << summary.dump(1) << std::endl;
  return kExitOk;
}

int run_eval(const std::string& checkpoint, const std::string& corpus_path,
             const std::string& mode_text, const std::string& method,
             double threshold, const std::string& out_path) {
  ModelBundle bundle = load_model(checkpoint);
  Corpus corpus = parse_corpus(corpus_path, bundle.model->schema());
  TrainingMode mode = TrainingMode::parse(mode_text);
  if (!method.empty())
    bundle.model->mutable_config().coref.method =
        cluster_method_from_string(method);
  if (threshold >= 0.0)
    bundle.model->mutable_config().coref.threshold = threshold;

  FullReport report =
      evaluate_corpus(*bundle.model, corpus, bundle.table, bundle.kg, mode);
  const std::string report_json = report_to_json(report);
  std::cout << report_json << std::endl;
  std::cerr << report_to_table(report);
  if (!out_path.empty()) write_file(out_path, report_json + "\n");
  return kExitOk;
}

int run_infer(const std::string& checkpoint, const std::string& corpus_path,
              const std::string& out_path) {
  ModelBundle bundle = load_model(checkpoint);
  Corpus corpus = parse_corpus(corpus_path, bundle.model->schema());

  JointModel::reset_document_forward_passes();
  Corpus predicted;
  std::vector<std::string> truncated_ids;
  for (const auto& doc : corpus) {
    PredictedDoc p =
        bundle.model->predict(doc, bundle.table, bundle.kg, /*with_ed=*/true);
    if (p.truncated) truncated_ids.push_back(doc.id);
    Document out_doc;
    out_doc.id = doc.id;
    out_doc.tokens = doc.tokens;
    out_doc.sentence_starts = doc.sentence_starts;
    for (const auto& cluster : p.clusters) {
      EntityCluster c;
      c.mentions = cluster.mentions;
      c.types = cluster.types;
      c.entity_id = cluster.entity_id;
      out_doc.gold_clusters.push_back(std::move(c));
    }
    out_doc.gold_triples = p.triples;
    predicted.push_back(std::move(out_doc));
  }

  json root = json::parse(serialize_corpus(predicted));
  root["meta"] = {{"forward_passes", JointModel::document_forward_passes()},
                  {"n_docs", corpus.size()},
                  {"truncated_docs", truncated_ids}};
  const std::string text = root.dump(1) + "\n";
  if (out_path.empty())
    std::cout << text;
  else
    write_file(out_path, text);
  for (const auto& id : truncated_ids)
    std::cerr << "warning: document '" << id << "' truncated to max_seq_len\n";
  return kExitOk;
}

int run_bench(const std::string& checkpoint, const std::string& corpus_path,
              const std::string& mode_text, int repeats,
              const std::string& out_path) {
  if (repeats < 1) throw ConfigError("bench: repeats must be >= 1");
  TrainingMode mode = TrainingMode::parse(mode_text);
  if (mode.kind == TrainingMode::Kind::kSubtask)
    throw ConfigError("bench: mode must be re or docie");
  const bool with_ed = mode.kind == TrainingMode::Kind::kDocie;

  ModelBundle bundle = load_model(checkpoint);
  Corpus corpus = parse_corpus(corpus_path, bundle.model->schema());
  if (corpus.empty()) throw ConfigError("bench: empty corpus");

  using clock = std::chrono::steady_clock;
  auto run_pass = [&](std::vector<double>* per_doc) {
    double total = 0.0;
    for (std::size_t d = 0; d < corpus.size(); ++d) {
      const auto t0 = clock::now();
      bundle.model->predict(corpus[d], bundle.table, bundle.kg, with_ed);
      const double dt =
          std::chrono::duration<double>(clock::now() - t0).count();
      total += dt;
      if (per_doc) (*per_doc)[d] = std::min((*per_doc)[d], dt);
    }
    return total;
  };

  run_pass(nullptr);  // warmup, excluded from timing
  std::vector<double> doc_minima(corpus.size(),
                                 std::numeric_limits<double>::infinity());
  std::vector<double> repeat_seconds;
  for (int r = 0; r < repeats; ++r)
    repeat_seconds.push_back(run_pass(&doc_minima));

  std::vector<double> sorted = repeat_seconds;
  std::sort(sorted.begin(), sorted.end());
  const double median =
      sorted.size() % 2 == 1
          ? sorted[sorted.size() / 2]
          : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
  double sum_minima = 0.0;
  for (double m : doc_minima) sum_minima += m;

  json report;
  report["corpus"] = corpus_path;
  report["n_docs"] = corpus.size();
  report["mode"] = mode.str();
  report["repeats"] = repeats;
  report["seconds_total"] = median;
  report["seconds_per_doc"] = median / static_cast<double>(corpus.size());
  report["repeat_seconds"] = repeat_seconds;
  report["sum_doc_minima"] = sum_minima;
  report["hardware"] = hardware_descriptor();
  const std::string text = report.dump(1);
  std::cout << text << std::endl;
  if (!out_path.empty()) write_file(out_path, text + "\n");
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"document-level closed information extraction"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen", "generate a synthetic corpus and KG");
  std::string gen_out = "corpus.json", gen_kg;
  std::uint64_t gen_seed = 1;
  std::size_t gen_docs = 20;
  gen->add_option("--out", gen_out, "corpus output path");
  gen->add_option("--kg-out", gen_kg, "KG snapshot output path");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--docs", gen_docs, "number of documents");

  auto* train_cmd = app.add_subcommand("train", "train a model from a config");
  std::string train_config;
  std::int64_t train_seed = -1;
  train_cmd->add_option("--config", train_config, "training config JSON")
      ->required();
  train_cmd->add_option("--seed", train_seed, "override the config seed");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string eval_ckpt, eval_corpus, eval_mode = "docie", eval_method,
              eval_out;
  double eval_threshold = -1.0;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint prefix")
      ->required();
  eval_cmd->add_option("--corpus", eval_corpus, "corpus path")->required();
  eval_cmd->add_option("--mode", eval_mode,
                       "re, docie or subtask:<md|et|ed|coref|rc>");
  eval_cmd->add_option("--method", eval_method, "coref clustering override");
  eval_cmd->add_option("--threshold", eval_threshold,
                       "coref threshold override");
  eval_cmd->add_option("--out", eval_out, "also write the JSON report here");

  auto* infer_cmd = app.add_subcommand("infer", "run extraction on raw text");
  std::string infer_ckpt, infer_corpus, infer_out;
  infer_cmd->add_option("--checkpoint", infer_ckpt, "checkpoint prefix")
      ->required();
  infer_cmd->add_option("--corpus", infer_corpus, "corpus path (tokens only)")
      ->required();
  infer_cmd->add_option("--out", infer_out, "output path (default stdout)");

  auto* bench_cmd = app.add_subcommand("bench", "measure inference speed");
  std::string bench_ckpt, bench_corpus, bench_mode = "re", bench_out;
  int bench_repeats = 3;
  bench_cmd->add_option("--checkpoint", bench_ckpt, "checkpoint prefix")
      ->required();
  bench_cmd->add_option("--corpus", bench_corpus, "corpus path")->required();
  bench_cmd->add_option("--mode", bench_mode, "re or docie");
  bench_cmd->add_option("--repeats", bench_repeats, "timed repetitions");
  bench_cmd->add_option("--out", bench_out, "also write the report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadConfig;
  }

  try {
    if (gen->parsed()) return run_gen(gen_out, gen_kg, gen_seed, gen_docs);
    if (train_cmd->parsed()) {
      try {
        return run_train(train_config, train_seed);
      } catch (const ValidationError& e) {
        // bad training inputs are configuration problems
        throw ConfigError(e.what());
      }
    }
    if (eval_cmd->parsed())
      return run_eval(eval_ckpt, eval_corpus, eval_mode, eval_method,
                      eval_threshold, eval_out);
    if (infer_cmd->parsed())
      return run_infer(infer_ckpt, infer_corpus, infer_out);
    if (bench_cmd->parsed())
      return run_bench(bench_ckpt, bench_corpus, bench_mode, bench_repeats,
                       bench_out);
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitDiverged;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitBadConfig;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitBadConfig;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitSchemaMismatch;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return kExitBadConfig;
}

}  // namespace docie
