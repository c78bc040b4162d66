#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "docie/cli.hpp"
#include "docie/corpus.hpp"
#include "docie/model.hpp"
#include "doctest.h"
#include "json.hpp"

using namespace docie;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"docie"};
  for (const auto& a : args) argv.push_back(a.c_str());
  // keep test output clean
  std::ostringstream sink_out, sink_err;
  auto* old_out = std::cout.rdbuf(sink_out.rdbuf());
  auto* old_err = std::cerr.rdbuf(sink_err.rdbuf());
  const int code = cli_main(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return code;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("docie_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const {
    return (path / name).string();
  }
};

void write_train_config(const std::string& path, const TempDir& dir,
                        const std::string& mode, int epochs,
                        std::uint64_t seed) {
  nlohmann::json cfg;
  cfg["mode"] = mode;
  cfg["seed"] = seed;
  cfg["epochs"] = epochs;
  cfg["batch_size"] = 2;
  cfg["learning_rate"] = 1e-3;
  cfg["eval_every"] = 0;
  cfg["model"] = {
      {"encoder",
       {{"embedding_dim", 32}, {"n_layers", 1}, {"n_heads", 4},
        {"max_seq_len", 128}, {"dropout", 0.1}}},
      {"rc",
       {{"n_layers", 1}, {"top_k", 2000}, {"relation_threshold", 0.2},
        {"n_heads", 4}, {"pair_hidden", 32}, {"dropout", 0.1}}},
      {"ed",
       {{"max_candidates", 8}, {"description_dim", 16},
        {"description_layers", 1}, {"description_max_tokens", 8},
        {"description_heads", 2}, {"dropout", 0.1}}},
      {"coref", {{"method", "average_linkage"}, {"threshold", 0.5}}},
      {"type_aggregation", "most_frequent"},
      {"seed", seed}};
  cfg["train_corpus"] = dir / "train.json";
  cfg["kg"] = dir / "kg.json";
  cfg["out"] = dir / "model";
  std::ofstream out(path);
  out << cfg.dump(1);
}

}  // namespace

TEST_CASE("missing config exits with code 2 naming the path") {
  std::ostringstream captured;
  auto* old = std::cerr.rdbuf(captured.rdbuf());
  std::vector<const char*> argv = {"docie", "train", "--config",
                                   "/nonexistent/cfg.json"};
  const int code = cli_main(static_cast<int>(argv.size()), argv.data());
  std::cerr.rdbuf(old);
  CHECK(code == 2);
  CHECK(captured.str().find("/nonexistent/cfg.json") != std::string::npos);
}

TEST_CASE("unknown flags and modes exit with code 2") {
  TempDir dir;
  CHECK(run_cli({"train", "--bogus"}) == 2);
  CHECK(run_cli({"gen", "--out", dir / "c.json", "--kg-out", dir / "kg.json",
                 "--docs", "3"}) == 0);
}

TEST_CASE("full command workflow") {
  TempDir dir;
  REQUIRE(run_cli({"gen", "--out", dir / "train.json", "--kg-out",
                   dir / "kg.json", "--seed", "1", "--docs", "6"}) == 0);
  write_train_config(dir / "config.json", dir, "docie", 3, 1);
  REQUIRE(run_cli({"train", "--config", dir / "config.json"}) == 0);
  CHECK(fs::exists(dir.path / "model.params"));
  CHECK(fs::exists(dir.path / "model.meta.json"));
  CHECK(fs::exists(dir.path / "model.metrics.jsonl"));

  SUBCASE("eval emits a report with every docie section") {
    REQUIRE(run_cli({"eval", "--checkpoint", dir / "model", "--corpus",
                     dir / "train.json", "--mode", "docie", "--out",
                     dir / "report.json"}) == 0);
    auto report = nlohmann::json::parse(slurp(dir.path / "report.json"));
    for (const char* section :
         {"md", "et", "ner", "ed", "coref", "rc", "e2e"})
      CHECK(report.contains(section));
    CHECK(report["coref"].contains("b3_f1"));
  }

  SUBCASE("re mode omits the ED section") {
    REQUIRE(run_cli({"eval", "--checkpoint", dir / "model", "--corpus",
                     dir / "train.json", "--mode", "re", "--out",
                     dir / "re.json"}) == 0);
    auto report = nlohmann::json::parse(slurp(dir.path / "re.json"));
    CHECK_FALSE(report.contains("ed"));
    CHECK(report.contains("e2e"));
  }

  SUBCASE("subtask report contains only that section") {
    REQUIRE(run_cli({"eval", "--checkpoint", dir / "model", "--corpus",
                     dir / "train.json", "--mode", "subtask:coref", "--out",
                     dir / "coref.json"}) == 0);
    auto report = nlohmann::json::parse(slurp(dir.path / "coref.json"));
    CHECK(report.contains("coref"));
    CHECK_FALSE(report.contains("md"));
    CHECK_FALSE(report.contains("e2e"));
  }

  SUBCASE("bad eval mode exits 2") {
    CHECK(run_cli({"eval", "--checkpoint", dir / "model", "--corpus",
                   dir / "train.json", "--mode", "nonsense"}) == 2);
  }

  SUBCASE("infer output round-trips through ingestion") {
    JointModel::reset_document_forward_passes();
    REQUIRE(run_cli({"infer", "--checkpoint", dir / "model", "--corpus",
                     dir / "train.json", "--out", dir / "infer.json"}) == 0);
    auto root = nlohmann::json::parse(slurp(dir.path / "infer.json"));
    CHECK(root["meta"]["forward_passes"].get<std::uint64_t>() == 6);
    CHECK(root["meta"]["n_docs"].get<std::size_t>() == 6);
    // inference output is a valid silver-annotated corpus
    auto corpus = parse_corpus_json(slurp(dir.path / "infer.json"),
                                    make_desk_schema());
    CHECK(corpus.size() == 6);
  }

  SUBCASE("bench runs and reports") {
    REQUIRE(run_cli({"bench", "--checkpoint", dir / "model", "--corpus",
                     dir / "train.json", "--mode", "re", "--repeats", "1",
                     "--out", dir / "bench.json"}) == 0);
    auto report = nlohmann::json::parse(slurp(dir.path / "bench.json"));
    CHECK(report["n_docs"].get<int>() == 6);
    CHECK(report["seconds_total"].get<double>() >= 0.0);
    CHECK(report["seconds_per_doc"].get<double>() ==
          doctest::Approx(report["seconds_total"].get<double>() / 6.0));
    CHECK(report.contains("hardware"));
    // timer monotonicity: the reported total covers the per-doc minima
    CHECK(report["seconds_total"].get<double>() >=
          report["sum_doc_minima"].get<double>() - 1e-9);
  }

  SUBCASE("corpus from another schema exits 4") {
    // corpus with entity ids the checkpoint schema does not know
    Schema other = make_desk_schema();
    other.entities = {"X1", "X2"};
    Corpus corpus(1);
    corpus[0].id = "alien";
    corpus[0].tokens = {"a", "b"};
    corpus[0].sentence_starts = {0};
    EntityCluster c;
    c.mentions = {{0, 1}};
    c.types = {"person"};
    c.entity_id = "X1";
    corpus[0].gold_clusters.push_back(c);
    write_corpus(corpus, dir / "alien.json");
    CHECK(run_cli({"eval", "--checkpoint", dir / "model", "--corpus",
                   dir / "alien.json", "--mode", "docie"}) == 4);
  }
}

TEST_CASE("fixed-seed training is byte-reproducible") {
  TempDir dir;
  REQUIRE(run_cli({"gen", "--out", dir / "train.json", "--kg-out",
                   dir / "kg.json", "--seed", "3", "--docs", "5"}) == 0);
  write_train_config(dir / "config.json", dir, "re", 3, 42);
  REQUIRE(run_cli({"train", "--config", dir / "config.json"}) == 0);
  const std::string first = slurp(dir.path / "model.metrics.jsonl");
  const std::string params_first = slurp(dir.path / "model.params");
  REQUIRE(run_cli({"train", "--config", dir / "config.json"}) == 0);
  CHECK(slurp(dir.path / "model.metrics.jsonl") == first);
  CHECK(slurp(dir.path / "model.params") == params_first);
}
