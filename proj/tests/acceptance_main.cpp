// Acceptance suite: exercises the contract-level criteria end to end and
// prints one PASS/FAIL line per criterion. Exit code 0 iff all pass.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "cluster_oracles.hpp"
#include "desk_fixture.hpp"
#include "docie/cli.hpp"
#include "docie/corpus.hpp"
#include "docie/eval.hpp"
#include "docie/kg.hpp"
#include "docie/model.hpp"
#include "docie/train.hpp"
#include "gradcheck.hpp"
#include "json.hpp"
#include "oracles.hpp"

using namespace docie;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void report(int number, const std::string& name, bool ok,
            const std::string& detail) {
  std::printf("[%s] %d %-22s %s\n", ok ? "PASS" : "FAIL", number, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Frozen desk-scale training profile for the overfit runs: dropout off (the
// point is to memorize the fixture), higher learning rate than the
// full-scale profile, everything else at the reference defaults.
ModelConfig overfit_model_config() {
  ModelConfig cfg;
  cfg.encoder.embedding_dim = 64;
  cfg.encoder.n_layers = 2;
  cfg.encoder.n_heads = 4;
  cfg.encoder.max_seq_len = 510;
  cfg.encoder.dropout = 0.0;
  cfg.rc.n_layers = 2;
  cfg.rc.top_k = 2000;
  cfg.rc.relation_threshold = 0.2;
  cfg.rc.n_heads = 4;
  cfg.rc.pair_hidden = 64;
  cfg.rc.dropout = 0.0;
  cfg.ed.max_candidates = 30;
  cfg.ed.description_dim = 32;
  cfg.ed.description_layers = 1;
  cfg.ed.description_max_tokens = 32;
  cfg.ed.description_heads = 4;
  cfg.ed.dropout = 0.0;
  cfg.coref.method = ClusterMethod::kAverageLinkage;
  cfg.coref.threshold = 0.5;
  cfg.type_aggregation = TypeAggregation::kMostFrequent;
  cfg.seed = 1;
  return cfg;
}

struct OverfitArtifacts {
  fs::path dir;
  Schema schema;
  KgSnapshot kg;
  Corpus corpus;
  CandidateTable table;
  std::string checkpoint;  // best checkpoint prefix
  std::string corpus_path;
  double train_seconds = 0.0;
  FullReport docie_report;
  PrMetric md, et, rc, ed;
  CorefResult coref;
};

// --- criterion 1: gradient fidelity ------------------------------------------

bool check_primitives(std::string& detail) {
  Rng rng(2024);
  int checks = 0;
  double worst = 0.0;
  auto run = [&](const char* name, Tensor param,
                 const std::function<Tensor()>& loss) {
    const double err = gradcheck::max_rel_err(param, loss);
    worst = std::max(worst, err);
    ++checks;
    if (err >= 1e-4)
      std::printf("  gradient check failed: %s (rel err %.3g)\n", name, err);
    return err < 1e-4;
  };

  bool ok = true;
  // elementwise and structural primitives on random shapes <= 8
  {
    Tensor x = gradcheck::random_param(7, 5, rng);
    auto scalarize = [&](Tensor t) {
      Rng local(7);
      return gradcheck::to_scalar(t, local);
    };
    ok &= run("sigmoid", x, [&]() { return scalarize(sigmoid(x)); });
    ok &= run("relu", x, [&]() { return scalarize(relu(x)); });
    ok &= run("gelu", x, [&]() { return scalarize(gelu(x)); });
    ok &= run("tanh", x, [&]() { return scalarize(tanh_op(x)); });
    ok &= run("softmax_rows", x, [&]() { return scalarize(softmax_rows(x)); });
    ok &= run("transpose", x, [&]() { return scalarize(transpose(x)); });
    ok &= run("mean_rows", x, [&]() { return scalarize(mean_rows(x)); });
    ok &= run("sum_all", x, [&]() { return sum_all(x); });
    ok &= run("mean_all", x, [&]() { return mean_all(x); });
    ok &= run("scale", x, [&]() { return scalarize(scale(x, -2.3)); });
    ok &= run("slice_rows", x, [&]() { return scalarize(slice_rows(x, 1, 6)); });
    ok &= run("slice_cols", x, [&]() { return scalarize(slice_cols(x, 0, 3)); });
    ok &= run("gather", x,
              [&]() { return scalarize(gather(x, {0, 3, 3, 17, 34})); });
    ok &= run("dropout", x, [&]() {
      Rng mask(41);
      return scalarize(dropout(x, 0.3, mask, true));
    });
  }
  {
    Tensor a = gradcheck::random_param(4, 6, rng);
    Tensor b = gradcheck::random_param(6, 3, rng);
    auto loss = [&]() {
      Rng local(8);
      return gradcheck::to_scalar(matmul(a, b), local);
    };
    ok &= run("matmul:lhs", a, loss);
    ok &= run("matmul:rhs", b, loss);
  }
  {
    Tensor a = gradcheck::random_param(5, 4, rng);
    Tensor b = gradcheck::random_param(5, 4, rng);
    Tensor bias = gradcheck::random_param(1, 4, rng);
    Tensor s = gradcheck::random_param(1, 1, rng);
    auto loss = [&]() {
      Rng local(9);
      Tensor t = mul(add_bias(add(a, b), bias), sub(a, b));
      return gradcheck::to_scalar(mul_scalar(add_scalar(t, s), s), local);
    };
    for (auto [name, p] : {std::pair<const char*, Tensor>{"add:lhs", a},
                           {"add:rhs", b},
                           {"add_bias:bias", bias},
                           {"scalar-ops", s}})
      ok &= run(name, p, loss);
  }
  {
    Tensor a = gradcheck::random_param(3, 4, rng);
    Tensor b = gradcheck::random_param(2, 4, rng);
    Tensor table = gradcheck::random_param(6, 4, rng);
    auto loss = [&]() {
      Rng local(10);
      Tensor cat = concat_rows({a, b, embedding_rows(table, {5, 0, 5})});
      return gradcheck::to_scalar(concat_cols({cat, scale(cat, 0.5)}), local);
    };
    ok &= run("concat_rows", a, loss);
    ok &= run("concat_cols", b, loss);
    ok &= run("embedding_rows", table, loss);
  }
  {
    Tensor x = gradcheck::random_param(5, 6, rng);
    Tensor g = gradcheck::random_param(1, 6, rng);
    Tensor b = gradcheck::random_param(1, 6, rng);
    auto loss = [&]() {
      Rng local(11);
      return gradcheck::to_scalar(layer_norm_rows(x, g, b), local);
    };
    ok &= run("layer_norm:x", x, loss);
    ok &= run("layer_norm:gain", g, loss);
    ok &= run("layer_norm:bias", b, loss);
  }
  {
    Tensor x = gradcheck::random_param(4, 5, rng);
    Tensor w = gradcheck::random_param(5, 5, rng);
    Tensor y = gradcheck::random_param(6, 5, rng);
    auto loss = [&]() {
      Rng local(12);
      return gradcheck::to_scalar(bilinear(x, w, y), local);
    };
    ok &= run("bilinear:x", x, loss);
    ok &= run("bilinear:w", w, loss);
    ok &= run("bilinear:y", y, loss);
  }
  {
    const int d = 8, heads = 2;
    Tensor x = gradcheck::random_param(5, d, rng, 0.5);
    std::vector<Tensor> proj;
    for (int i = 0; i < 4; ++i)
      proj.push_back(gradcheck::random_param(d, d, rng, 0.4));
    std::vector<Tensor> biases;
    for (int i = 0; i < 4; ++i)
      biases.push_back(gradcheck::random_param(1, d, rng, 0.1));
    auto loss = [&]() {
      Rng local(13);
      return gradcheck::to_scalar(
          multi_head_attention(x, proj[0], biases[0], proj[1], biases[1],
                               proj[2], biases[2], proj[3], biases[3], heads),
          local);
    };
    ok &= run("mha:x", x, loss);
    ok &= run("mha:wq", proj[0], loss);
    ok &= run("mha:wo", proj[3], loss);
  }
  {
    Tensor logits = gradcheck::random_param(4, 6, rng, 1.5);
    std::vector<double> targets(24), mask(24);
    for (auto& t : targets) t = rng.uniform() < 0.5 ? 1.0 : 0.0;
    for (auto& m : mask) m = rng.uniform() < 0.8 ? 1.0 : 0.0;
    ok &= run("bce_with_logits", logits,
              [&]() { return bce_with_logits(logits, targets, mask); });
    std::vector<int> classes;
    for (int i = 0; i < 4; ++i)
      classes.push_back(static_cast<int>(rng.randint(0, 5)));
    ok &= run("ce_with_logits", logits,
              [&]() { return ce_with_logits(logits, classes); });
  }

  // module heads
  {
    ParamStore store;
    Rng prng(31);
    const int dim = 8;
    MentionHead md = make_mention_head(store, dim, prng);
    Tensor h = gradcheck::random_param(6, dim, prng, 0.5);
    std::vector<int> labels = {0, 1, 2, 0, 1, 2};
    auto md_loss = [&]() { return ce_with_logits(md_forward(h, md), labels); };
    ok &= run("head:md:weight", md.weight, md_loss);
    ok &= run("head:md:bias", md.bias, md_loss);
    ok &= run("head:md:input", h, md_loss);

    TypingHeads et = make_typing_heads(store, dim, 3, 4, prng);
    Tensor mentions = gradcheck::random_param(5, dim, prng, 0.5);
    std::vector<double> t_final(15), t_ed(20);
    for (auto& t : t_final) t = prng.uniform() < 0.5 ? 1.0 : 0.0;
    for (auto& t : t_ed) t = prng.uniform() < 0.5 ? 1.0 : 0.0;
    auto et_final_loss = [&]() {
      return bce_with_logits(et_final_logits(mentions, et), t_final);
    };
    auto et_ed_loss = [&]() {
      return bce_with_logits(et_ed_logits(mentions, et), t_ed);
    };
    ok &= run("head:et_final", et.final_weight, et_final_loss);
    ok &= run("head:et_ed", et.ed_weight, et_ed_loss);

    RcConfig rc_cfg;
    rc_cfg.n_layers = 1;
    rc_cfg.n_heads = 2;
    rc_cfg.pair_hidden = 8;
    rc_cfg.dropout = 0.0;
    RcWeights rc = make_rc_weights(store, dim, rc_cfg, 3, 2, prng);
    Tensor membs = gradcheck::random_param(4, dim, prng, 0.5);
    auto fine_of = [&]() {
      Rng local(0);
      Tensor reps = rc_encode(membs, rc, rc_cfg, false, local);
      Tensor coarse = coarse_logits(reps, rc);
      return fine_heads(reps, coarse, all_pairs(4), rc, rc_cfg, false, local);
    };
    std::vector<double> rel_targets(6 * 3), coref_targets(6), kg_targets(6 * 2),
        coarse_targets(6);
    for (auto& t : rel_targets) t = prng.uniform() < 0.5 ? 1.0 : 0.0;
    for (auto& t : coref_targets) t = prng.uniform() < 0.5 ? 1.0 : 0.0;
    for (auto& t : kg_targets) t = prng.uniform() < 0.5 ? 1.0 : 0.0;
    for (auto& t : coarse_targets) t = prng.uniform() < 0.5 ? 1.0 : 0.0;
    auto coarse_loss = [&]() {
      return bce_with_logits(fine_of().coarse_pair_logits, coarse_targets);
    };
    auto rel_loss = [&]() {
      auto fine = fine_of();
      return scale(add(bce_with_logits(fine.rel_logits_ij, rel_targets),
                       bce_with_logits(fine.rel_logits_ji, rel_targets)),
                   0.5);
    };
    auto coref_head_loss = [&]() {
      return bce_with_logits(fine_of().coref_logits, coref_targets);
    };
    auto kg_loss = [&]() {
      return bce_with_logits(fine_of().kg_logits, kg_targets);
    };
    ok &= run("head:coarse_bilinear", rc.coarse_bilinear, coarse_loss);
    ok &= run("head:coarse_bias", rc.coarse_bias, coarse_loss);
    ok &= run("head:rc_final", rc.rel_weight, rel_loss);
    ok &= run("head:rc_coref", rc.coref_weight, coref_head_loss);
    ok &= run("head:rc_ed", rc.kg_weight, kg_loss);
    ok &= run("head:rc_trunk", rc.pair_w1, rel_loss);
    ok &= run("head:rc_input", membs, rel_loss);

    // ED scorer with every feature path active
    Schema schema = make_desk_schema();
    KgSnapshot kg = generate_desk_kg(schema);
    Corpus corpus = generate_synthetic_corpus(3, 3, schema);
    Vocabulary vocab = build_model_vocab(corpus, kg);
    EdConfig ed_cfg;
    ed_cfg.max_candidates = 4;
    ed_cfg.description_dim = 8;
    ed_cfg.description_layers = 1;
    ed_cfg.description_max_tokens = 8;
    ed_cfg.description_heads = 2;
    ed_cfg.dropout = 0.0;
    EdScorer scorer(store, dim, vocab.size(),
                    static_cast<int>(schema.fine_types.size()),
                    static_cast<int>(schema.fine_relations.size()), ed_cfg,
                    prng);
    Tensor mention = gradcheck::random_param(1, dim, prng, 0.5);
    Tensor ted = gradcheck::random_param(
        1, static_cast<int>(schema.fine_types.size()), prng, 0.3);
    Tensor red = gradcheck::random_param(
        1, static_cast<int>(schema.fine_relations.size()), prng, 0.3);
    std::vector<CandidateEntity> candidates;
    for (int c = 0; c < 3; ++c) {
      CandidateEntity cand;
      cand.entity_id = schema.entities[c];
      cand.description_tokens = kg.entries[c].description;
      cand.gold_fine_types = kg.entries[c].fine_types;
      cand.pem = 1.0 / (c + 2.0);
      candidates.push_back(cand);
    }
    auto ed_scorer_loss = [&]() {
      Rng local(0);
      std::vector<Tensor> logits = {scorer.candidate_logits(
          mention, ted, red, candidates, vocab, schema, false, local)};
      return ed_loss(logits, {1});
    };
    ok &= run("head:ed:mention", mention, ed_scorer_loss);
    ok &= run("head:ed:t_ed", ted, ed_scorer_loss);
    ok &= run("head:ed:r_ed", red, ed_scorer_loss);
    ok &= run("head:ed:mention_proj", store.get("ed.mention_proj"),
              ed_scorer_loss);
    ok &= run("head:ed:rel_proj", store.get("ed.rel_proj"), ed_scorer_loss);
    ok &= run("head:ed:w_pem", store.get("ed.w_pem"), ed_scorer_loss);
    ok &= run("head:ed:desc_embedding", store.get("ed.desc.token_embedding"),
              ed_scorer_loss);
  }

  std::ostringstream d;
  d << checks << " checks, worst rel err " << std::scientific << worst;
  detail = d.str();
  return ok;
}

// --- criterion 2: overfit reproduction ----------------------------------------

bool run_overfit(OverfitArtifacts& art, std::string& detail) {
  art.dir = fs::temp_directory_path() / "docie_acceptance";
  fs::create_directories(art.dir);
  art.schema = make_desk_schema();
  art.kg = generate_desk_kg(art.schema);
  art.corpus = generate_synthetic_corpus(1, 20, art.schema);
  art.table = build_candidate_table(art.corpus, 30);
  art.corpus_path = (art.dir / "train.json").string();
  write_corpus(art.corpus, art.corpus_path);
  write_kg(art.kg, (art.dir / "kg.json").string());
  art.checkpoint = (art.dir / "model").string();

  const auto t0 = std::chrono::steady_clock::now();
  JointModel model(art.schema, build_model_vocab(art.corpus, art.kg),
                   overfit_model_config());
  TrainConfig cfg;
  cfg.mode = TrainingMode::parse("docie");
  cfg.epochs = 200;
  cfg.batch_size = 2;
  cfg.learning_rate = 3e-3;
  cfg.eval_every = 25;
  cfg.checkpoint_prefix = art.checkpoint;
  train(model, art.corpus, art.corpus, art.table, art.kg, cfg);
  art.train_seconds = seconds_since(t0);

  ModelBundle best = load_model(art.checkpoint);
  art.docie_report = evaluate_corpus(*best.model, art.corpus, art.table,
                                     art.kg, TrainingMode::parse("docie"));
  art.md = *art.docie_report.md;
  art.et = *art.docie_report.et;
  art.rc = *art.docie_report.rc;
  art.ed = *art.docie_report.ed;
  art.coref = *art.docie_report.coref;
  const double e2e = art.docie_report.e2e->f1();

  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "MD=%.3f ET=%.3f Coref=%.3f RC=%.3f ED=%.3f DocIE=%.3f "
                "(%.0f s train)",
                art.md.f1(), art.et.f1(), art.coref.hard.f1(), art.rc.f1(),
                art.ed.f1(), e2e, art.train_seconds);
  detail = buf;
  return art.md.f1() >= 0.95 && art.et.f1() >= 0.95 &&
         art.coref.hard.f1() >= 0.95 && art.rc.f1() >= 0.95 &&
         art.ed.f1() >= 0.95 && e2e >= 0.90 && art.train_seconds < 600.0;
}

// --- criterion 3: pruning equivalence -----------------------------------------

bool same_prediction(const PredictedDoc& a, const PredictedDoc& b) {
  if (a.mentions != b.mentions) return false;
  if (a.triples.size() != b.triples.size()) return false;
  for (std::size_t i = 0; i < a.triples.size(); ++i)
    if (!(a.triples[i] == b.triples[i])) return false;
  if (a.clusters.size() != b.clusters.size()) return false;
  for (std::size_t i = 0; i < a.clusters.size(); ++i) {
    if (a.clusters[i].mentions != b.clusters[i].mentions) return false;
    if (a.clusters[i].types != b.clusters[i].types) return false;
    if (a.clusters[i].entity_id != b.clusters[i].entity_id) return false;
  }
  return a.mention_entity_ids == b.mention_entity_ids;
}

bool run_pruning_equivalence(const OverfitArtifacts& art, std::string& detail) {
  ModelBundle bundle = load_model(art.checkpoint);
  JointModel& model = *bundle.model;
  int docs_checked = 0;
  bool ok = true;
  for (const auto& doc : art.corpus) {
    model.mutable_config().rc.top_k = 2000;  // reference default
    PredictedDoc with_default = model.predict(doc, art.table, art.kg, true);
    const int n = static_cast<int>(with_default.mentions.size());
    if (n > 12 || n < 2) continue;
    ++docs_checked;

    model.mutable_config().rc.top_k = n * (n - 1) / 2;
    PredictedDoc with_exact = model.predict(doc, art.table, art.kg, true);
    model.mutable_config().rc.top_k = std::numeric_limits<int>::max();
    PredictedDoc with_inf = model.predict(doc, art.table, art.kg, true);

    if (!same_prediction(with_exact, with_inf) ||
        !same_prediction(with_default, with_inf)) {
      ok = false;
      std::printf("  pruning mismatch on %s (n=%d)\n", doc.id.c_str(), n);
    }
  }
  model.mutable_config().rc.top_k = 2000;

  // module-level: the top-k survivors at full k are exactly all_pairs, so the
  // fine stage sees identical inputs with pruning disabled entirely
  {
    Rng rng(404);
    ParamStore store;
    RcConfig cfg;
    cfg.n_layers = 1;
    cfg.n_heads = 2;
    cfg.pair_hidden = 8;
    cfg.dropout = 0.0;
    RcWeights weights = make_rc_weights(store, 8, cfg, 3, 2, rng);
    for (int n = 2; n <= 12; ++n) {
      Tensor mentions = gradcheck::random_tensor(n, 8, rng, 0.5);
      Rng local(0);
      Tensor reps = rc_encode(mentions, weights, cfg, false, local);
      Tensor coarse = coarse_logits(reps, weights);
      auto pruned = topk_prune(coarse, n * (n - 1) / 2);
      if (pruned != all_pairs(n)) {
        ok = false;
        std::printf("  survivor set differs from all_pairs at n=%d\n", n);
      }
    }
  }

  detail = std::to_string(docs_checked) + " fixture docs, k in {n(n-1)/2, " +
           "2000, max}, outputs identical";
  return ok && docs_checked > 0;
}

// --- criterion 4: clustering oracles ------------------------------------------

bool run_clustering_oracles(std::string& detail) {
  Rng rng(515);
  int failures = 0;
  const int trials = 1000;
  for (int iter = 0; iter < trials; ++iter) {
    const int n = 1 + static_cast<int>(rng.randint(0, 7));
    auto s = oracles::random_similarity(rng, n);
    const double t = rng.uniform();
    if (oracles::as_sets(cluster_greedy(s, t)) !=
        oracles::as_sets(oracles::greedy_oracle(s, t)))
      ++failures;
    if (oracles::as_sets(cluster_greedy_multi(s, t)) !=
        oracles::as_sets(oracles::greedy_multi_oracle(s, t)))
      ++failures;
    if (oracles::as_sets(cluster_linkage(s, t, true)) !=
        oracles::as_sets(oracles::linkage_oracle(s, t, true)))
      ++failures;
    if (oracles::as_sets(cluster_linkage(s, t, false)) !=
        oracles::as_sets(oracles::linkage_oracle(s, t, false)))
      ++failures;
    std::vector<std::string> ids;
    for (int m = 0; m < n; ++m) {
      const int pick = static_cast<int>(rng.randint(0, 3));
      ids.push_back(pick == 0 ? "" : "Q" + std::to_string(pick));
    }
    if (oracles::as_sets(cluster_by_entity_id(ids)) !=
        oracles::group_by_oracle(ids))
      ++failures;
  }
  detail = std::to_string(trials) + " random matrices x 5 methods, " +
           std::to_string(failures) + " mismatches";
  return failures == 0;
}

// --- criterion 5: metric oracles ----------------------------------------------

bool run_metric_oracles(std::string& detail) {
  Rng rng(626);
  int failures = 0, dominance_violations = 0;
  const int trials = 500;
  for (int iter = 0; iter < trials; ++iter) {
    auto fixture = oracles::random_hard_fixture(rng);
    const Corpus gold = {fixture.gold};
    const std::vector<PredictedDoc> pred = {fixture.pred};
    auto re = eval_re_hard(pred, gold);
    auto docie = eval_docie_hard(pred, gold);
    auto oracle_re = oracles::hard_metric_oracle(fixture.pred, fixture.gold,
                                                 false);
    auto oracle_docie = oracles::hard_metric_oracle(fixture.pred, fixture.gold,
                                                    true);
    if (re.tp != oracle_re.tp || re.n_pred != oracle_re.n_pred ||
        re.n_gold != oracle_re.n_gold)
      ++failures;
    if (docie.tp != oracle_docie.tp || docie.n_pred != oracle_docie.n_pred ||
        docie.n_gold != oracle_docie.n_gold)
      ++failures;
    if (docie.f1() > re.f1() + 1e-12) ++dominance_violations;
  }
  detail = std::to_string(trials) + " fixtures, " + std::to_string(failures) +
           " oracle mismatches, " + std::to_string(dominance_violations) +
           " dominance violations";
  return failures == 0 && dominance_violations == 0;
}

// --- criterion 6: mode isolation ----------------------------------------------

bool run_mode_isolation(const OverfitArtifacts& art, std::string& detail) {
  bool ok = true;
  ModelConfig cfg = desk::small_model_config(99);
  auto grads_zero = [](const JointModel& model, const std::string& prefix) {
    for (const auto& [name, tensor] : model.params().items()) {
      if (name.rfind(prefix, 0) != 0) continue;
      for (double g : tensor.grad())
        if (g != 0.0) return false;
    }
    return true;
  };

  // RE mode: a full epoch of gradients never touches the ED heads
  {
    JointModel model(art.schema, build_model_vocab(art.corpus, art.kg), cfg);
    const auto weights =
        effective_weights(TrainingMode::parse("re"), LossWeights{});
    const LossMask mask = mask_for(weights);
    Rng dropout_rng(5);
    model.params().zero_grads();
    for (const auto& doc : art.corpus) {
      TaskLosses losses =
          model.training_losses(doc, art.table, art.kg, mask, dropout_rng);
      backward(total_loss(losses, weights));
    }
    if (!grads_zero(model, "ed.")) {
      ok = false;
      std::printf("  RE epoch leaked gradient into ED parameters\n");
    }
  }
  // Subtask(MD): every non-MD head silent
  {
    JointModel model(art.schema, build_model_vocab(art.corpus, art.kg), cfg);
    const auto weights =
        effective_weights(TrainingMode::parse("subtask:md"), LossWeights{});
    const LossMask mask = mask_for(weights);
    Rng dropout_rng(6);
    model.params().zero_grads();
    for (const auto& doc : art.corpus) {
      TaskLosses losses =
          model.training_losses(doc, art.table, art.kg, mask, dropout_rng);
      backward(total_loss(losses, weights));
    }
    for (const char* prefix : {"et.", "rc.", "ed."})
      if (!grads_zero(model, prefix)) {
        ok = false;
        std::printf("  Subtask(MD) epoch leaked gradient into %s\n", prefix);
      }
  }
  // weighted-sum identity against manual accumulation
  double worst_gap = 0.0;
  {
    JointModel model(art.schema, build_model_vocab(art.corpus, art.kg), cfg);
    LossMask all;
    Rng dropout_rng(7);
    LossWeights w;  // reference defaults
    for (const auto& doc : art.corpus) {
      TaskLosses losses =
          model.training_losses(doc, art.table, art.kg, all, dropout_rng);
      const double manual =
          (losses.md.defined() ? w.md * losses.md.item() : 0.0) +
          (losses.et.defined() ? w.et * losses.et.item() : 0.0) +
          (losses.ed.defined() ? w.ed * losses.ed.item() : 0.0) +
          (losses.coref.defined() ? w.coref * losses.coref.item() : 0.0) +
          (losses.rc.defined() ? w.rc * losses.rc.item() : 0.0);
      worst_gap =
          std::max(worst_gap, std::abs(total_loss(losses, w).item() - manual));
    }
    if (worst_gap >= 1e-12) {
      ok = false;
      std::printf("  weighted-sum identity gap %.3g\n", worst_gap);
    }
  }
  std::ostringstream d;
  d << "full-epoch head isolation holds, identity gap " << std::scientific
    << worst_gap;
  detail = d.str();
  return ok;
}

// --- criterion 7: cross-task coupling -----------------------------------------

bool run_coupling(const OverfitArtifacts& art, std::string& detail) {
  ModelConfig cfg = desk::small_model_config(123);
  JointModel model(art.schema, build_model_vocab(art.corpus, art.kg), cfg);
  Rng dropout_rng(8);

  // a document with linked clusters and at least two mentions
  const Document* doc = nullptr;
  for (const auto& d : art.corpus) {
    std::size_t linked = 0;
    for (const auto& c : d.gold_clusters)
      if (c.linked()) ++linked;
    if (linked >= 2) {
      doc = &d;
      break;
    }
  }
  if (!doc) {
    detail = "no linked fixture document";
    return false;
  }

  auto any_grad = [&](const std::string& prefix) {
    for (const auto& [name, tensor] : model.params().items()) {
      if (name.rfind(prefix, 0) != 0) continue;
      for (double g : tensor.grad())
        if (g != 0.0) return true;
    }
    return false;
  };

  bool ok = true;
  // L_d reaches both ED-facing heads
  {
    LossMask ed_only;
    ed_only.md = ed_only.et = ed_only.coref = ed_only.rc = false;
    ed_only.ed = true;
    model.params().zero_grads();
    TaskLosses losses =
        model.training_losses(*doc, art.table, art.kg, ed_only, dropout_rng);
    if (!losses.ed.defined()) {
      detail = "L_d undefined on the linked fixture";
      return false;
    }
    backward(losses.ed);
    if (!any_grad("et.ed.")) {
      ok = false;
      std::printf("  L_d left ET_ed untouched\n");
    }
    if (!any_grad("rc.kg.")) {
      ok = false;
      std::printf("  L_d left RC_ed untouched\n");
    }
  }
  // L_t and L_r leave them silent
  {
    LossMask tr_only;
    tr_only.md = tr_only.ed = tr_only.coref = false;
    tr_only.et = tr_only.rc = true;
    model.params().zero_grads();
    TaskLosses losses =
        model.training_losses(*doc, art.table, art.kg, tr_only, dropout_rng);
    backward(add(losses.et, losses.rc));
    if (any_grad("et.ed.") || any_grad("rc.kg.")) {
      ok = false;
      std::printf("  L_t/L_r leaked into the ED-facing heads\n");
    }
  }
  detail = "L_d trains ET_ed and RC_ed; L_t/L_r leave them silent";
  return ok;
}

// --- criterion 8: single-pass contract and speed direction ---------------------

bool run_single_pass(const OverfitArtifacts& art, std::string& detail) {
  bool ok = true;

  // forward-pass counter through the real CLI path
  const std::string infer_out = (art.dir / "infer.json").string();
  JointModel::reset_document_forward_passes();
  {
    std::vector<const char*> argv = {
        "docie",        "infer",
        "--checkpoint", art.checkpoint.c_str(),
        "--corpus",     art.corpus_path.c_str(),
        "--out",        infer_out.c_str()};
    std::ostringstream sink;
    auto* old = std::cout.rdbuf(sink.rdbuf());
    const int code = cli_main(static_cast<int>(argv.size()), argv.data());
    std::cout.rdbuf(old);
    if (code != 0) {
      detail = "cmd_infer failed";
      return false;
    }
  }
  const auto passes = JointModel::document_forward_passes();
  if (passes != art.corpus.size()) {
    ok = false;
    std::printf("  forward passes %llu != %zu documents\n",
                static_cast<unsigned long long>(passes), art.corpus.size());
  }
  auto meta = nlohmann::json::parse(slurp(infer_out))["meta"];
  if (meta["forward_passes"].get<std::uint64_t>() != art.corpus.size())
    ok = false;

  // wall-clock direction: DocIE does strictly more work than RE
  ModelBundle bundle = load_model(art.checkpoint);
  auto timed_pass = [&](bool with_ed) {
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& doc : art.corpus)
      bundle.model->predict(doc, art.table, art.kg, with_ed);
    return seconds_since(t0);
  };
  timed_pass(false);  // warmup
  timed_pass(true);
  std::vector<double> re_times, docie_times;
  for (int r = 0; r < 3; ++r) {
    re_times.push_back(timed_pass(false));
    docie_times.push_back(timed_pass(true));
  }
  std::sort(re_times.begin(), re_times.end());
  std::sort(docie_times.begin(), docie_times.end());
  const double re_median = re_times[1], docie_median = docie_times[1];
  if (docie_median < re_median) {
    ok = false;
    std::printf("  DocIE pass (%.3f s) faster than RE pass (%.3f s)\n",
                docie_median, re_median);
  }

  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "%llu passes == %zu docs; RE %.3f s <= DocIE %.3f s",
                static_cast<unsigned long long>(passes), art.corpus.size(),
                re_median, docie_median);
  detail = buf;
  return ok;
}

// --- criterion 9: determinism --------------------------------------------------

bool run_determinism(const OverfitArtifacts& art, std::string& detail) {
  auto one_run = [&](const std::string& tag) {
    ModelConfig cfg = desk::small_model_config(77);
    JointModel model(art.schema, build_model_vocab(art.corpus, art.kg), cfg);
    TrainConfig tcfg;
    tcfg.mode = TrainingMode::parse("docie");
    tcfg.epochs = 10;
    tcfg.batch_size = 2;
    tcfg.learning_rate = 1e-3;
    tcfg.eval_every = 5;
    tcfg.metrics_path = (art.dir / ("metrics_" + tag + ".jsonl")).string();
    train(model, art.corpus, art.corpus, art.table, art.kg, tcfg);
    FullReport report = evaluate_corpus(model, art.corpus, art.table, art.kg,
                                        TrainingMode::parse("docie"));
    return std::pair<std::string, std::string>(slurp(tcfg.metrics_path),
                                               report_to_json(report));
  };
  auto [metrics_a, report_a] = one_run("a");
  auto [metrics_b, report_b] = one_run("b");
  const bool ok = metrics_a == metrics_b && report_a == report_b &&
                  !metrics_a.empty();
  detail = ok ? "two runs byte-identical (metrics log and eval report)"
              : "runs diverged";
  return ok;
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");

  {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = check_primitives(detail);
    const double secs = seconds_since(t0);
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s (%.1f s)", detail.c_str(), secs);
    report(1, "gradient-fidelity", ok && secs < 60.0, buf);
  }

  OverfitArtifacts art;
  {
    std::string detail;
    bool ok = run_overfit(art, detail);
    report(2, "overfit-reproduction", ok, detail);
    if (!ok && art.corpus.empty()) return 1;  // later criteria need the fixture
  }
  {
    std::string detail;
    report(3, "pruning-equivalence", run_pruning_equivalence(art, detail),
           detail);
  }
  {
    std::string detail;
    report(4, "clustering-oracles", run_clustering_oracles(detail), detail);
  }
  {
    std::string detail;
    report(5, "metric-oracles", run_metric_oracles(detail), detail);
  }
  {
    std::string detail;
    report(6, "mode-isolation", run_mode_isolation(art, detail), detail);
  }
  {
    std::string detail;
    report(7, "cross-task-coupling", run_coupling(art, detail), detail);
  }
  {
    std::string detail;
    report(8, "single-pass-contract", run_single_pass(art, detail), detail);
  }
  {
    std::string detail;
    report(9, "determinism", run_determinism(art, detail), detail);
  }

  if (g_failures == 0) {
    std::printf("all 9 criteria passed\n");
    return 0;
  }
  std::printf("%d criteria failed\n", g_failures);
  return 1;
}
