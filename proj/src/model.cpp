#include "docie/model.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>

#include "docie/error.hpp"
#include "json.hpp"

namespace docie {

using nlohmann::json;

namespace {

std::atomic<std::uint64_t> g_document_forward_passes{0};

// Flattened gold mentions in document order with their cluster indices,
// restricted to the surviving token window.
struct GoldMentions {
  std::vector<MentionSpan> spans;
  std::vector<int> cluster;
};

GoldMentions flatten_gold(const Document& doc, int n_tokens) {
  std::vector<std::pair<MentionSpan, int>> all;
  for (std::size_t c = 0; c < doc.gold_clusters.size(); ++c)
    for (const auto& m : doc.gold_clusters[c].mentions)
      if (m.end <= n_tokens) all.emplace_back(m, static_cast<int>(c));
  std::sort(all.begin(), all.end());
  GoldMentions out;
  for (const auto& [span, cluster] : all) {
    out.spans.push_back(span);
    out.cluster.push_back(cluster);
  }
  return out;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  std::vector<int> out(logits.rows());
  for (int r = 0; r < logits.rows(); ++r) {
    int best = 0;
    for (int c = 1; c < logits.cols(); ++c)
      if (logits.at(r, c) > logits.at(r, best)) best = c;
    out[r] = best;
  }
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  encoder.validate();
  rc.validate();
  ed.validate();
  coref.validate();
}

JointModel::JointModel(Schema schema, Vocabulary vocab, ModelConfig config)
    : schema_(std::move(schema)), vocab_(std::move(vocab)),
      config_(std::move(config)) {
  schema_.validate();
  config_.validate();
  Rng rng(config_.seed * 0x2545f4914f6cdd1dull + 1);
  encoder_ = std::make_unique<DocumentEncoder>(params_, "enc", vocab_.size(),
                                               config_.encoder, rng);
  const int dim = config_.encoder.embedding_dim;
  md_head_ = make_mention_head(params_, dim, rng);
  typing_heads_ = make_typing_heads(
      params_, dim, static_cast<int>(schema_.entity_types.size()),
      static_cast<int>(schema_.fine_types.size()), rng);
  rc_weights_ = make_rc_weights(params_, dim, config_.rc,
                                static_cast<int>(schema_.relations.size()),
                                static_cast<int>(schema_.fine_relations.size()),
                                rng);
  ed_scorer_ = std::make_unique<EdScorer>(
      params_, dim, vocab_.size(),
      static_cast<int>(schema_.fine_types.size()),
      static_cast<int>(schema_.fine_relations.size()), config_.ed, rng);
}

struct JointModel::Core {
  DocumentEncoder::Output enc;
  std::vector<MentionSpan> spans;
  Tensor md_logits;
  Tensor mention_embs;
  Tensor et_final_logits_t;
  Tensor et_ed_logits_t;
  Tensor reps;
  Tensor coarse;
  FineOutputs fine;
};

JointModel::Core JointModel::run_core(const std::vector<std::string>& tokens,
                                      const std::vector<MentionSpan>& spans,
                                      bool training, bool with_pairs,
                                      Rng& rng) const {
  Core core;
  core.enc = encoder_->encode(tokens, vocab_, training, rng);
  core.md_logits = md_forward(core.enc.hidden, md_head_);
  for (const auto& span : spans)
    if (span.end <= core.enc.n_tokens) core.spans.push_back(span);
  if (core.spans.empty()) return core;

  core.mention_embs = pool_mentions(core.enc.hidden, core.spans);
  core.et_final_logits_t = et_final_logits(core.mention_embs, typing_heads_);
  core.et_ed_logits_t = et_ed_logits(core.mention_embs, typing_heads_);
  if (!with_pairs) return core;

  core.reps = rc_encode(core.mention_embs, rc_weights_, config_.rc, training,
                        rng);
  if (core.spans.size() >= 2) {
    core.coarse = coarse_logits(core.reps, rc_weights_);
    auto pairs = topk_prune(core.coarse, config_.rc.top_k);
    core.fine = fine_heads(core.reps, core.coarse, pairs, rc_weights_,
                           config_.rc, training, rng);
  }
  return core;
}

namespace {

// Mean of the RC_ed scores over the surviving pairs that touch mention m;
// zeros when no pair does.
Tensor kg_context_for_mention(const FineOutputs& fine, const Tensor& kg_scores,
                              int m, int n_fine_relations) {
  std::vector<int> incident;
  for (std::size_t p = 0; p < fine.pairs.size(); ++p)
    if (fine.pairs[p].first == m || fine.pairs[p].second == m)
      incident.push_back(static_cast<int>(p));
  if (incident.empty()) return Tensor::zeros(1, n_fine_relations);
  return mean_rows(embedding_rows(kg_scores, incident));
}

}  // namespace

TaskLosses JointModel::training_losses(const Document& doc,
                                       const CandidateTable& table,
                                       const KgSnapshot& kg,
                                       const LossMask& mask, Rng& dropout_rng) {
  TaskLosses losses;
  // Teacher forcing: every loss sees gold upstream inputs.
  const bool with_pairs = mask.needs_pairs();
  Core core;
  {
    // learn from gold spans even when only MD is trained
    GoldMentions gold = flatten_gold(doc, doc.n_tokens());
    core = run_core(doc.tokens, gold.spans,
                    /*training=*/true, with_pairs, dropout_rng);
    // re-derive cluster indices for the survivors
    if (mask.md) {
      auto bio =
          bio_encode(core.spans, core.enc.n_tokens);
      losses.md = ce_with_logits(core.md_logits, bio);
    }
    if (core.spans.empty()) return losses;

    std::vector<int> mention_cluster;
    {
      GoldMentions survived = flatten_gold(doc, core.enc.n_tokens);
      mention_cluster = survived.cluster;
    }

    if (mask.et) {
      std::vector<std::vector<std::string>> gold_types;
      for (int cl : mention_cluster)
        gold_types.push_back(doc.gold_clusters[cl].types);
      losses.et = et_loss(core.et_final_logits_t, gold_types, schema_);
    }
    if (mask.coref && !core.fine.pairs.empty())
      losses.coref = coref_loss(core.fine, mention_cluster);
    if (mask.rc && !core.fine.pairs.empty())
      losses.rc = rc_loss(core.fine, mention_cluster, doc.gold_triples, schema_);

    if (mask.ed) {
      Tensor kg_scores;
      if (!core.fine.pairs.empty()) kg_scores = sigmoid(core.fine.kg_logits);
      std::vector<Tensor> cand_logits(core.spans.size());
      std::vector<int> gold_index(core.spans.size(), -1);
      for (std::size_t m = 0; m < core.spans.size(); ++m) {
        const auto& cluster = doc.gold_clusters[mention_cluster[m]];
        if (!cluster.linked()) continue;
        auto candidates =
            candidates_for(doc.surface(core.spans[m]), table, kg, config_.ed);
        if (candidates.empty()) continue;
        for (std::size_t c = 0; c < candidates.size(); ++c)
          if (candidates[c].entity_id == cluster.entity_id)
            gold_index[m] = static_cast<int>(c);
        Tensor ed_context =
            kg_scores.defined()
                ? kg_context_for_mention(
                      core.fine, kg_scores, static_cast<int>(m),
                      static_cast<int>(schema_.fine_relations.size()))
                : Tensor::zeros(1,
                                static_cast<int>(schema_.fine_relations.size()));
        Tensor t_ed =
            sigmoid(row(core.et_ed_logits_t, static_cast<int>(m)));
        cand_logits[m] = ed_scorer_->candidate_logits(
            row(core.mention_embs, static_cast<int>(m)), t_ed, ed_context,
            candidates, vocab_, schema_, /*training=*/true, dropout_rng);
      }
      losses.ed = ed_loss(cand_logits, gold_index);
    }
  }
  return losses;
}

namespace {

struct MentionLink {
  std::string id;     // "" = NIL
  double score = 0.0;
};

}  // namespace

PredictedDoc JointModel::predict(const Document& doc,
                                 const CandidateTable& table,
                                 const KgSnapshot& kg, bool with_ed) const {
  NoGradGuard no_grad;
  g_document_forward_passes.fetch_add(1, std::memory_order_relaxed);
  Rng rng(0);  // dropout is inactive outside training

  PredictedDoc out;
  Core core;
  {
    // decode mentions from the BIO head, then run the mention machinery on
    // the same encoder pass
    core.enc = encoder_->encode(doc.tokens, vocab_, false, rng);
    core.md_logits = md_forward(core.enc.hidden, md_head_);
    core.spans = bio_decode(argmax_rows(core.md_logits));
    out.truncated = core.enc.truncated;
    if (!core.spans.empty()) {
      core.mention_embs = pool_mentions(core.enc.hidden, core.spans);
      core.et_final_logits_t = et_final_logits(core.mention_embs, typing_heads_);
      core.et_ed_logits_t = et_ed_logits(core.mention_embs, typing_heads_);
      core.reps = rc_encode(core.mention_embs, rc_weights_, config_.rc, false,
                            rng);
      if (core.spans.size() >= 2) {
        core.coarse = coarse_logits(core.reps, rc_weights_);
        auto pairs = topk_prune(core.coarse, config_.rc.top_k);
        core.fine = fine_heads(core.reps, core.coarse, pairs, rc_weights_,
                               config_.rc, false, rng);
      }
    }
  }
  const int n_mentions = static_cast<int>(core.spans.size());
  out.mentions = core.spans;
  if (n_mentions == 0) return out;

  std::vector<TypePrediction> type_preds =
      et_forward(core.mention_embs, typing_heads_);
  for (const auto& pred : type_preds) {
    if (config_.type_aggregation == TypeAggregation::kMostFrequent) {
      int best = 0;
      for (std::size_t t = 1; t < pred.et_final_scores.size(); ++t)
        if (pred.et_final_scores[t] > pred.et_final_scores[best])
          best = static_cast<int>(t);
      out.mention_types.push_back({schema_.entity_types[best]});
    } else {
      std::vector<std::string> labels;
      for (std::size_t t = 0; t < pred.et_final_scores.size(); ++t)
        if (pred.et_final_scores[t] >= 0.5)
          labels.push_back(schema_.entity_types[t]);
      out.mention_types.push_back(std::move(labels));
    }
  }

  std::vector<PairScore> pair_scores = decode_pair_scores(core.fine);

  // per-mention entity links
  const bool need_links =
      with_ed || config_.coref.method == ClusterMethod::kEntityLink;
  std::vector<MentionLink> links(n_mentions);
  if (need_links) {
    Tensor kg_scores;
    if (!core.fine.pairs.empty()) kg_scores = sigmoid(core.fine.kg_logits);
    for (int m = 0; m < n_mentions; ++m) {
      auto candidates =
          candidates_for(doc.surface(core.spans[m]), table, kg, config_.ed);
      if (candidates.empty()) continue;
      Tensor ed_context =
          kg_scores.defined()
              ? kg_context_for_mention(
                    core.fine, kg_scores, m,
                    static_cast<int>(schema_.fine_relations.size()))
              : Tensor::zeros(1,
                              static_cast<int>(schema_.fine_relations.size()));
      Tensor t_ed = sigmoid(row(core.et_ed_logits_t, m));
      Tensor scores = sigmoid(ed_scorer_->candidate_logits(
          row(core.mention_embs, m), t_ed, ed_context, candidates, vocab_,
          schema_, false, rng));
      int best = 0;
      for (int c = 1; c < scores.cols(); ++c)
        if (scores.at(0, c) > scores.at(0, best)) best = c;
      links[m] = {candidates[best].entity_id, scores.at(0, best)};
    }
  }
  for (int m = 0; m < n_mentions; ++m) {
    out.mention_entity_ids.push_back(with_ed ? links[m].id : "");
    out.mention_link_scores.push_back(with_ed ? links[m].score : 0.0);
  }

  // coreference clustering
  SimilarityMatrix sim = build_similarity(pair_scores, n_mentions);
  std::vector<std::string> link_ids(n_mentions);
  for (int m = 0; m < n_mentions; ++m) link_ids[m] = links[m].id;
  auto clusters = run_clustering(sim, config_.coref, link_ids);

  for (const auto& members : clusters) {
    PredictedCluster cluster;
    std::vector<TypePrediction> member_preds;
    std::vector<std::pair<std::string, double>> votes;
    for (int m : members) {
      cluster.mentions.push_back(core.spans[m]);
      member_preds.push_back(type_preds[m]);
      votes.emplace_back(links[m].id, links[m].score);
    }
    std::sort(cluster.mentions.begin(), cluster.mentions.end());
    cluster.types = aggregate_cluster_type(member_preds,
                                           config_.type_aggregation, schema_);
    std::sort(cluster.types.begin(), cluster.types.end());
    if (with_ed) cluster.entity_id = majority_vote_cluster_id(votes);
    out.clusters.push_back(std::move(cluster));
  }

  out.triples = aggregate_entity_relations(
      pair_scores, clusters, config_.rc.relation_threshold, schema_);
  return out;
}

SubtaskPredictions JointModel::predict_subtasks(const Document& doc,
                                                const CandidateTable& table,
                                                const KgSnapshot& kg) const {
  NoGradGuard no_grad;
  g_document_forward_passes.fetch_add(1, std::memory_order_relaxed);
  Rng rng(0);

  SubtaskPredictions out;
  GoldMentions gold = flatten_gold(doc, doc.n_tokens());
  Core core = run_core(doc.tokens, gold.spans, false, true, rng);
  out.truncated = core.enc.truncated;
  out.md_spans = bio_decode(argmax_rows(core.md_logits));
  out.gold_mentions = core.spans;
  out.cluster_types.resize(doc.gold_clusters.size());
  out.cluster_entity_ids.resize(doc.gold_clusters.size());
  if (core.spans.empty()) return out;

  GoldMentions survived = flatten_gold(doc, core.enc.n_tokens);
  const auto& mention_cluster = survived.cluster;
  const int n_mentions = static_cast<int>(core.spans.size());

  std::vector<TypePrediction> type_preds =
      et_forward(core.mention_embs, typing_heads_);
  std::vector<PairScore> pair_scores = decode_pair_scores(core.fine);

  // ET: aggregate per gold cluster
  for (std::size_t c = 0; c < doc.gold_clusters.size(); ++c) {
    std::vector<TypePrediction> member_preds;
    for (int m = 0; m < n_mentions; ++m)
      if (mention_cluster[m] == static_cast<int>(c))
        member_preds.push_back(type_preds[m]);
    if (member_preds.empty()) continue;
    out.cluster_types[c] = aggregate_cluster_type(
        member_preds, config_.type_aggregation, schema_);
    std::sort(out.cluster_types[c].begin(), out.cluster_types[c].end());
  }

  // ED: per-mention links, majority vote within each gold cluster
  std::vector<MentionLink> links(n_mentions);
  {
    Tensor kg_scores;
    if (!core.fine.pairs.empty()) kg_scores = sigmoid(core.fine.kg_logits);
    for (int m = 0; m < n_mentions; ++m) {
      auto candidates =
          candidates_for(doc.surface(core.spans[m]), table, kg, config_.ed);
      if (candidates.empty()) continue;
      Tensor ed_context =
          kg_scores.defined()
              ? kg_context_for_mention(
                    core.fine, kg_scores, m,
                    static_cast<int>(schema_.fine_relations.size()))
              : Tensor::zeros(1,
                              static_cast<int>(schema_.fine_relations.size()));
      Tensor t_ed = sigmoid(row(core.et_ed_logits_t, m));
      Tensor scores = sigmoid(ed_scorer_->candidate_logits(
          row(core.mention_embs, m), t_ed, ed_context, candidates, vocab_,
          schema_, false, rng));
      int best = 0;
      for (int c = 1; c < scores.cols(); ++c)
        if (scores.at(0, c) > scores.at(0, best)) best = c;
      links[m] = {candidates[best].entity_id, scores.at(0, best)};
    }
  }
  for (std::size_t c = 0; c < doc.gold_clusters.size(); ++c) {
    std::vector<std::pair<std::string, double>> votes;
    for (int m = 0; m < n_mentions; ++m)
      if (mention_cluster[m] == static_cast<int>(c))
        votes.emplace_back(links[m].id, links[m].score);
    if (votes.empty()) continue;
    out.cluster_entity_ids[c] = majority_vote_cluster_id(votes);
  }

  // Coref over gold mentions
  SimilarityMatrix sim = build_similarity(pair_scores, n_mentions);
  std::vector<std::string> link_ids(n_mentions);
  for (int m = 0; m < n_mentions; ++m) link_ids[m] = links[m].id;
  out.coref_clusters = run_clustering(sim, config_.coref, link_ids);

  // RC over the gold partition, triples indexed by gold cluster
  std::vector<std::vector<int>> gold_partition(doc.gold_clusters.size());
  for (int m = 0; m < n_mentions; ++m)
    gold_partition[mention_cluster[m]].push_back(m);
  out.triples = aggregate_entity_relations(
      pair_scores, gold_partition, config_.rc.relation_threshold, schema_);
  return out;
}

std::uint64_t JointModel::document_forward_passes() {
  return g_document_forward_passes.load(std::memory_order_relaxed);
}

void JointModel::reset_document_forward_passes() {
  g_document_forward_passes.store(0, std::memory_order_relaxed);
}

Vocabulary build_model_vocab(const Corpus& corpus, const KgSnapshot& kg) {
  Vocabulary vocab = build_vocab(corpus);
  for (const auto& entry : kg.entries)
    for (const auto& t : entry.description) vocab.add(t);
  return vocab;
}

// --- checkpoint bundle -------------------------------------------------------

namespace {

json config_to_json(const ModelConfig& c) {
  return {
      {"encoder",
       {{"embedding_dim", c.encoder.embedding_dim},
        {"n_layers", c.encoder.n_layers},
        {"n_heads", c.encoder.n_heads},
        {"max_seq_len", c.encoder.max_seq_len},
        {"dropout", c.encoder.dropout}}},
      {"rc",
       {{"n_layers", c.rc.n_layers},
        {"top_k", c.rc.top_k},
        {"relation_threshold", c.rc.relation_threshold},
        {"n_heads", c.rc.n_heads},
        {"pair_hidden", c.rc.pair_hidden},
        {"dropout", c.rc.dropout}}},
      {"ed",
       {{"max_candidates", c.ed.max_candidates},
        {"description_dim", c.ed.description_dim},
        {"description_layers", c.ed.description_layers},
        {"description_max_tokens", c.ed.description_max_tokens},
        {"description_heads", c.ed.description_heads},
        {"dropout", c.ed.dropout}}},
      {"coref",
       {{"method", to_string(c.coref.method)},
        {"threshold", c.coref.threshold}}},
      {"type_aggregation",
       c.type_aggregation == TypeAggregation::kMostFrequent ? "most_frequent"
                                                            : "union"},
      {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  if (j.contains("encoder")) {
    const auto& e = j["encoder"];
    c.encoder.embedding_dim = e.value("embedding_dim", c.encoder.embedding_dim);
    c.encoder.n_layers = e.value("n_layers", c.encoder.n_layers);
    c.encoder.n_heads = e.value("n_heads", c.encoder.n_heads);
    c.encoder.max_seq_len = e.value("max_seq_len", c.encoder.max_seq_len);
    c.encoder.dropout = e.value("dropout", c.encoder.dropout);
  }
  if (j.contains("rc")) {
    const auto& r = j["rc"];
    c.rc.n_layers = r.value("n_layers", c.rc.n_layers);
    c.rc.top_k = r.value("top_k", c.rc.top_k);
    c.rc.relation_threshold =
        r.value("relation_threshold", c.rc.relation_threshold);
    c.rc.n_heads = r.value("n_heads", c.rc.n_heads);
    c.rc.pair_hidden = r.value("pair_hidden", c.rc.pair_hidden);
    c.rc.dropout = r.value("dropout", c.rc.dropout);
  }
  if (j.contains("ed")) {
    const auto& e = j["ed"];
    c.ed.max_candidates = e.value("max_candidates", c.ed.max_candidates);
    c.ed.description_dim = e.value("description_dim", c.ed.description_dim);
    c.ed.description_layers =
        e.value("description_layers", c.ed.description_layers);
    c.ed.description_max_tokens =
        e.value("description_max_tokens", c.ed.description_max_tokens);
    c.ed.description_heads =
        e.value("description_heads", c.ed.description_heads);
    c.ed.dropout = e.value("dropout", c.ed.dropout);
  }
  if (j.contains("coref")) {
    const auto& k = j["coref"];
    if (k.contains("method"))
      c.coref.method = cluster_method_from_string(k["method"].get<std::string>());
    c.coref.threshold = k.value("threshold", c.coref.threshold);
  }
  if (j.contains("type_aggregation")) {
    const auto mode = j["type_aggregation"].get<std::string>();
    if (mode == "most_frequent")
      c.type_aggregation = TypeAggregation::kMostFrequent;
    else if (mode == "union")
      c.type_aggregation = TypeAggregation::kUnion;
    else
      throw ConfigError("unknown type_aggregation '" + mode + "'");
  }
  c.seed = j.value("seed", c.seed);
  return c;
}

}  // namespace

ModelConfig model_config_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return config_from_json(j);
}

std::string model_config_to_json(const ModelConfig& config) {
  return config_to_json(config).dump(1);
}

void save_model(const JointModel& model, const CandidateTable& table,
                const KgSnapshot& kg, const std::string& prefix) {
  model.params().save(prefix + ".params");
  json meta;
  meta["schema"] = json::parse(serialize_schema(model.schema()));
  meta["vocab"] = model.vocab().tokens();
  meta["config"] = config_to_json(model.config());
  json jtable = json::object();
  for (const auto& [surface, ranked] : table.entries) {
    json list = json::array();
    for (const auto& [id, prior] : ranked) list.push_back({id, prior});
    jtable[surface] = list;
  }
  meta["candidate_table"] = jtable;
  meta["kg"] = json::parse(serialize_kg(kg));
  std::ofstream out(prefix + ".meta.json");
  if (!out) throw ValidationError("cannot write checkpoint meta: " + prefix);
  out << meta.dump(1) << '\n';
}

ModelBundle load_model(const std::string& prefix) {
  std::ifstream in(prefix + ".meta.json");
  if (!in)
    throw ValidationError("cannot open checkpoint meta: " + prefix +
                          ".meta.json");
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("checkpoint meta: ") + e.what());
  }
  Schema schema = parse_schema_json(meta.at("schema").dump());
  Vocabulary vocab =
      Vocabulary::from_tokens(meta.at("vocab").get<std::vector<std::string>>());
  ModelConfig config = config_from_json(meta.at("config"));

  ModelBundle bundle;
  bundle.model = std::make_unique<JointModel>(schema, vocab, config);
  bundle.model->params().load(prefix + ".params");
  for (const auto& [surface, list] : meta.at("candidate_table").items()) {
    std::vector<std::pair<std::string, double>> ranked;
    for (const auto& entry : list)
      ranked.emplace_back(entry.at(0).get<std::string>(),
                          entry.at(1).get<double>());
    bundle.table.entries[surface] = std::move(ranked);
  }
  bundle.kg = parse_kg_json(meta.at("kg").dump());
  return bundle;
}

}  // namespace docie
