#include "docie/relation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "docie/error.hpp"

namespace docie {

void RcConfig::validate() const {
  if (n_layers < 0 || n_heads <= 0 || pair_hidden <= 0)
    throw ConfigError("rc: non-positive dimensions");
  if (top_k < 1) throw ConfigError("rc: top_k must be >= 1");
  if (relation_threshold <= 0.0 || relation_threshold >= 1.0)
    throw ConfigError("rc: relation_threshold outside (0, 1)");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("rc: dropout outside [0, 1)");
}

RcWeights make_rc_weights(ParamStore& store, int dim, const RcConfig& config,
                          int n_relations, int n_fine_relations, Rng& rng) {
  config.validate();
  const double w_scale = 0.4 / std::sqrt(static_cast<double>(dim));
  const double h_scale = 0.4 / std::sqrt(static_cast<double>(config.pair_hidden));
  RcWeights w;
  for (int l = 0; l < config.n_layers; ++l)
    w.layers.push_back(make_transformer_layer(
        store, "rc.layer" + std::to_string(l), dim, rng));
  w.coarse_bilinear = store.create("rc.coarse.bilinear", dim, dim, w_scale, rng);
  w.coarse_bias = store.create("rc.coarse.bias", 1, 1, 0.0, rng);
  w.pair_w1 = store.create("rc.pair.w1", 2 * dim, config.pair_hidden, w_scale,
                           rng);
  w.pair_b1 = store.create("rc.pair.b1", 1, config.pair_hidden, 0.0, rng);
  w.rel_weight = store.create("rc.rel.weight", config.pair_hidden, n_relations,
                              h_scale, rng);
  w.rel_bias = store.create("rc.rel.bias", 1, n_relations, 0.0, rng);
  w.coref_weight =
      store.create("rc.coref.weight", config.pair_hidden, 1, h_scale, rng);
  w.coref_bias = store.create("rc.coref.bias", 1, 1, 0.0, rng);
  w.kg_weight = store.create("rc.kg.weight", config.pair_hidden,
                             n_fine_relations, h_scale, rng);
  w.kg_bias = store.create("rc.kg.bias", 1, n_fine_relations, 0.0, rng);
  return w;
}

Tensor rc_encode(const Tensor& mention_embeddings, const RcWeights& weights,
                 const RcConfig& config, bool training, Rng& rng) {
  if (!mention_embeddings.defined()) return {};
  return transformer_stack(mention_embeddings, weights.layers, config.n_heads,
                           config.dropout, training, rng);
}

Tensor coarse_logits(const Tensor& reps, const RcWeights& weights) {
  Tensor raw = bilinear(reps, weights.coarse_bilinear, reps);
  Tensor symmetric = scale(add(raw, transpose(raw)), 0.5);
  return add_scalar(symmetric, weights.coarse_bias);
}

std::vector<std::pair<int, int>> all_pairs(int n) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.emplace_back(i, j);
  return pairs;
}

std::vector<std::pair<int, int>> topk_prune(const Tensor& coarse, int k) {
  if (k < 1) throw ContractError("topk_prune: k must be >= 1");
  const int n = coarse.rows();
  struct Entry {
    double score;
    int i, j;
  };
  std::vector<Entry> entries;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      entries.push_back({coarse.at(i, j), i, j});
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
  });
  if (static_cast<int>(entries.size()) > k) entries.resize(k);
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(entries.size());
  for (const auto& e : entries) pairs.emplace_back(e.i, e.j);
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

FineOutputs fine_heads(const Tensor& reps, const Tensor& coarse,
                       const std::vector<std::pair<int, int>>& pairs,
                       const RcWeights& weights, const RcConfig& config,
                       bool training, Rng& rng) {
  FineOutputs out;
  out.pairs = pairs;
  if (pairs.empty()) return out;

  std::vector<int> heads, tails, flat;
  heads.reserve(pairs.size());
  tails.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    heads.push_back(i);
    tails.push_back(j);
    flat.push_back(i * coarse.cols() + j);
  }
  Tensor ri = embedding_rows(reps, heads);
  Tensor rj = embedding_rows(reps, tails);

  auto pair_hidden = [&](const Tensor& a, const Tensor& b) {
    Tensor h = gelu(add_bias(matmul(concat_cols({a, b}), weights.pair_w1),
                             weights.pair_b1));
    return dropout(h, config.dropout, rng, training);
  };
  Tensor hidden_ij = pair_hidden(ri, rj);
  Tensor hidden_ji = pair_hidden(rj, ri);

  out.rel_logits_ij =
      add_bias(matmul(hidden_ij, weights.rel_weight), weights.rel_bias);
  out.rel_logits_ji =
      add_bias(matmul(hidden_ji, weights.rel_weight), weights.rel_bias);
  out.coref_logits =
      add_bias(matmul(hidden_ij, weights.coref_weight), weights.coref_bias);
  out.kg_logits =
      add_bias(matmul(hidden_ij, weights.kg_weight), weights.kg_bias);
  out.coarse_pair_logits = gather(coarse, flat);
  return out;
}

std::vector<PairScore> decode_pair_scores(const FineOutputs& fine) {
  std::vector<PairScore> scores;
  if (fine.pairs.empty()) return scores;
  NoGradGuard no_grad;
  Tensor rel_ij = sigmoid(fine.rel_logits_ij);
  Tensor rel_ji = sigmoid(fine.rel_logits_ji);
  Tensor coref = sigmoid(fine.coref_logits);
  Tensor kg = sigmoid(fine.kg_logits);
  Tensor coarse = sigmoid(fine.coarse_pair_logits);
  const int n_rel = rel_ij.cols();
  const int n_kg = kg.cols();
  scores.resize(fine.pairs.size());
  for (std::size_t p = 0; p < fine.pairs.size(); ++p) {
    auto& s = scores[p];
    s.i = fine.pairs[p].first;
    s.j = fine.pairs[p].second;
    s.coarse = coarse.at(0, static_cast<int>(p));
    s.coref = coref.at(static_cast<int>(p), 0);
    s.relation_scores_ij.resize(n_rel);
    s.relation_scores_ji.resize(n_rel);
    for (int r = 0; r < n_rel; ++r) {
      s.relation_scores_ij[r] = rel_ij.at(static_cast<int>(p), r);
      s.relation_scores_ji[r] = rel_ji.at(static_cast<int>(p), r);
    }
    s.kg_relation_scores.resize(n_kg);
    for (int r = 0; r < n_kg; ++r)
      s.kg_relation_scores[r] = kg.at(static_cast<int>(p), r);
  }
  return scores;
}

namespace {

// (head cluster, tail cluster, relation index) set from the gold triples.
std::set<std::tuple<int, int, int>> triple_index(
    const std::vector<Triple>& gold_triples, const Schema& schema) {
  std::set<std::tuple<int, int, int>> index;
  for (const auto& t : gold_triples) {
    const int r = schema.relation_index(t.relation);
    if (r < 0)
      throw ContractError("rc_loss: unknown relation '" + t.relation + "'");
    index.insert({t.head, t.tail, r});
  }
  return index;
}

}  // namespace

Tensor rc_loss(const FineOutputs& fine,
               const std::vector<int>& mention_cluster,
               const std::vector<Triple>& gold_triples, const Schema& schema) {
  if (fine.pairs.empty()) return Tensor::scalar(0.0);
  const int n_rel = static_cast<int>(schema.relations.size());
  const auto gold = triple_index(gold_triples, schema);
  const std::size_t n_pairs = fine.pairs.size();

  std::vector<double> targets_ij(n_pairs * n_rel, 0.0);
  std::vector<double> targets_ji(n_pairs * n_rel, 0.0);
  std::vector<double> coarse_targets(n_pairs, 0.0);
  for (std::size_t p = 0; p < n_pairs; ++p) {
    const auto [i, j] = fine.pairs[p];
    const int ci = mention_cluster[i];
    const int cj = mention_cluster[j];
    if (ci < 0 || cj < 0) continue;
    bool connected = false;
    for (int r = 0; r < n_rel; ++r) {
      if (gold.count({ci, cj, r})) {
        targets_ij[p * n_rel + r] = 1.0;
        connected = true;
      }
      if (gold.count({cj, ci, r})) {
        targets_ji[p * n_rel + r] = 1.0;
        connected = true;
      }
    }
    if (connected || ci == cj) coarse_targets[p] = 1.0;
  }

  Tensor rel_part = scale(add(bce_with_logits(fine.rel_logits_ij, targets_ij),
                              bce_with_logits(fine.rel_logits_ji, targets_ji)),
                          0.5);
  // Auxiliary supervision of the coarse stage: a pair is connected when it is
  // coreferent or participates in any gold relation.
  Tensor coarse_part = bce_with_logits(fine.coarse_pair_logits, coarse_targets);
  return add(rel_part, coarse_part);
}

Tensor coref_loss(const FineOutputs& fine,
                  const std::vector<int>& mention_cluster) {
  if (fine.pairs.empty()) return Tensor::scalar(0.0);
  std::vector<double> targets(fine.pairs.size(), 0.0);
  for (std::size_t p = 0; p < fine.pairs.size(); ++p) {
    const auto [i, j] = fine.pairs[p];
    if (mention_cluster[i] >= 0 && mention_cluster[i] == mention_cluster[j])
      targets[p] = 1.0;
  }
  return bce_with_logits(fine.coref_logits, targets);
}

std::vector<Triple> aggregate_entity_relations(
    const std::vector<PairScore>& pair_scores,
    const std::vector<std::vector<int>>& clusters, double threshold,
    const Schema& schema) {
  // mention index -> cluster index
  std::map<int, int> cluster_of;
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (int m : clusters[c]) cluster_of[m] = static_cast<int>(c);

  const int n_rel = static_cast<int>(schema.relations.size());
  std::map<std::tuple<int, int, int>, double> best;
  for (const auto& s : pair_scores) {
    auto it_i = cluster_of.find(s.i);
    auto it_j = cluster_of.find(s.j);
    if (it_i == cluster_of.end() || it_j == cluster_of.end()) continue;
    const int ci = it_i->second, cj = it_j->second;
    if (ci == cj) continue;
    for (int r = 0; r < n_rel; ++r) {
      auto& fwd = best[{ci, cj, r}];
      fwd = std::max(fwd, s.relation_scores_ij[r]);
      auto& rev = best[{cj, ci, r}];
      rev = std::max(rev, s.relation_scores_ji[r]);
    }
  }
  std::vector<Triple> triples;
  for (const auto& [key, score] : best) {
    if (score < threshold) continue;
    const auto [head, tail, r] = key;
    triples.push_back({head, tail, schema.relations[r]});
  }
  return triples;
}

}  // namespace docie
