#ifndef DOCIE_RELATION_HPP_
#define DOCIE_RELATION_HPP_

#include <utility>
#include <vector>

#include "docie/corpus.hpp"
#include "docie/encoder.hpp"
#include "docie/optim.hpp"
#include "docie/tensor.hpp"

namespace docie {

struct RcConfig {
  int n_layers = 4;
  int top_k = 2000;
  double relation_threshold = 0.2;
  int n_heads = 4;
  int pair_hidden = 64;
  double dropout = 0.1;

  void validate() const;
};

// Scores for one unordered mention pair (i < j) that survived pruning.
// Relation scores are kept for both orientations because triples are
// directed while the coarse stage and coreference are not.
struct PairScore {
  int i = 0;
  int j = 0;
  double coarse = 0.0;
  double coref = 0.0;
  std::vector<double> relation_scores_ij;  // i as head, j as tail
  std::vector<double> relation_scores_ji;  // j as head, i as tail
  std::vector<double> kg_relation_scores;  // RC_ed head, canonical order
};

struct RcWeights {
  std::vector<TransformerLayer> layers;  // cross-attention encoder
  Tensor coarse_bilinear;                // [dim, dim]
  Tensor coarse_bias;                    // [1, 1]
  Tensor pair_w1, pair_b1;               // [2*dim, hidden], [1, hidden]
  Tensor rel_weight, rel_bias;           // [hidden, |R|]
  Tensor coref_weight, coref_bias;       // [hidden, 1]
  Tensor kg_weight, kg_bias;             // [hidden, |fine_relations|]
};

RcWeights make_rc_weights(ParamStore& store, int dim, const RcConfig& config,
                          int n_relations, int n_fine_relations, Rng& rng);

// Contextualises mention embeddings against each other. Zero mentions give
// an undefined tensor (callers must check), a single mention is fine.
Tensor rc_encode(const Tensor& mention_embeddings, const RcWeights& weights,
                 const RcConfig& config, bool training, Rng& rng);

// Symmetric all-pairs connectedness logits [n, n]:
// (X W X^T + (X W X^T)^T) / 2 + bias.
Tensor coarse_logits(const Tensor& reps, const RcWeights& weights);

// The k unordered pairs (i < j) with the highest coarse scores, tie-broken
// lexicographically; the result is sorted by (i, j).
std::vector<std::pair<int, int>> topk_prune(const Tensor& coarse, int k);

// All unordered pairs of n mentions in (i, j) order.
std::vector<std::pair<int, int>> all_pairs(int n);

// Differentiable fine-stage outputs for the surviving pairs.
struct FineOutputs {
  std::vector<std::pair<int, int>> pairs;
  Tensor rel_logits_ij;  // [P, |R|]
  Tensor rel_logits_ji;  // [P, |R|]
  Tensor coref_logits;   // [P, 1]
  Tensor kg_logits;      // [P, |fine_relations|]
  Tensor coarse_pair_logits;  // [1, P] gathered from the coarse matrix
};

FineOutputs fine_heads(const Tensor& reps, const Tensor& coarse,
                       const std::vector<std::pair<int, int>>& pairs,
                       const RcWeights& weights, const RcConfig& config,
                       bool training, Rng& rng);

// Plain-value view of the fine outputs (sigmoid applied).
std::vector<PairScore> decode_pair_scores(const FineOutputs& fine);

// Mention-level gold labels for L_r: ordered pair (a, b) is positive for
// relation r iff the gold clusters of a and b participate in a gold triple
// (cluster(a), r, cluster(b)). `mention_cluster` maps mention index to gold
// cluster index (-1 when unknown).
Tensor rc_loss(const FineOutputs& fine,
               const std::vector<int>& mention_cluster,
               const std::vector<Triple>& gold_triples,
               const Schema& schema);

// BCE on the coref logits of surviving pairs; positive iff both mentions
// share a gold cluster.
Tensor coref_loss(const FineOutputs& fine,
                  const std::vector<int>& mention_cluster);

// Entity-level triples: score(c1, r, c2) is the max over ordered mention
// pairs; a triple is emitted when the score reaches the threshold.
std::vector<Triple> aggregate_entity_relations(
    const std::vector<PairScore>& pair_scores,
    const std::vector<std::vector<int>>& clusters, double threshold,
    const Schema& schema);

}  // namespace docie

#endif  // DOCIE_RELATION_HPP_
