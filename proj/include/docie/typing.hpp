#ifndef DOCIE_TYPING_HPP_
#define DOCIE_TYPING_HPP_

#include <string>
#include <vector>

#include "docie/corpus.hpp"
#include "docie/optim.hpp"
#include "docie/tensor.hpp"

namespace docie {

// Per-mention sigmoid scores from the two typing heads.
struct TypePrediction {
  std::vector<double> et_final_scores;  // over Schema.entity_types
  std::vector<double> et_ed_scores;     // over Schema.fine_types
};

struct TypingHeads {
  Tensor final_weight, final_bias;  // [dim, |T|], [1, |T|]
  Tensor ed_weight, ed_bias;        // [dim, |fine|], [1, |fine|]
};

TypingHeads make_typing_heads(ParamStore& store, int dim, int n_types,
                              int n_fine_types, Rng& rng);

// Unnormalised logits for each head; sigmoid is applied by the callers that
// need probabilities.
Tensor et_final_logits(const Tensor& mentions, const TypingHeads& heads);
Tensor et_ed_logits(const Tensor& mentions, const TypingHeads& heads);

// Both heads with sigmoid applied, one TypePrediction per mention row.
std::vector<TypePrediction> et_forward(const Tensor& mentions,
                                       const TypingHeads& heads);

// BCE over the ET_final head only; the ET_ed head gets no direct supervision
// here (it trains through the disambiguation loss).
Tensor et_loss(const Tensor& final_logits,
               const std::vector<std::vector<std::string>>& gold_types,
               const Schema& schema);

enum class TypeAggregation { kMostFrequent, kUnion };

// Cluster-level types from per-mention predictions. most_frequent keeps the
// modal argmax type (ties to the lowest schema index); union thresholds each
// mention at 0.5 and unions the label sets.
std::vector<std::string> aggregate_cluster_type(
    const std::vector<TypePrediction>& mention_predictions,
    TypeAggregation mode, const Schema& schema);

}  // namespace docie

#endif  // DOCIE_TYPING_HPP_
