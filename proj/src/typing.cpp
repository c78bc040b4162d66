#include "docie/typing.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "docie/error.hpp"

namespace docie {

TypingHeads make_typing_heads(ParamStore& store, int dim, int n_types,
                              int n_fine_types, Rng& rng) {
  const double scale = 0.5 / std::sqrt(static_cast<double>(dim));
  TypingHeads heads;
  heads.final_weight = store.create("et.final.weight", dim, n_types, scale, rng);
  heads.final_bias = store.create("et.final.bias", 1, n_types, 0.0, rng);
  heads.ed_weight = store.create("et.ed.weight", dim, n_fine_types, scale, rng);
  heads.ed_bias = store.create("et.ed.bias", 1, n_fine_types, 0.0, rng);
  return heads;
}

Tensor et_final_logits(const Tensor& mentions, const TypingHeads& heads) {
  return add_bias(matmul(mentions, heads.final_weight), heads.final_bias);
}

Tensor et_ed_logits(const Tensor& mentions, const TypingHeads& heads) {
  return add_bias(matmul(mentions, heads.ed_weight), heads.ed_bias);
}

std::vector<TypePrediction> et_forward(const Tensor& mentions,
                                       const TypingHeads& heads) {
  Tensor final_scores = sigmoid(et_final_logits(mentions, heads));
  Tensor ed_scores = sigmoid(et_ed_logits(mentions, heads));
  std::vector<TypePrediction> out(mentions.rows());
  for (int r = 0; r < mentions.rows(); ++r) {
    out[r].et_final_scores.resize(final_scores.cols());
    for (int c = 0; c < final_scores.cols(); ++c)
      out[r].et_final_scores[c] = final_scores.at(r, c);
    out[r].et_ed_scores.resize(ed_scores.cols());
    for (int c = 0; c < ed_scores.cols(); ++c)
      out[r].et_ed_scores[c] = ed_scores.at(r, c);
  }
  return out;
}

Tensor et_loss(const Tensor& final_logits,
               const std::vector<std::vector<std::string>>& gold_types,
               const Schema& schema) {
  const int n_types = static_cast<int>(schema.entity_types.size());
  if (final_logits.cols() != n_types)
    throw ContractError("et_loss: logits width does not match schema");
  if (gold_types.size() != static_cast<std::size_t>(final_logits.rows()))
    throw ContractError("et_loss: one gold type set per mention required");
  std::vector<double> targets(final_logits.size(), 0.0);
  for (std::size_t m = 0; m < gold_types.size(); ++m) {
    for (const auto& label : gold_types[m]) {
      const int t = schema.type_index(label);
      if (t < 0) throw ContractError("et_loss: unknown type '" + label + "'");
      targets[m * n_types + t] = 1.0;
    }
  }
  return bce_with_logits(final_logits, targets);
}

std::vector<std::string> aggregate_cluster_type(
    const std::vector<TypePrediction>& mention_predictions,
    TypeAggregation mode, const Schema& schema) {
  if (mention_predictions.empty())
    throw ContractError("aggregate_cluster_type: empty cluster");
  if (mode == TypeAggregation::kMostFrequent) {
    std::vector<int> votes(schema.entity_types.size(), 0);
    for (const auto& pred : mention_predictions) {
      int best = 0;
      for (std::size_t t = 1; t < pred.et_final_scores.size(); ++t)
        if (pred.et_final_scores[t] > pred.et_final_scores[best])
          best = static_cast<int>(t);
      votes[best]++;
    }
    int winner = 0;
    for (std::size_t t = 1; t < votes.size(); ++t)
      if (votes[t] > votes[winner]) winner = static_cast<int>(t);
    return {schema.entity_types[winner]};
  }
  std::vector<bool> present(schema.entity_types.size(), false);
  for (const auto& pred : mention_predictions)
    for (std::size_t t = 0; t < pred.et_final_scores.size(); ++t)
      if (pred.et_final_scores[t] >= 0.5) present[t] = true;
  std::vector<std::string> out;
  for (std::size_t t = 0; t < present.size(); ++t)
    if (present[t]) out.push_back(schema.entity_types[t]);
  return out;
}

}  // namespace docie
