#include "docie/disambig.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "docie/error.hpp"

namespace docie {

void EdConfig::validate() const {
  if (max_candidates <= 0 || description_dim <= 0 || description_layers < 0 ||
      description_max_tokens <= 0 || description_heads <= 0)
    throw ConfigError("ed: non-positive configuration value");
  if (description_dim % description_heads != 0)
    throw ConfigError("ed: description_dim not divisible by heads");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("ed: dropout outside [0, 1)");
}

std::vector<CandidateEntity> candidates_for(const std::string& surface,
                                            const CandidateTable& table,
                                            const KgSnapshot& kg,
                                            const EdConfig& config) {
  std::vector<CandidateEntity> out;
  const auto* ranked = table.lookup(surface);
  if (!ranked) return out;
  for (const auto& [id, prior] : *ranked) {
    if (static_cast<int>(out.size()) >= config.max_candidates) break;
    CandidateEntity cand;
    cand.entity_id = id;
    cand.pem = prior;
    if (const KgEntry* entry = kg.find(id)) {
      cand.description_tokens = entry->description;
      cand.gold_fine_types = entry->fine_types;
    }
    if (cand.description_tokens.empty())
      cand.description_tokens = {"<pad>"};
    if (static_cast<int>(cand.description_tokens.size()) >
        config.description_max_tokens)
      cand.description_tokens.resize(config.description_max_tokens);
    out.push_back(std::move(cand));
  }
  return out;
}

EdScorer::EdScorer(ParamStore& store, int encoder_dim, int vocab_size,
                   int n_fine_types, int n_fine_relations,
                   const EdConfig& config, Rng& rng)
    : config_(config), n_fine_types_(n_fine_types) {
  config_.validate();
  const int dim = config_.description_dim;
  const double w_scale = 0.4 / std::sqrt(static_cast<double>(dim));
  desc_token_embedding_ =
      store.create("ed.desc.token_embedding", vocab_size, dim, 0.1, rng);
  desc_pos_embedding_ = store.create("ed.desc.pos_embedding",
                                     config_.description_max_tokens, dim, 0.1,
                                     rng);
  for (int l = 0; l < config_.description_layers; ++l)
    desc_layers_.push_back(make_transformer_layer(
        store, "ed.desc.layer" + std::to_string(l), dim, rng));
  desc_final_gain_ = store.create("ed.desc.final.gain", 1, dim, 0.0, rng);
  desc_final_gain_.values_mut().assign(dim, 1.0);
  desc_final_bias_ = store.create("ed.desc.final.bias", 1, dim, 0.0, rng);
  mention_proj_ = store.create("ed.mention_proj", encoder_dim, dim,
                               0.4 / std::sqrt(double(encoder_dim)), rng);
  rel_proj_ = store.create("ed.rel_proj", n_fine_relations, dim, w_scale, rng);
  w_dot_ = store.create("ed.w_dot", 1, 1, 0.0, rng);
  w_dot_.values_mut()[0] = 1.0;
  w_type_ = store.create("ed.w_type", 1, 1, 0.0, rng);
  w_type_.values_mut()[0] = 1.0;
  w_rel_ = store.create("ed.w_rel", 1, 1, 0.0, rng);
  w_rel_.values_mut()[0] = 1.0;
  w_pem_ = store.create("ed.w_pem", 1, 1, 0.0, rng);
  w_pem_.values_mut()[0] = 1.0;
  bias_ = store.create("ed.bias", 1, 1, 0.0, rng);
}

Tensor EdScorer::encode_description(const std::vector<std::string>& tokens,
                                    const Vocabulary& vocab, bool training,
                                    Rng& rng) const {
  std::vector<int> ids, positions;
  const int limit = config_.description_max_tokens;
  for (const auto& t : tokens) {
    if (static_cast<int>(ids.size()) >= limit) break;
    ids.push_back(vocab.id_of(t));
    positions.push_back(static_cast<int>(positions.size()));
  }
  if (ids.empty()) {
    ids.push_back(Vocabulary::kPad);
    positions.push_back(0);
  }
  Tensor h = add(embedding_rows(desc_token_embedding_, ids),
                 embedding_rows(desc_pos_embedding_, positions));
  h = transformer_stack(h, desc_layers_, config_.description_heads,
                        config_.dropout, training, rng);
  h = layer_norm_rows(h, desc_final_gain_, desc_final_bias_);
  return mean_rows(h);
}

Tensor EdScorer::candidate_logits(const Tensor& mention_embedding,
                                  const Tensor& et_ed_scores,
                                  const Tensor& kg_relation_context,
                                  const std::vector<CandidateEntity>& candidates,
                                  const Vocabulary& vocab, const Schema& schema,
                                  bool training, Rng& rng) const {
  if (candidates.empty())
    throw ContractError("candidate_logits: empty candidate list");
  const int nc = static_cast<int>(candidates.size());

  std::vector<Tensor> desc_rows;
  desc_rows.reserve(nc);
  for (const auto& cand : candidates)
    desc_rows.push_back(
        encode_description(cand.description_tokens, vocab, training, rng));
  Tensor descriptions = concat_rows(desc_rows);  // [nc, desc_dim]

  // fine-type compatibility: mean of the predicted scores over the
  // candidate's KG types
  std::vector<double> indicator(static_cast<std::size_t>(n_fine_types_) * nc,
                                0.0);
  for (int c = 0; c < nc; ++c) {
    const auto& types = candidates[c].gold_fine_types;
    if (types.empty()) continue;
    const double weight = 1.0 / static_cast<double>(types.size());
    for (const auto& label : types) {
      const int t = schema.fine_type_index(label);
      if (t >= 0) indicator[static_cast<std::size_t>(t) * nc + c] = weight;
    }
  }
  Tensor type_feat = matmul(
      et_ed_scores, Tensor::from_values(n_fine_types_, nc, indicator));

  Tensor mention_dot =
      matmul(matmul(mention_embedding, mention_proj_), transpose(descriptions));
  Tensor rel_dot =
      matmul(matmul(kg_relation_context, rel_proj_), transpose(descriptions));

  std::vector<double> pem(nc);
  for (int c = 0; c < nc; ++c) pem[c] = candidates[c].pem;
  Tensor pem_feat = Tensor::from_values(1, nc, pem);

  Tensor logits = add(mul_scalar(mention_dot, w_dot_),
                      mul_scalar(type_feat, w_type_));
  logits = add(logits, mul_scalar(rel_dot, w_rel_));
  logits = add(logits, mul_scalar(pem_feat, w_pem_));
  return add_scalar(logits, bias_);
}

Tensor ed_loss(const std::vector<Tensor>& candidate_logits,
               const std::vector<int>& gold_index) {
  if (candidate_logits.size() != gold_index.size())
    throw ContractError("ed_loss: one gold index per mention required");
  std::vector<Tensor> rows;
  std::vector<double> targets, mask;
  for (std::size_t m = 0; m < candidate_logits.size(); ++m) {
    if (!candidate_logits[m].defined()) continue;  // NIL mention, no candidates
    rows.push_back(candidate_logits[m]);
    const int nc = candidate_logits[m].cols();
    const bool supervised = gold_index[m] >= 0;
    for (int c = 0; c < nc; ++c) {
      targets.push_back(c == gold_index[m] ? 1.0 : 0.0);
      mask.push_back(supervised ? 1.0 : 0.0);
    }
  }
  if (rows.empty()) return Tensor::scalar(0.0);
  return bce_with_logits(concat_cols(rows), targets, mask);
}

std::string majority_vote_cluster_id(
    const std::vector<std::pair<std::string, double>>& mention_votes) {
  if (mention_votes.empty())
    throw ContractError("majority_vote_cluster_id: empty cluster");
  std::map<std::string, std::pair<int, double>> tally;  // id -> (votes, score)
  for (const auto& [id, score] : mention_votes) {
    if (id.empty()) continue;
    auto& entry = tally[id];
    entry.first += 1;
    entry.second += score;
  }
  std::string best;
  std::pair<int, double> best_stat{0, 0.0};
  for (const auto& [id, stat] : tally) {
    const bool wins = stat.first > best_stat.first ||
                      (stat.first == best_stat.first &&
                       (stat.second > best_stat.second ||
                        (stat.second == best_stat.second &&
                         (best.empty() || id < best))));
    if (wins) {
      best = id;
      best_stat = stat;
    }
  }
  return best;  // empty when every vote was NIL
}

}  // namespace docie
