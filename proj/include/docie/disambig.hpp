#ifndef DOCIE_DISAMBIG_HPP_
#define DOCIE_DISAMBIG_HPP_

#include <string>
#include <utility>
#include <vector>

#include "docie/corpus.hpp"
#include "docie/encoder.hpp"
#include "docie/kg.hpp"
#include "docie/optim.hpp"
#include "docie/tensor.hpp"

namespace docie {

struct EdConfig {
  int max_candidates = 30;
  int description_dim = 300;
  int description_layers = 2;
  int description_max_tokens = 32;
  int description_heads = 4;
  double dropout = 0.1;

  void validate() const;
};

struct CandidateEntity {
  std::string entity_id;
  std::vector<std::string> description_tokens;  // <= max tokens, never empty
  double pem = 0.0;
  std::vector<std::string> gold_fine_types;  // from the KG snapshot
};

// Ranked candidates for a mention surface, joining the candidate table with
// the KG snapshot. Unknown surfaces yield an empty list (NIL mention).
std::vector<CandidateEntity> candidates_for(const std::string& surface,
                                            const CandidateTable& table,
                                            const KgSnapshot& kg,
                                            const EdConfig& config);

// Learned combination of mention/description affinity, fine-type
// compatibility, KG-relation context and the PEM prior. The fine-type and
// KG-relation inputs are graph tensors, so the disambiguation loss trains
// the ET_ed and RC_ed heads through this scorer.
class EdScorer {
 public:
  EdScorer(ParamStore& store, int encoder_dim, int vocab_size,
           int n_fine_types, int n_fine_relations, const EdConfig& config,
           Rng& rng);

  // [1, description_dim] embedding of a candidate description.
  Tensor encode_description(const std::vector<std::string>& tokens,
                            const Vocabulary& vocab, bool training,
                            Rng& rng) const;

  // Per-candidate logits [1, n_candidates]. `et_ed_scores` is [1, n_fine
  // types], `kg_relation_context` is [1, n_fine_relations] (zeros when the
  // mention has no surviving pairs).
  Tensor candidate_logits(const Tensor& mention_embedding,
                          const Tensor& et_ed_scores,
                          const Tensor& kg_relation_context,
                          const std::vector<CandidateEntity>& candidates,
                          const Vocabulary& vocab, const Schema& schema,
                          bool training, Rng& rng) const;

  const EdConfig& config() const { return config_; }

 private:
  EdConfig config_;
  int n_fine_types_;
  std::vector<TransformerLayer> desc_layers_;
  Tensor desc_token_embedding_;
  Tensor desc_pos_embedding_;
  Tensor desc_final_gain_, desc_final_bias_;
  Tensor mention_proj_;  // [encoder_dim, description_dim]
  Tensor rel_proj_;      // [n_fine_relations, description_dim]
  Tensor w_dot_, w_type_, w_rel_, w_pem_, bias_;  // [1, 1] each
};

// BCE with target 1 on the gold candidate and 0 elsewhere. `gold_index[m]`
// is -1 when the mention's gold id is absent from its candidates; such
// mentions are excluded from the loss.
Tensor ed_loss(const std::vector<Tensor>& candidate_logits,
               const std::vector<int>& gold_index);

// Modal non-NIL id; ties break on the higher summed score, then the
// lexicographically smaller id. All-NIL votes give NIL ("").
std::string majority_vote_cluster_id(
    const std::vector<std::pair<std::string, double>>& mention_votes);

}  // namespace docie

#endif  // DOCIE_DISAMBIG_HPP_
