#ifndef DOCIE_MENTION_HPP_
#define DOCIE_MENTION_HPP_

#include <vector>

#include "docie/corpus.hpp"
#include "docie/optim.hpp"
#include "docie/tensor.hpp"

namespace docie {

// BIO token labels.
enum class BioTag : int { O = 0, B = 1, I = 2 };

// First token of each span B, remaining tokens I, everything else O.
// Overlapping spans cannot be expressed and raise ContractError naming the
// offending pair.
std::vector<int> bio_encode(const std::vector<MentionSpan>& spans,
                            int n_tokens);

// Maximal B[I]* runs become spans; a stray I with no open span starts a new
// one. Never emits overlapping or empty spans.
std::vector<MentionSpan> bio_decode(const std::vector<int>& labels);

struct MentionHead {
  Tensor weight;  // [dim, 3]
  Tensor bias;    // [1, 3]
};

MentionHead make_mention_head(ParamStore& store, int dim, Rng& rng);

// Token-level 3-class logits [n_tokens, 3].
Tensor md_forward(const Tensor& hidden, const MentionHead& head);

// Average of the hidden rows covered by the span.
Tensor pool_mention(const Tensor& hidden, const MentionSpan& span);

// One pooled embedding per span, stacked to [n_spans, dim].
Tensor pool_mentions(const Tensor& hidden,
                     const std::vector<MentionSpan>& spans);

}  // namespace docie

#endif  // DOCIE_MENTION_HPP_
