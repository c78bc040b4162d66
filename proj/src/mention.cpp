#include "docie/mention.hpp"

#include <algorithm>

#include "docie/error.hpp"

namespace docie {

std::vector<int> bio_encode(const std::vector<MentionSpan>& spans,
                            int n_tokens) {
  auto sorted = spans;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i - 1].end > sorted[i].start)
      throw ContractError(
          "bio_encode: overlapping spans [" +
          std::to_string(sorted[i - 1].start) + ", " +
          std::to_string(sorted[i - 1].end) + ") and [" +
          std::to_string(sorted[i].start) + ", " +
          std::to_string(sorted[i].end) + ")");
  }
  std::vector<int> labels(n_tokens, static_cast<int>(BioTag::O));
  for (const auto& span : sorted) {
    if (span.start < 0 || span.end > n_tokens || span.start >= span.end)
      throw ContractError("bio_encode: span [" + std::to_string(span.start) +
                          ", " + std::to_string(span.end) +
                          ") out of bounds for " + std::to_string(n_tokens) +
                          " tokens");
    labels[span.start] = static_cast<int>(BioTag::B);
    for (int t = span.start + 1; t < span.end; ++t)
      labels[t] = static_cast<int>(BioTag::I);
  }
  return labels;
}

std::vector<MentionSpan> bio_decode(const std::vector<int>& labels) {
  std::vector<MentionSpan> spans;
  int open = -1;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const auto tag = static_cast<BioTag>(labels[t]);
    if (tag == BioTag::B) {
      if (open >= 0) spans.push_back({open, static_cast<int>(t)});
      open = static_cast<int>(t);
    } else if (tag == BioTag::I) {
      if (open < 0) open = static_cast<int>(t);  // stray I starts a mention
    } else {
      if (open >= 0) spans.push_back({open, static_cast<int>(t)});
      open = -1;
    }
  }
  if (open >= 0) spans.push_back({open, static_cast<int>(labels.size())});
  return spans;
}

MentionHead make_mention_head(ParamStore& store, int dim, Rng& rng) {
  MentionHead head;
  head.weight = store.create("md.weight", dim, 3,
                             0.5 / std::sqrt(static_cast<double>(dim)), rng);
  head.bias = store.create("md.bias", 1, 3, 0.0, rng);
  return head;
}

Tensor md_forward(const Tensor& hidden, const MentionHead& head) {
  return add_bias(matmul(hidden, head.weight), head.bias);
}

Tensor pool_mention(const Tensor& hidden, const MentionSpan& span) {
  if (span.start < 0 || span.end > hidden.rows() || span.start >= span.end)
    throw ContractError("pool_mention: span [" + std::to_string(span.start) +
                        ", " + std::to_string(span.end) +
                        ") out of bounds for " + std::to_string(hidden.rows()) +
                        " rows");
  return mean_rows(slice_rows(hidden, span.start, span.end));
}

Tensor pool_mentions(const Tensor& hidden,
                     const std::vector<MentionSpan>& spans) {
  std::vector<Tensor> pooled;
  pooled.reserve(spans.size());
  for (const auto& span : spans) pooled.push_back(pool_mention(hidden, span));
  return concat_rows(pooled);
}

}  // namespace docie
