#ifndef DOCIE_ENCODER_HPP_
#define DOCIE_ENCODER_HPP_

#include <map>
#include <string>
#include <vector>

#include "docie/corpus.hpp"
#include "docie/optim.hpp"
#include "docie/tensor.hpp"

namespace docie {

struct EncoderConfig {
  int embedding_dim = 64;
  int n_layers = 2;
  int n_heads = 4;
  int max_seq_len = 510;
  double dropout = 0.1;

  void validate() const;
};

// Word-level vocabulary with reserved PAD/UNK ids.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary();

  // Adds the token if absent; returns its id either way.
  int add(const std::string& token);
  // UNK for unseen tokens.
  int id_of(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  // Id-ordered token list (including the reserved entries).
  const std::vector<std::string>& tokens() const { return tokens_; }

  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

 private:
  std::map<std::string, int> ids_;
  std::vector<std::string> tokens_;
};

// Every corpus token with frequency >= min_count, in first-appearance order,
// plus the reserved PAD/UNK entries.
Vocabulary build_vocab(const Corpus& corpus, std::size_t min_count = 1);

// One pre-norm transformer layer worth of parameters.
struct TransformerLayer {
  Tensor ln1_gain, ln1_bias;
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor ln2_gain, ln2_bias;
  Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
};

TransformerLayer make_transformer_layer(ParamStore& store,
                                        const std::string& prefix, int dim,
                                        Rng& rng);

// x [n, dim] -> [n, dim]; self-attention over the n positions.
Tensor transformer_stack(const Tensor& x,
                         const std::vector<TransformerLayer>& layers,
                         int n_heads, double dropout_p, bool training,
                         Rng& rng);

// Token encoder: embeddings + positions + transformer stack + final norm.
class DocumentEncoder {
 public:
  DocumentEncoder(ParamStore& store, const std::string& prefix,
                  int vocab_size, const EncoderConfig& config, Rng& rng);

  struct Output {
    Tensor hidden;   // [n_tokens, dim]
    int n_tokens;    // after truncation
    bool truncated;
  };

  // Documents longer than max_seq_len are truncated; the caller is told so
  // it can drop the annotations beyond the cut for this pass.
  Output encode(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                bool training, Rng& rng) const;

  const EncoderConfig& config() const { return config_; }

 private:
  EncoderConfig config_;
  Tensor token_embedding_;
  Tensor pos_embedding_;
  std::vector<TransformerLayer> layers_;
  Tensor final_gain_, final_bias_;
};

}  // namespace docie

#endif  // DOCIE_ENCODER_HPP_
