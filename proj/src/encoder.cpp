#include "docie/encoder.hpp"

#include <cmath>
#include <map>

#include "docie/error.hpp"

namespace docie {

void EncoderConfig::validate() const {
  if (embedding_dim <= 0 || n_layers < 0 || n_heads <= 0)
    throw ConfigError("encoder: non-positive dimensions");
  if (embedding_dim % n_heads != 0)
    throw ConfigError("encoder: embedding_dim " + std::to_string(embedding_dim) +
                      " not divisible by n_heads " + std::to_string(n_heads));
  if (max_seq_len < 1) throw ConfigError("encoder: max_seq_len must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("encoder: dropout outside [0, 1)");
}

Vocabulary::Vocabulary() {
  tokens_ = {"<pad>", "<unk>"};
  ids_["<pad>"] = kPad;
  ids_["<unk>"] = kUnk;
}

int Vocabulary::add(const std::string& token) {
  auto it = ids_.find(token);
  if (it != ids_.end()) return it->second;
  const int id = size();
  ids_[token] = id;
  tokens_.push_back(token);
  return id;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary v;
  if (tokens.size() < 2 || tokens[0] != "<pad>" || tokens[1] != "<unk>")
    throw ValidationError("vocabulary: reserved entries missing");
  for (std::size_t i = 2; i < tokens.size(); ++i) v.add(tokens[i]);
  return v;
}

Vocabulary build_vocab(const Corpus& corpus, std::size_t min_count) {
  std::map<std::string, std::size_t> freq;
  for (const auto& doc : corpus)
    for (const auto& t : doc.tokens) freq[t]++;
  Vocabulary vocab;
  for (const auto& doc : corpus)
    for (const auto& t : doc.tokens)
      if (freq[t] >= min_count) vocab.add(t);
  return vocab;
}

TransformerLayer make_transformer_layer(ParamStore& store,
                                        const std::string& prefix, int dim,
                                        Rng& rng) {
  const double w_scale = 0.4 / std::sqrt(static_cast<double>(dim));
  TransformerLayer layer;
  layer.ln1_gain = store.create(prefix + ".ln1.gain", 1, dim, 0.0, rng);
  layer.ln1_gain.values_mut().assign(dim, 1.0);
  layer.ln1_bias = store.create(prefix + ".ln1.bias", 1, dim, 0.0, rng);
  layer.wq = store.create(prefix + ".attn.wq", dim, dim, w_scale, rng);
  layer.bq = store.create(prefix + ".attn.bq", 1, dim, 0.0, rng);
  layer.wk = store.create(prefix + ".attn.wk", dim, dim, w_scale, rng);
  layer.bk = store.create(prefix + ".attn.bk", 1, dim, 0.0, rng);
  layer.wv = store.create(prefix + ".attn.wv", dim, dim, w_scale, rng);
  layer.bv = store.create(prefix + ".attn.bv", 1, dim, 0.0, rng);
  layer.wo = store.create(prefix + ".attn.wo", dim, dim, w_scale, rng);
  layer.bo = store.create(prefix + ".attn.bo", 1, dim, 0.0, rng);
  layer.ln2_gain = store.create(prefix + ".ln2.gain", 1, dim, 0.0, rng);
  layer.ln2_gain.values_mut().assign(dim, 1.0);
  layer.ln2_bias = store.create(prefix + ".ln2.bias", 1, dim, 0.0, rng);
  layer.ffn_w1 = store.create(prefix + ".ffn.w1", dim, 4 * dim, w_scale, rng);
  layer.ffn_b1 = store.create(prefix + ".ffn.b1", 1, 4 * dim, 0.0, rng);
  layer.ffn_w2 = store.create(prefix + ".ffn.w2", 4 * dim, dim, w_scale, rng);
  layer.ffn_b2 = store.create(prefix + ".ffn.b2", 1, dim, 0.0, rng);
  return layer;
}

Tensor transformer_stack(const Tensor& x,
                         const std::vector<TransformerLayer>& layers,
                         int n_heads, double dropout_p, bool training,
                         Rng& rng) {
  Tensor h = x;
  for (const auto& layer : layers) {
    Tensor normed = layer_norm_rows(h, layer.ln1_gain, layer.ln1_bias);
    Tensor att = multi_head_attention(normed, layer.wq, layer.bq, layer.wk,
                                      layer.bk, layer.wv, layer.bv, layer.wo,
                                      layer.bo, n_heads);
    h = add(h, dropout(att, dropout_p, rng, training));
    Tensor normed2 = layer_norm_rows(h, layer.ln2_gain, layer.ln2_bias);
    Tensor ffn = add_bias(
        matmul(gelu(add_bias(matmul(normed2, layer.ffn_w1), layer.ffn_b1)),
               layer.ffn_w2),
        layer.ffn_b2);
    h = add(h, dropout(ffn, dropout_p, rng, training));
  }
  return h;
}

DocumentEncoder::DocumentEncoder(ParamStore& store, const std::string& prefix,
                                 int vocab_size, const EncoderConfig& config,
                                 Rng& rng)
    : config_(config) {
  config_.validate();
  const int dim = config_.embedding_dim;
  token_embedding_ =
      store.create(prefix + ".token_embedding", vocab_size, dim, 0.1, rng);
  pos_embedding_ =
      store.create(prefix + ".pos_embedding", config_.max_seq_len, dim, 0.1, rng);
  for (int l = 0; l < config_.n_layers; ++l)
    layers_.push_back(make_transformer_layer(
        store, prefix + ".layer" + std::to_string(l), dim, rng));
  final_gain_ = store.create(prefix + ".final.gain", 1, dim, 0.0, rng);
  final_gain_.values_mut().assign(dim, 1.0);
  final_bias_ = store.create(prefix + ".final.bias", 1, dim, 0.0, rng);
}

DocumentEncoder::Output DocumentEncoder::encode(
    const std::vector<std::string>& tokens, const Vocabulary& vocab,
    bool training, Rng& rng) const {
  if (tokens.empty())
    throw ContractError("encode_document: empty document");
  Output out;
  out.truncated = static_cast<int>(tokens.size()) > config_.max_seq_len;
  out.n_tokens = out.truncated ? config_.max_seq_len
                               : static_cast<int>(tokens.size());
  std::vector<int> token_ids, positions;
  token_ids.reserve(out.n_tokens);
  positions.reserve(out.n_tokens);
  for (int i = 0; i < out.n_tokens; ++i) {
    token_ids.push_back(vocab.id_of(tokens[i]));
    positions.push_back(i);
  }
  Tensor h = add(embedding_rows(token_embedding_, token_ids),
                 embedding_rows(pos_embedding_, positions));
  h = dropout(h, config_.dropout, rng, training);
  h = transformer_stack(h, layers_, config_.n_heads, config_.dropout, training,
                        rng);
  out.hidden = layer_norm_rows(h, final_gain_, final_bias_);
  return out;
}

}  // namespace docie
