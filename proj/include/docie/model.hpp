#ifndef DOCIE_MODEL_HPP_
#define DOCIE_MODEL_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "docie/clustering.hpp"
#include "docie/corpus.hpp"
#include "docie/disambig.hpp"
#include "docie/encoder.hpp"
#include "docie/kg.hpp"
#include "docie/mention.hpp"
#include "docie/optim.hpp"
#include "docie/prediction.hpp"
#include "docie/relation.hpp"
#include "docie/typing.hpp"

namespace docie {

struct ModelConfig {
  EncoderConfig encoder;
  RcConfig rc;
  EdConfig ed;
  ClusteringConfig coref;
  TypeAggregation type_aggregation = TypeAggregation::kMostFrequent;
  std::uint64_t seed = 1;

  void validate() const;
};

// Per-task loss tensors for one document; undefined tensors mean the task
// was skipped or had nothing to supervise.
struct TaskLosses {
  Tensor md, et, ed, coref, rc;
};

// Which losses to build; zero-weight tasks are skipped entirely so their
// heads see no gradient at all.
struct LossMask {
  bool md = true, et = true, ed = true, coref = true, rc = true;

  bool needs_pairs() const { return coref || rc || ed; }
  bool needs_mentions() const { return et || ed || coref || rc; }
};

// The full jointly-trained extractor: one encoder pass per document feeding
// mention detection, typing, the coarse-to-fine pair heads, coreference
// clustering and entity disambiguation.
class JointModel {
 public:
  JointModel(Schema schema, Vocabulary vocab, ModelConfig config);

  // Gold-routed training losses (teacher forcing).
  TaskLosses training_losses(const Document& doc, const CandidateTable& table,
                             const KgSnapshot& kg, const LossMask& mask,
                             Rng& dropout_rng);

  // One end-to-end forward pass. with_ed=false is the RE setting: entity
  // ids stay NIL (unless the clustering method itself needs them).
  PredictedDoc predict(const Document& doc, const CandidateTable& table,
                       const KgSnapshot& kg, bool with_ed) const;

  // Gold-routed component predictions for subtask scoring. Also one
  // document forward pass.
  SubtaskPredictions predict_subtasks(const Document& doc,
                                      const CandidateTable& table,
                                      const KgSnapshot& kg) const;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const Schema& schema() const { return schema_; }
  const Vocabulary& vocab() const { return vocab_; }
  const ModelConfig& config() const { return config_; }
  ModelConfig& mutable_config() { return config_; }

  // Instrumentation for the single-pass contract.
  static std::uint64_t document_forward_passes();
  static void reset_document_forward_passes();

 private:
  struct Core;  // shared forward machinery
  Core run_core(const std::vector<std::string>& tokens,
                const std::vector<MentionSpan>& spans, bool training,
                bool with_pairs, Rng& rng) const;

  Schema schema_;
  Vocabulary vocab_;
  ModelConfig config_;
  ParamStore params_;
  std::unique_ptr<DocumentEncoder> encoder_;
  MentionHead md_head_;
  TypingHeads typing_heads_;
  RcWeights rc_weights_;
  std::unique_ptr<EdScorer> ed_scorer_;
};

// Corpus vocabulary extended with the KG description tokens so candidate
// descriptions are not all-UNK.
Vocabulary build_model_vocab(const Corpus& corpus, const KgSnapshot& kg);

// Everything needed to run inference later.
struct ModelBundle {
  std::unique_ptr<JointModel> model;
  CandidateTable table;
  KgSnapshot kg;
};

// Checkpoint pair: <prefix>.params (binary tensors) + <prefix>.meta.json
// (schema, vocabulary, configuration, candidate table, KG snapshot).
void save_model(const JointModel& model, const CandidateTable& table,
                const KgSnapshot& kg, const std::string& prefix);
ModelBundle load_model(const std::string& prefix);

ModelConfig model_config_from_json(const std::string& json_text);
std::string model_config_to_json(const ModelConfig& config);

}  // namespace docie

#endif  // DOCIE_MODEL_HPP_
