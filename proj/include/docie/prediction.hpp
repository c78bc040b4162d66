#ifndef DOCIE_PREDICTION_HPP_
#define DOCIE_PREDICTION_HPP_

#include <string>
#include <vector>

#include "docie/corpus.hpp"

namespace docie {

struct PredictedCluster {
  std::vector<MentionSpan> mentions;  // sorted
  std::vector<std::string> types;     // sorted
  std::string entity_id;              // "" = NIL
};

// End-to-end output of one document forward pass.
struct PredictedDoc {
  std::vector<MentionSpan> mentions;
  std::vector<std::vector<std::string>> mention_types;
  std::vector<std::string> mention_entity_ids;  // "" = NIL
  std::vector<double> mention_link_scores;
  std::vector<PredictedCluster> clusters;
  std::vector<Triple> triples;  // indices into `clusters`
  bool truncated = false;
};

// Gold-routed per-component predictions (each task consumes gold upstream
// inputs, mirroring subtask evaluation).
struct SubtaskPredictions {
  std::vector<MentionSpan> md_spans;
  // Aligned with the document's gold clusters.
  std::vector<std::vector<std::string>> cluster_types;
  std::vector<std::string> cluster_entity_ids;
  // Flattened gold mentions in document order; coref clusters index into it.
  std::vector<MentionSpan> gold_mentions;
  std::vector<std::vector<int>> coref_clusters;
  // RC triples over gold cluster indices.
  std::vector<Triple> triples;
  bool truncated = false;
};

}  // namespace docie

#endif  // DOCIE_PREDICTION_HPP_
