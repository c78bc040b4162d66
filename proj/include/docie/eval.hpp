#ifndef DOCIE_EVAL_HPP_
#define DOCIE_EVAL_HPP_

#include <optional>
#include <string>
#include <vector>

#include "docie/corpus.hpp"
#include "docie/mode.hpp"
#include "docie/model.hpp"
#include "docie/prediction.hpp"

namespace docie {

// Micro-averaged precision/recall counts. Undefined precision or recall
// (zero denominator) scores 0.
struct PrMetric {
  std::size_t tp = 0;
  std::size_t n_pred = 0;
  std::size_t n_gold = 0;

  double precision() const {
    return n_pred == 0 ? 0.0 : static_cast<double>(tp) / n_pred;
  }
  double recall() const {
    return n_gold == 0 ? 0.0 : static_cast<double>(tp) / n_gold;
  }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

struct CorefResult {
  PrMetric hard;  // exact cluster match
  double b3_precision = 0.0;
  double b3_recall = 0.0;
  double b3_f1 = 0.0;
};

// Exact-span mention match over the corpus.
PrMetric eval_md(const std::vector<std::vector<MentionSpan>>& pred_spans,
                 const Corpus& gold);

// (cluster, type) pairs over the gold clusters; `pred_cluster_types[d]` is
// aligned with document d's gold clusters.
PrMetric eval_et(
    const std::vector<std::vector<std::vector<std::string>>>& pred_cluster_types,
    const Corpus& gold);

// Typed mentions end-to-end. Single-type profile scores whole mentions
// (span exact and type set equal); the multi-type profile scores
// (span, type) pairs.
PrMetric eval_ner(const std::vector<PredictedDoc>& pred, const Corpus& gold,
                  bool multi_type);

// Hard cluster-match F1 plus B-cubed diagnostics. Mention universes of the
// two partitions may differ.
CorefResult eval_coref(
    const std::vector<std::vector<std::vector<MentionSpan>>>& pred_partitions,
    const Corpus& gold);

// Mention-weighted micro-F1 over gold clusters; `pred_cluster_ids[d]` is
// aligned with document d's gold clusters ("" = NIL).
PrMetric eval_ed(const std::vector<std::vector<std::string>>& pred_cluster_ids,
                 const Corpus& gold);

// Exact (head, relation, tail) triple sets over gold cluster indices.
PrMetric eval_rc(const std::vector<std::vector<Triple>>& pred_triples,
                 const Corpus& gold);

// End-to-end hard metric: a triple counts when its relation matches and both
// predicted clusters exactly match gold clusters (mention spans and types).
PrMetric eval_re_hard(const std::vector<PredictedDoc>& pred,
                      const Corpus& gold);

// As eval_re_hard, with the additional requirement that the cluster entity
// id matches (NIL matches NIL).
PrMetric eval_docie_hard(const std::vector<PredictedDoc>& pred,
                         const Corpus& gold);

// A full evaluation run for a mode: subtask scorers are gold-routed, NER and
// the E2E metric come from end-to-end predictions.
struct FullReport {
  std::string mode;
  std::optional<PrMetric> md, et, ner, ed, rc, e2e;
  std::optional<CorefResult> coref;
};

FullReport evaluate_corpus(const JointModel& model, const Corpus& corpus,
                           const CandidateTable& table, const KgSnapshot& kg,
                           const TrainingMode& mode);

std::string report_to_json(const FullReport& report);
std::string report_to_table(const FullReport& report);

// The scalar used for best-checkpoint selection in this mode.
double headline_f1(const FullReport& report, const TrainingMode& mode);

}  // namespace docie

#endif  // DOCIE_EVAL_HPP_
