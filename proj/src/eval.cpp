#include "docie/eval.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "docie/error.hpp"
#include "json.hpp"

namespace docie {

using nlohmann::json;

namespace {

void require_aligned(std::size_t pred, std::size_t gold, const char* what) {
  if (pred != gold)
    throw ContractError(std::string(what) +
                        ": prediction/gold document count mismatch");
}

std::set<MentionSpan> gold_spans_of(const Document& doc) {
  std::set<MentionSpan> spans;
  for (const auto& c : doc.gold_clusters)
    spans.insert(c.mentions.begin(), c.mentions.end());
  return spans;
}

using SpanSet = std::set<MentionSpan>;
using TypeSet = std::set<std::string>;

}  // namespace

PrMetric eval_md(const std::vector<std::vector<MentionSpan>>& pred_spans,
                 const Corpus& gold) {
  require_aligned(pred_spans.size(), gold.size(), "eval_md");
  PrMetric metric;
  for (std::size_t d = 0; d < gold.size(); ++d) {
    const auto gold_set = gold_spans_of(gold[d]);
    const SpanSet pred_set(pred_spans[d].begin(), pred_spans[d].end());
    metric.n_pred += pred_set.size();
    metric.n_gold += gold_set.size();
    for (const auto& span : pred_set) metric.tp += gold_set.count(span);
  }
  return metric;
}

PrMetric eval_et(
    const std::vector<std::vector<std::vector<std::string>>>& pred_cluster_types,
    const Corpus& gold) {
  require_aligned(pred_cluster_types.size(), gold.size(), "eval_et");
  PrMetric metric;
  for (std::size_t d = 0; d < gold.size(); ++d) {
    const auto& doc = gold[d];
    if (pred_cluster_types[d].size() != doc.gold_clusters.size())
      throw ContractError("eval_et: cluster alignment mismatch");
    for (std::size_t c = 0; c < doc.gold_clusters.size(); ++c) {
      const TypeSet pred(pred_cluster_types[d][c].begin(),
                         pred_cluster_types[d][c].end());
      const TypeSet gold_types(doc.gold_clusters[c].types.begin(),
                               doc.gold_clusters[c].types.end());
      metric.n_pred += pred.size();
      metric.n_gold += gold_types.size();
      for (const auto& t : pred) metric.tp += gold_types.count(t);
    }
  }
  return metric;
}

PrMetric eval_ner(const std::vector<PredictedDoc>& pred, const Corpus& gold,
                  bool multi_type) {
  require_aligned(pred.size(), gold.size(), "eval_ner");
  PrMetric metric;
  for (std::size_t d = 0; d < gold.size(); ++d) {
    // typed mentions: each mention carries its cluster's aggregated types
    std::map<MentionSpan, TypeSet> pred_typed, gold_typed;
    for (const auto& cluster : pred[d].clusters)
      for (const auto& span : cluster.mentions)
        pred_typed[span] = TypeSet(cluster.types.begin(), cluster.types.end());
    for (const auto& cluster : gold[d].gold_clusters)
      for (const auto& span : cluster.mentions)
        gold_typed[span] = TypeSet(cluster.types.begin(), cluster.types.end());

    if (multi_type) {
      for (const auto& [span, types] : pred_typed) {
        metric.n_pred += types.size();
        auto it = gold_typed.find(span);
        if (it == gold_typed.end()) continue;
        for (const auto& t : types) metric.tp += it->second.count(t);
      }
      for (const auto& [span, types] : gold_typed) metric.n_gold += types.size();
    } else {
      metric.n_pred += pred_typed.size();
      metric.n_gold += gold_typed.size();
      for (const auto& [span, types] : pred_typed) {
        auto it = gold_typed.find(span);
        if (it != gold_typed.end() && it->second == types) metric.tp += 1;
      }
    }
  }
  return metric;
}

CorefResult eval_coref(
    const std::vector<std::vector<std::vector<MentionSpan>>>& pred_partitions,
    const Corpus& gold) {
  require_aligned(pred_partitions.size(), gold.size(), "eval_coref");
  CorefResult result;
  double b3_p_sum = 0.0, b3_r_sum = 0.0;
  std::size_t n_pred_mentions = 0, n_gold_mentions = 0;
  for (std::size_t d = 0; d < gold.size(); ++d) {
    std::vector<SpanSet> pred_clusters;
    for (const auto& members : pred_partitions[d])
      pred_clusters.emplace_back(members.begin(), members.end());
    std::vector<SpanSet> gold_clusters;
    for (const auto& c : gold[d].gold_clusters)
      gold_clusters.emplace_back(c.mentions.begin(), c.mentions.end());

    result.hard.n_pred += pred_clusters.size();
    result.hard.n_gold += gold_clusters.size();
    std::set<std::size_t> matched;
    for (const auto& pc : pred_clusters)
      for (std::size_t g = 0; g < gold_clusters.size(); ++g)
        if (!matched.count(g) && pc == gold_clusters[g]) {
          result.hard.tp += 1;
          matched.insert(g);
          break;
        }

    // B-cubed over mentions
    std::map<MentionSpan, const SpanSet*> pred_of, gold_of;
    for (const auto& pc : pred_clusters)
      for (const auto& span : pc) pred_of[span] = &pc;
    for (const auto& gc : gold_clusters)
      for (const auto& span : gc) gold_of[span] = &gc;
    auto overlap = [](const SpanSet& a, const SpanSet& b) {
      std::size_t n = 0;
      for (const auto& s : a) n += b.count(s);
      return n;
    };
    for (const auto& [span, pc] : pred_of) {
      ++n_pred_mentions;
      auto it = gold_of.find(span);
      if (it == gold_of.end()) continue;
      b3_p_sum += static_cast<double>(overlap(*pc, *it->second)) / pc->size();
    }
    for (const auto& [span, gc] : gold_of) {
      ++n_gold_mentions;
      auto it = pred_of.find(span);
      if (it == pred_of.end()) continue;
      b3_r_sum += static_cast<double>(overlap(*it->second, *gc)) / gc->size();
    }
  }
  result.b3_precision = n_pred_mentions ? b3_p_sum / n_pred_mentions : 0.0;
  result.b3_recall = n_gold_mentions ? b3_r_sum / n_gold_mentions : 0.0;
  result.b3_f1 =
      result.b3_precision + result.b3_recall == 0.0
          ? 0.0
          : 2.0 * result.b3_precision * result.b3_recall /
                (result.b3_precision + result.b3_recall);
  return result;
}

PrMetric eval_ed(const std::vector<std::vector<std::string>>& pred_cluster_ids,
                 const Corpus& gold) {
  require_aligned(pred_cluster_ids.size(), gold.size(), "eval_ed");
  PrMetric metric;
  for (std::size_t d = 0; d < gold.size(); ++d) {
    const auto& doc = gold[d];
    if (pred_cluster_ids[d].size() != doc.gold_clusters.size())
      throw ContractError("eval_ed: cluster alignment mismatch");
    for (std::size_t c = 0; c < doc.gold_clusters.size(); ++c) {
      const auto& cluster = doc.gold_clusters[c];
      const auto& pred_id = pred_cluster_ids[d][c];
      const std::size_t weight = cluster.mentions.size();
      if (cluster.linked()) metric.n_gold += weight;
      if (!pred_id.empty()) metric.n_pred += weight;
      if (cluster.linked() && pred_id == cluster.entity_id)
        metric.tp += weight;
    }
  }
  return metric;
}

PrMetric eval_rc(const std::vector<std::vector<Triple>>& pred_triples,
                 const Corpus& gold) {
  require_aligned(pred_triples.size(), gold.size(), "eval_rc");
  PrMetric metric;
  for (std::size_t d = 0; d < gold.size(); ++d) {
    const std::set<Triple> pred(pred_triples[d].begin(), pred_triples[d].end());
    const std::set<Triple> gold_set(gold[d].gold_triples.begin(),
                                    gold[d].gold_triples.end());
    metric.n_pred += pred.size();
    metric.n_gold += gold_set.size();
    for (const auto& t : pred) metric.tp += gold_set.count(t);
  }
  return metric;
}

namespace {

// Shared implementation of the two end-to-end hard metrics; `check_id`
// additionally requires the entity identifier to match.
PrMetric eval_hard(const std::vector<PredictedDoc>& pred, const Corpus& gold,
                   bool check_id) {
  require_aligned(pred.size(), gold.size(), "eval_hard");
  PrMetric metric;
  for (std::size_t d = 0; d < gold.size(); ++d) {
    const auto& doc = gold[d];
    // predicted cluster -> gold cluster index under the hard criterion
    std::vector<int> match(pred[d].clusters.size(), -1);
    for (std::size_t p = 0; p < pred[d].clusters.size(); ++p) {
      const auto& pc = pred[d].clusters[p];
      const SpanSet pm(pc.mentions.begin(), pc.mentions.end());
      const TypeSet pt(pc.types.begin(), pc.types.end());
      for (std::size_t g = 0; g < doc.gold_clusters.size(); ++g) {
        const auto& gc = doc.gold_clusters[g];
        if (pm != SpanSet(gc.mentions.begin(), gc.mentions.end())) continue;
        if (pt != TypeSet(gc.types.begin(), gc.types.end())) continue;
        if (check_id && pc.entity_id != gc.entity_id) continue;
        match[p] = static_cast<int>(g);
        break;
      }
    }
    std::set<Triple> gold_set(doc.gold_triples.begin(), doc.gold_triples.end());
    std::set<Triple> pred_resolved;
    std::set<std::tuple<int, std::string, int>> pred_unique;
    for (const auto& t : pred[d].triples) {
      pred_unique.insert({t.head, t.relation, t.tail});
      if (match[t.head] < 0 || match[t.tail] < 0) continue;
      pred_resolved.insert({match[t.head], match[t.tail], t.relation});
    }
    metric.n_pred += pred_unique.size();
    metric.n_gold += gold_set.size();
    for (const auto& t : pred_resolved) metric.tp += gold_set.count(t);
  }
  return metric;
}

}  // namespace

PrMetric eval_re_hard(const std::vector<PredictedDoc>& pred,
                      const Corpus& gold) {
  return eval_hard(pred, gold, false);
}

PrMetric eval_docie_hard(const std::vector<PredictedDoc>& pred,
                         const Corpus& gold) {
  return eval_hard(pred, gold, true);
}

namespace {

// Subtask routing feeds gold upstream artifacts; a corpus without them
// cannot support the requested evaluation.
void check_gold_available(const Corpus& corpus, const TrainingMode& mode) {
  if (mode.kind == TrainingMode::Kind::kSubtask &&
      mode.subtask == Task::kMd)
    return;  // MD has no upstream inputs
  bool any_cluster = false, any_link = false;
  for (const auto& doc : corpus) {
    if (!doc.gold_clusters.empty()) any_cluster = true;
    for (const auto& c : doc.gold_clusters)
      if (c.linked()) any_link = true;
  }
  if (!any_cluster)
    throw ConfigError("evaluation mode '" + mode.str() +
                      "' needs gold clusters, but the corpus has none");
  const bool needs_links =
      mode.kind == TrainingMode::Kind::kDocie ||
      (mode.kind == TrainingMode::Kind::kSubtask && mode.subtask == Task::kEd);
  if (needs_links && !any_link)
    throw ConfigError("evaluation mode '" + mode.str() +
                      "' needs gold entity links, but the corpus has none");
}

}  // namespace

FullReport evaluate_corpus(const JointModel& model, const Corpus& corpus,
                           const CandidateTable& table, const KgSnapshot& kg,
                           const TrainingMode& mode) {
  check_gold_available(corpus, mode);
  FullReport report;
  report.mode = mode.str();
  const bool subtask = mode.kind == TrainingMode::Kind::kSubtask;
  const bool want_e2e = !subtask;
  const bool want_ed =
      mode.kind == TrainingMode::Kind::kDocie ||
      (subtask && mode.subtask == Task::kEd);

  auto want = [&](Task t) { return !subtask || mode.subtask == t; };

  // gold-routed component predictions
  std::vector<std::vector<MentionSpan>> md_spans;
  std::vector<std::vector<std::vector<std::string>>> cluster_types;
  std::vector<std::vector<std::string>> cluster_ids;
  std::vector<std::vector<std::vector<MentionSpan>>> coref_partitions;
  std::vector<std::vector<Triple>> rc_triples;
  for (const auto& doc : corpus) {
    SubtaskPredictions sub = model.predict_subtasks(doc, table, kg);
    md_spans.push_back(sub.md_spans);
    cluster_types.push_back(sub.cluster_types);
    cluster_ids.push_back(sub.cluster_entity_ids);
    std::vector<std::vector<MentionSpan>> partition;
    for (const auto& members : sub.coref_clusters) {
      std::vector<MentionSpan> spans;
      for (int m : members) spans.push_back(sub.gold_mentions[m]);
      partition.push_back(std::move(spans));
    }
    coref_partitions.push_back(std::move(partition));
    rc_triples.push_back(sub.triples);
  }
  if (want(Task::kMd)) report.md = eval_md(md_spans, corpus);
  if (want(Task::kEt)) report.et = eval_et(cluster_types, corpus);
  if (want_ed) report.ed = eval_ed(cluster_ids, corpus);
  if (want(Task::kCoref)) report.coref = eval_coref(coref_partitions, corpus);
  if (want(Task::kRc)) report.rc = eval_rc(rc_triples, corpus);

  if (want_e2e) {
    std::vector<PredictedDoc> preds;
    const bool with_ed = mode.kind == TrainingMode::Kind::kDocie;
    for (const auto& doc : corpus)
      preds.push_back(model.predict(doc, table, kg, with_ed));
    report.ner = eval_ner(
        preds, corpus,
        model.config().type_aggregation == TypeAggregation::kUnion);
    report.e2e =
        with_ed ? eval_docie_hard(preds, corpus) : eval_re_hard(preds, corpus);
  }
  return report;
}

namespace {

json metric_json(const PrMetric& m) {
  return {{"precision", m.precision()}, {"recall", m.recall()},
          {"f1", m.f1()},               {"tp", m.tp},
          {"predicted", m.n_pred},      {"gold", m.n_gold}};
}

}  // namespace

std::string report_to_json(const FullReport& report) {
  json out;
  out["mode"] = report.mode;
  if (report.md) out["md"] = metric_json(*report.md);
  if (report.et) out["et"] = metric_json(*report.et);
  if (report.ner) out["ner"] = metric_json(*report.ner);
  if (report.ed) out["ed"] = metric_json(*report.ed);
  if (report.coref) {
    out["coref"] = metric_json(report.coref->hard);
    out["coref"]["b3_precision"] = report.coref->b3_precision;
    out["coref"]["b3_recall"] = report.coref->b3_recall;
    out["coref"]["b3_f1"] = report.coref->b3_f1;
  }
  if (report.rc) out["rc"] = metric_json(*report.rc);
  if (report.e2e) out["e2e"] = metric_json(*report.e2e);
  return out.dump(1);
}

std::string report_to_table(const FullReport& report) {
  std::ostringstream out;
  char line[128];
  out << "task       P        R        F1       tp/pred/gold\n";
  auto add = [&](const char* name, const PrMetric& m) {
    std::snprintf(line, sizeof(line), "%-9s  %7.4f  %7.4f  %7.4f  %zu/%zu/%zu\n",
                  name, m.precision(), m.recall(), m.f1(), m.tp, m.n_pred,
                  m.n_gold);
    out << line;
  };
  if (report.md) add("md", *report.md);
  if (report.et) add("et", *report.et);
  if (report.ner) add("ner", *report.ner);
  if (report.ed) add("ed", *report.ed);
  if (report.coref) {
    add("coref", report.coref->hard);
    std::snprintf(line, sizeof(line), "%-9s  %7.4f  %7.4f  %7.4f\n", "coref-b3",
                  report.coref->b3_precision, report.coref->b3_recall,
                  report.coref->b3_f1);
    out << line;
  }
  if (report.rc) add("rc", *report.rc);
  if (report.e2e) add("e2e", *report.e2e);
  return out.str();
}

double headline_f1(const FullReport& report, const TrainingMode& mode) {
  if (mode.kind != TrainingMode::Kind::kSubtask)
    return report.e2e ? report.e2e->f1() : 0.0;
  switch (mode.subtask) {
    case Task::kMd: return report.md ? report.md->f1() : 0.0;
    case Task::kEt: return report.et ? report.et->f1() : 0.0;
    case Task::kEd: return report.ed ? report.ed->f1() : 0.0;
    case Task::kCoref: return report.coref ? report.coref->hard.f1() : 0.0;
    case Task::kRc: return report.rc ? report.rc->f1() : 0.0;
  }
  return 0.0;
}

}  // namespace docie
