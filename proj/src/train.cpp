#include "docie/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "docie/error.hpp"
#include "docie/eval.hpp"
#include "json.hpp"

namespace docie {

using nlohmann::json;

void LossWeights::validate() const {
  if (md < 0 || et < 0 || ed < 0 || coref < 0 || rc < 0)
    throw ConfigError("loss weights must be non-negative");
}

LossWeights effective_weights(const TrainingMode& mode,
                              const LossWeights& base) {
  base.validate();
  LossWeights w = base;
  switch (mode.kind) {
    case TrainingMode::Kind::kDocie:
      return w;
    case TrainingMode::Kind::kRe:
      w.ed = 0.0;
      return w;
    case TrainingMode::Kind::kSubtask: {
      LossWeights only;
      only.md = only.et = only.ed = only.coref = only.rc = 0.0;
      switch (mode.subtask) {
        case Task::kMd: only.md = base.md; break;
        case Task::kEt: only.et = base.et; break;
        case Task::kEd: only.ed = base.ed; break;
        case Task::kCoref: only.coref = base.coref; break;
        case Task::kRc: only.rc = base.rc; break;
      }
      return only;
    }
  }
  throw ConfigError("unknown training mode");
}

LossMask mask_for(const LossWeights& weights) {
  LossMask mask;
  mask.md = weights.md > 0.0;
  mask.et = weights.et > 0.0;
  mask.ed = weights.ed > 0.0;
  mask.coref = weights.coref > 0.0;
  mask.rc = weights.rc > 0.0;
  return mask;
}

Tensor total_loss(const TaskLosses& losses, const LossWeights& weights) {
  Tensor total;
  auto accumulate = [&](const Tensor& term, double weight) {
    if (!term.defined() || weight == 0.0) return;
    Tensor scaled = scale(term, weight);
    total = total.defined() ? add(total, scaled) : scaled;
  };
  accumulate(losses.md, weights.md);
  accumulate(losses.et, weights.et);
  accumulate(losses.ed, weights.ed);
  accumulate(losses.coref, weights.coref);
  accumulate(losses.rc, weights.rc);
  return total.defined() ? total : Tensor::scalar(0.0);
}

namespace {

void check_finite(const Tensor& loss, const char* term, int epoch) {
  if (loss.defined() && !std::isfinite(loss.item()))
    throw TrainingDiverged("training diverged: non-finite " +
                           std::string(term) + " loss at epoch " +
                           std::to_string(epoch));
}

}  // namespace

TrainResult train(JointModel& model, const Corpus& train_corpus,
                  const Corpus& dev_corpus, const CandidateTable& table,
                  const KgSnapshot& kg, const TrainConfig& config) {
  if (train_corpus.empty()) throw ConfigError("train: empty training corpus");
  if (config.epochs <= 0 || config.batch_size <= 0)
    throw ConfigError("train: epochs and batch_size must be positive");

  const LossWeights weights = effective_weights(config.mode, config.base_weights);
  const LossMask mask = mask_for(weights);

  const std::size_t n_docs = train_corpus.size();
  const std::size_t n_batches =
      (n_docs + config.batch_size - 1) / config.batch_size;

  AdamConfig adam_cfg;
  adam_cfg.base_lr = config.learning_rate;
  adam_cfg.total_steps =
      static_cast<std::int64_t>(n_batches) * config.epochs;
  Adam adam(model.params().all(), adam_cfg);

  Rng dropout_rng(model.config().seed * 7919 + 13);
  Rng shuffle_rng(model.config().seed * 104729 + 7);

  TrainResult result;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // deterministic epoch shuffle
    std::vector<std::size_t> order(n_docs);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n_docs; i > 1; --i)
      std::swap(order[i - 1],
                order[static_cast<std::size_t>(shuffle_rng.randint(0, i - 1))]);

    double epoch_loss = 0.0;
    double sum_md = 0.0, sum_et = 0.0, sum_ed = 0.0, sum_coref = 0.0,
           sum_rc = 0.0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(begin + config.batch_size, n_docs);
      const double inv = 1.0 / static_cast<double>(end - begin);
      for (std::size_t idx = begin; idx < end; ++idx) {
        const Document& doc = train_corpus[order[idx]];
        TaskLosses losses =
            model.training_losses(doc, table, kg, mask, dropout_rng);
        check_finite(losses.md, "md", epoch);
        check_finite(losses.et, "et", epoch);
        check_finite(losses.ed, "ed", epoch);
        check_finite(losses.coref, "coref", epoch);
        check_finite(losses.rc, "rc", epoch);
        Tensor total = total_loss(losses, weights);
        if (!std::isfinite(total.item()))
          throw TrainingDiverged("training diverged: non-finite total loss at "
                                 "epoch " +
                                 std::to_string(epoch));
        epoch_loss += total.item();
        if (losses.md.defined()) sum_md += losses.md.item();
        if (losses.et.defined()) sum_et += losses.et.item();
        if (losses.ed.defined()) sum_ed += losses.ed.item();
        if (losses.coref.defined()) sum_coref += losses.coref.item();
        if (losses.rc.defined()) sum_rc += losses.rc.item();
        backward(scale(total, inv));
      }
      adam.step();
    }

    json line;
    line["epoch"] = epoch;
    line["loss"] = epoch_loss / static_cast<double>(n_docs);
    if (mask.md) line["loss_md"] = sum_md / static_cast<double>(n_docs);
    if (mask.et) line["loss_et"] = sum_et / static_cast<double>(n_docs);
    if (mask.ed) line["loss_ed"] = sum_ed / static_cast<double>(n_docs);
    if (mask.coref) line["loss_coref"] = sum_coref / static_cast<double>(n_docs);
    if (mask.rc) line["loss_rc"] = sum_rc / static_cast<double>(n_docs);

    const bool last_epoch = epoch + 1 == config.epochs;
    const bool eval_now =
        !dev_corpus.empty() &&
        (last_epoch || (config.eval_every > 0 &&
                        (epoch + 1) % config.eval_every == 0));
    if (eval_now) {
      FullReport report =
          evaluate_corpus(model, dev_corpus, table, kg, config.mode);
      const double dev_f1 = headline_f1(report, config.mode);
      line["dev_f1"] = dev_f1;
      if (result.best_epoch < 0 || dev_f1 > result.best_dev_f1) {
        result.best_dev_f1 = dev_f1;
        result.best_epoch = epoch;
        if (!config.checkpoint_prefix.empty())
          save_model(model, table, kg, config.checkpoint_prefix);
      }
    }
    result.metric_lines.push_back(line.dump());
  }

  // Without a dev split the final parameters are the checkpoint.
  if (dev_corpus.empty() && !config.checkpoint_prefix.empty())
    save_model(model, table, kg, config.checkpoint_prefix);

  if (!config.metrics_path.empty()) {
    std::ofstream out(config.metrics_path);
    if (!out)
      throw ConfigError("cannot write metrics log: " + config.metrics_path);
    for (const auto& l : result.metric_lines) out << l << '\n';
  }
  return result;
}

}  // namespace docie
