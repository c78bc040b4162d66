#ifndef DOCIE_TRAIN_HPP_
#define DOCIE_TRAIN_HPP_

#include <stdexcept>
#include <string>
#include <vector>

#include "docie/corpus.hpp"
#include "docie/kg.hpp"
#include "docie/mode.hpp"
#include "docie/model.hpp"

namespace docie {

// Weights lambda1..lambda5 for (L_m, L_t, L_d, L_c, L_r).
struct LossWeights {
  double md = 0.1;
  double et = 0.005;
  double ed = 0.1;
  double coref = 0.02;
  double rc = 0.775;

  void validate() const;
};

// Subtask training zeroes every other weight; RE zeroes the ED weight;
// DocIE keeps the base weights.
LossWeights effective_weights(const TrainingMode& mode,
                              const LossWeights& base);

// Tasks with nonzero weight; zero-weight losses are never built, so their
// heads receive exactly zero gradient.
LossMask mask_for(const LossWeights& weights);

// Weighted sum of the per-task losses (skipped/undefined losses count 0).
Tensor total_loss(const TaskLosses& losses, const LossWeights& weights);

// Thrown when a loss turns non-finite; names the offending term.
struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  TrainingMode mode;
  LossWeights base_weights;
  int epochs = 150;
  int batch_size = 2;
  double learning_rate = 5e-5;
  int eval_every = 10;
  std::string checkpoint_prefix;  // empty = no checkpointing
  std::string metrics_path;       // empty = no metrics file
};

struct TrainResult {
  double best_dev_f1 = 0.0;
  int best_epoch = -1;
  // JSON-lines metrics log, one line per epoch.
  std::vector<std::string> metric_lines;
};

// Deterministic training loop: Adam with the linear schedule, gradient
// accumulation over each batch, dev evaluation every `eval_every` epochs and
// at the end, checkpoint written whenever the dev headline metric improves.
TrainResult train(JointModel& model, const Corpus& train_corpus,
                  const Corpus& dev_corpus, const CandidateTable& table,
                  const KgSnapshot& kg, const TrainConfig& config);

}  // namespace docie

#endif  // DOCIE_TRAIN_HPP_
