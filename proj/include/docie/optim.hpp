#ifndef DOCIE_OPTIM_HPP_
#define DOCIE_OPTIM_HPP_

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "docie/rng.hpp"
#include "docie/tensor.hpp"

namespace docie {

// Linear decay to zero over total_steps; steps past the end clamp to 0.
// total_steps <= 0 means a constant rate.
double lr_at(std::int64_t step, double base_lr, std::int64_t total_steps);

struct AdamConfig {
  double base_lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t total_steps = 0;  // for the linear schedule; 0 = constant
};

// Adam with bias correction driven by the linear learning rate schedule.
// step() consumes and zeroes the parameter gradients.
class Adam {
 public:
  Adam(std::vector<Tensor> params, AdamConfig config);

  void step();
  std::int64_t step_count() const { return step_; }
  double current_lr() const;

 private:
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> moment1_;
  std::vector<std::vector<double>> moment2_;
  std::int64_t step_ = 0;
  AdamConfig config_;
};

// Named trainable parameters. Iteration order is name-sorted so that runs
// are reproducible.
class ParamStore {
 public:
  // Normal(0, stddev) init; stddev == 0 gives zeros.
  Tensor create(const std::string& name, int rows, int cols, double stddev,
                Rng& rng);
  Tensor get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }
  std::size_t count() const { return params_.size(); }

  std::vector<Tensor> all() const;
  std::vector<std::pair<std::string, Tensor>> items() const;

  void zero_grads();

  // Binary checkpoint: named tensors with a shape header followed by raw
  // little-endian float64 payloads. load() fills tensors already present and
  // throws ValidationError on any name or shape mismatch.
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  std::map<std::string, Tensor> params_;
};

}  // namespace docie

#endif  // DOCIE_OPTIM_HPP_
