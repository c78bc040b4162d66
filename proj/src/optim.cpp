#include "docie/optim.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "docie/error.hpp"

namespace docie {

double lr_at(std::int64_t step, double base_lr, std::int64_t total_steps) {
  if (total_steps <= 0) return base_lr;
  if (step >= total_steps) return 0.0;
  if (step < 0) throw ContractError("lr_at: negative step");
  return base_lr * (1.0 - static_cast<double>(step) / total_steps);
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  moment1_.reserve(params_.size());
  moment2_.reserve(params_.size());
  for (const auto& p : params_) {
    moment1_.emplace_back(p.size(), 0.0);
    moment2_.emplace_back(p.size(), 0.0);
  }
}

double Adam::current_lr() const {
  return lr_at(step_, config_.base_lr, config_.total_steps);
}

void Adam::step() {
  const double lr = current_lr();
  const double t = static_cast<double>(step_ + 1);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& node = *params_[i].node();
    node.ensure_grad();
    auto& m = moment1_[i];
    auto& v = moment2_[i];
    for (int j = 0; j < node.size(); ++j) {
      const double g = node.grad[j];
      m[j] = config_.beta1 * m[j] + (1.0 - config_.beta1) * g;
      v[j] = config_.beta2 * v[j] + (1.0 - config_.beta2) * g * g;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      node.values[j] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
    node.grad.assign(node.values.size(), 0.0);
  }
  ++step_;
}

Tensor ParamStore::create(const std::string& name, int rows, int cols,
                          double stddev, Rng& rng) {
  if (params_.count(name))
    throw ContractError("param store: duplicate parameter '" + name + "'");
  std::vector<double> values(static_cast<std::size_t>(rows) * cols, 0.0);
  if (stddev != 0.0)
    for (auto& v : values) v = rng.normal() * stddev;
  Tensor t = Tensor::param(rows, cols, std::move(values));
  params_.emplace(name, t);
  return t;
}

Tensor ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end())
    throw ContractError("param store: unknown parameter '" + name + "'");
  return it->second;
}

std::vector<Tensor> ParamStore::all() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& [name, t] : params_) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, Tensor>> ParamStore::items() const {
  return {params_.begin(), params_.end()};
}

void ParamStore::zero_grads() {
  for (auto& [name, t] : params_) t.zero_grad();
}

namespace {

constexpr char kMagic[4] = {'D', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in, const std::string& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ValidationError("checkpoint truncated: " + path);
  return v;
}

}  // namespace

void ParamStore::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint: " + path);
  out.write(kMagic, 4);
  write_raw(out, kVersion);
  write_raw(out, static_cast<std::uint64_t>(params_.size()));
  for (const auto& [name, t] : params_) {
    write_raw(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw(out, static_cast<std::uint32_t>(t.rows()));
    write_raw(out, static_cast<std::uint32_t>(t.cols()));
    out.write(reinterpret_cast<const char*>(t.values().data()),
              static_cast<std::streamsize>(t.values().size() * sizeof(double)));
  }
}

void ParamStore::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw ValidationError("not a checkpoint file: " + path);
  const auto version = read_raw<std::uint32_t>(in, path);
  if (version != kVersion)
    throw ValidationError("unsupported checkpoint version in " + path);
  const auto count = read_raw<std::uint64_t>(in, path);
  if (count != params_.size())
    throw ValidationError("checkpoint parameter count mismatch: file has " +
                          std::to_string(count) + ", model has " +
                          std::to_string(params_.size()));
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = read_raw<std::uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in) throw ValidationError("checkpoint truncated: " + path);
    const auto rows = read_raw<std::uint32_t>(in, path);
    const auto cols = read_raw<std::uint32_t>(in, path);
    auto it = params_.find(name);
    if (it == params_.end())
      throw ValidationError("checkpoint names parameter '" + name +
                            "' unknown to this model");
    Tensor t = it->second;
    if (t.rows() != static_cast<int>(rows) || t.cols() != static_cast<int>(cols))
      throw ValidationError("checkpoint shape mismatch for '" + name + "'");
    in.read(reinterpret_cast<char*>(t.values_mut().data()),
            static_cast<std::streamsize>(t.values_mut().size() * sizeof(double)));
    if (!in) throw ValidationError("checkpoint truncated: " + path);
  }
}

}  // namespace docie
