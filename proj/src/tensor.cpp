#include "docie/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "docie/error.hpp"

namespace docie {

namespace {

thread_local bool g_grad_enabled = true;

std::shared_ptr<TensorNode> make_node(int rows, int cols) {
  if (rows <= 0 || cols <= 0)
    throw ContractError("tensor: non-positive shape [" + std::to_string(rows) +
                        ", " + std::to_string(cols) + "]");
  auto n = std::make_shared<TensorNode>();
  n->rows = rows;
  n->cols = cols;
  n->values.assign(static_cast<std::size_t>(rows) * cols, 0.0);
  return n;
}

std::string shape_str(const Tensor& t) {
  return "[" + std::to_string(t.rows()) + ", " + std::to_string(t.cols()) + "]";
}

bool track(std::initializer_list<const Tensor*> inputs) {
  if (!g_grad_enabled) return false;
  for (const Tensor* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

void add_into(TensorNode& node, const std::vector<double>& delta) {
  node.ensure_grad();
  for (std::size_t i = 0; i < delta.size(); ++i) node.grad[i] += delta[i];
}

}  // namespace

Tensor Tensor::zeros(int rows, int cols) { return Tensor(make_node(rows, cols)); }

Tensor Tensor::full(int rows, int cols, double value) {
  auto n = make_node(rows, cols);
  std::fill(n->values.begin(), n->values.end(), value);
  return Tensor(std::move(n));
}

Tensor Tensor::from_values(int rows, int cols, std::vector<double> values) {
  auto n = make_node(rows, cols);
  if (values.size() != n->values.size())
    throw ContractError("tensor: value count " + std::to_string(values.size()) +
                        " does not match shape [" + std::to_string(rows) + ", " +
                        std::to_string(cols) + "]");
  n->values = std::move(values);
  return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value) { return full(1, 1, value); }

Tensor Tensor::param(int rows, int cols, std::vector<double> values) {
  Tensor t = from_values(rows, cols, std::move(values));
  t.node()->requires_grad = true;
  return t;
}

double Tensor::item() const {
  if (size() != 1)
    throw ContractError("item: tensor " + shape_str(*this) + " is not scalar");
  return node_->values[0];
}

const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  node_->grad.assign(node_->values.size(), 0.0);
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

void backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw ContractError("backward: loss must be scalar, got " +
                        shape_str(loss));
  // Post-order over the provenance DAG; reverse order visits each node after
  // everything that consumes it.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> visited;
  struct Frame {
    TensorNode* node;
    std::size_t next;
  };
  std::vector<Frame> stack{{loss.node().get(), 0}};
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& frame = stack.back();
    if (frame.next < frame.node->parents.size()) {
      TensorNode* parent = frame.node->parents[frame.next++].get();
      if (visited.insert(parent).second) stack.push_back({parent, 0});
    } else {
      order.push_back(frame.node);
      stack.pop_back();
    }
  }
  loss.node()->ensure_grad();
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode* node = *it;
    if (node->backward_fn) {
      node->ensure_grad();
      node->backward_fn(*node);
    }
  }
}

// --- elementwise and linear algebra -----------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractError("add: shape mismatch " + shape_str(a) + " vs " +
                        shape_str(b));
  auto out = make_node(a.rows(), a.cols());
  for (int i = 0; i < a.size(); ++i)
    out->values[i] = a.values()[i] + b.values()[i];
  if (track({&a, &b})) {
    auto pa = a.node(), pb = b.node();
    out->requires_grad = true;
    out->parents = {pa, pb};
    out->backward_fn = [pa, pb](TensorNode& self) {
      if (pa->requires_grad) add_into(*pa, self.grad);
      if (pb->requires_grad) add_into(*pb, self.grad);
    };
  }
  return Tensor(std::move(out));
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols())
    throw ContractError("add_bias: bias " + shape_str(bias) +
                        " incompatible with " + shape_str(a));
  auto out = make_node(a.rows(), a.cols());
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c)
      out->values[r * a.cols() + c] =
          a.values()[r * a.cols() + c] + bias.values()[c];
  if (track({&a, &bias})) {
    auto pa = a.node(), pb = bias.node();
    out->requires_grad = true;
    out->parents = {pa, pb};
    out->backward_fn = [pa, pb](TensorNode& self) {
      if (pa->requires_grad) add_into(*pa, self.grad);
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (int r = 0; r < self.rows; ++r)
          for (int c = 0; c < self.cols; ++c)
            pb->grad[c] += self.grad[r * self.cols + c];
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return add(a, scale(b, -1.0));
}

Tensor add_scalar(const Tensor& a, const Tensor& s) {
  if (s.size() != 1)
    throw ContractError("add_scalar: addend must be [1, 1], got " +
                        shape_str(s));
  auto out = make_node(a.rows(), a.cols());
  const double sv = s.values()[0];
  for (int i = 0; i < a.size(); ++i) out->values[i] = a.values()[i] + sv;
  if (track({&a, &s})) {
    auto pa = a.node(), ps = s.node();
    out->requires_grad = true;
    out->parents = {pa, ps};
    out->backward_fn = [pa, ps](TensorNode& self) {
      if (pa->requires_grad) add_into(*pa, self.grad);
      if (ps->requires_grad) {
        ps->ensure_grad();
        for (double g : self.grad) ps->grad[0] += g;
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ContractError("mul: shape mismatch " + shape_str(a) + " vs " +
                        shape_str(b));
  auto out = make_node(a.rows(), a.cols());
  for (int i = 0; i < a.size(); ++i)
    out->values[i] = a.values()[i] * b.values()[i];
  if (track({&a, &b})) {
    auto pa = a.node(), pb = b.node();
    out->requires_grad = true;
    out->parents = {pa, pb};
    out->backward_fn = [pa, pb](TensorNode& self) {
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          pa->grad[i] += self.grad[i] * pb->values[i];
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          pb->grad[i] += self.grad[i] * pa->values[i];
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor scale(const Tensor& a, double c) {
  auto out = make_node(a.rows(), a.cols());
  for (int i = 0; i < a.size(); ++i) out->values[i] = a.values()[i] * c;
  if (track({&a})) {
    auto pa = a.node();
    out->requires_grad = true;
    out->parents = {pa};
    out->backward_fn = [pa, c](TensorNode& self) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        pa->grad[i] += self.grad[i] * c;
    };
  }
  return Tensor(std::move(out));
}

Tensor mul_scalar(const Tensor& a, const Tensor& s) {
  if (s.size() != 1)
    throw ContractError("mul_scalar: factor must be [1, 1], got " +
                        shape_str(s));
  auto out = make_node(a.rows(), a.cols());
  const double sv = s.values()[0];
  for (int i = 0; i < a.size(); ++i) out->values[i] = a.values()[i] * sv;
  if (track({&a, &s})) {
    auto pa = a.node(), ps = s.node();
    out->requires_grad = true;
    out->parents = {pa, ps};
    out->backward_fn = [pa, ps](TensorNode& self) {
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          pa->grad[i] += self.grad[i] * ps->values[0];
      }
      if (ps->requires_grad) {
        ps->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i)
          ps->grad[0] += self.grad[i] * pa->values[i];
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw ContractError("matmul: shape mismatch " + shape_str(a) + " x " +
                        shape_str(b));
  const int m = a.rows(), k = a.cols(), n = b.cols();
  auto out = make_node(m, n);
  const auto& av = a.values();
  const auto& bv = b.values();
  for (int i = 0; i < m; ++i) {
    for (int kk = 0; kk < k; ++kk) {
      const double aik = av[i * k + kk];
      if (aik == 0.0) continue;
      const double* brow = bv.data() + kk * n;
      double* orow = out->values.data() + i * n;
      for (int j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  if (track({&a, &b})) {
    auto pa = a.node(), pb = b.node();
    out->requires_grad = true;
    out->parents = {pa, pb};
    out->backward_fn = [pa, pb, m, k, n](TensorNode& self) {
      if (pa->requires_grad) {
        pa->ensure_grad();
        // dA = dC B^T
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) {
            const double g = self.grad[i * n + j];
            if (g == 0.0) continue;
            for (int kk = 0; kk < k; ++kk)
              pa->grad[i * k + kk] += g * pb->values[kk * n + j];
          }
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        // dB = A^T dC
        for (int i = 0; i < m; ++i)
          for (int kk = 0; kk < k; ++kk) {
            const double aik = pa->values[i * k + kk];
            if (aik == 0.0) continue;
            for (int j = 0; j < n; ++j)
              pb->grad[kk * n + j] += aik * self.grad[i * n + j];
          }
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor transpose(const Tensor& a) {
  auto out = make_node(a.cols(), a.rows());
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c)
      out->values[c * a.rows() + r] = a.values()[r * a.cols() + c];
  if (track({&a})) {
    auto pa = a.node();
    out->requires_grad = true;
    out->parents = {pa};
    out->backward_fn = [pa](TensorNode& self) {
      pa->ensure_grad();
      for (int r = 0; r < self.rows; ++r)
        for (int c = 0; c < self.cols; ++c)
          pa->grad[c * self.rows + r] += self.grad[r * self.cols + c];
    };
  }
  return Tensor(std::move(out));
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no parts");
  const int cols = parts.front().cols();
  int rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols)
      throw ContractError("concat_rows: column mismatch " + shape_str(p));
    rows += p.rows();
  }
  auto out = make_node(rows, cols);
  int at = 0;
  for (const auto& p : parts) {
    std::copy(p.values().begin(), p.values().end(),
              out->values.begin() + static_cast<std::size_t>(at) * cols);
    at += p.rows();
  }
  bool needs = false;
  for (const auto& p : parts) needs = needs || p.requires_grad();
  if (g_grad_enabled && needs) {
    std::vector<std::shared_ptr<TensorNode>> parents;
    for (const auto& p : parts) parents.push_back(p.node());
    out->requires_grad = true;
    out->parents = parents;
    out->backward_fn = [parents, cols](TensorNode& self) {
      int offset = 0;
      for (const auto& p : parents) {
        if (p->requires_grad) {
          p->ensure_grad();
          for (int i = 0; i < p->size(); ++i)
            p->grad[i] += self.grad[offset * cols + i];
        }
        offset += p->rows;
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no parts");
  const int rows = parts.front().rows();
  int cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows)
      throw ContractError("concat_cols: row mismatch " + shape_str(p));
    cols += p.cols();
  }
  auto out = make_node(rows, cols);
  int at = 0;
  for (const auto& p : parts) {
    for (int r = 0; r < rows; ++r)
      std::copy(p.values().begin() + static_cast<std::size_t>(r) * p.cols(),
                p.values().begin() + static_cast<std::size_t>(r + 1) * p.cols(),
                out->values.begin() + static_cast<std::size_t>(r) * cols + at);
    at += p.cols();
  }
  bool needs = false;
  for (const auto& p : parts) needs = needs || p.requires_grad();
  if (g_grad_enabled && needs) {
    std::vector<std::shared_ptr<TensorNode>> parents;
    for (const auto& p : parts) parents.push_back(p.node());
    out->requires_grad = true;
    out->parents = parents;
    out->backward_fn = [parents, rows, cols](TensorNode& self) {
      int offset = 0;
      for (const auto& p : parents) {
        if (p->requires_grad) {
          p->ensure_grad();
          for (int r = 0; r < rows; ++r)
            for (int c = 0; c < p->cols; ++c)
              p->grad[r * p->cols + c] += self.grad[r * cols + offset + c];
        }
        offset += p->cols;
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor slice_rows(const Tensor& a, int r0, int r1) {
  if (r0 < 0 || r0 >= r1 || r1 > a.rows())
    throw ContractError("slice_rows: range [" + std::to_string(r0) + ", " +
                        std::to_string(r1) + ") out of bounds for " +
                        shape_str(a));
  const int cols = a.cols();
  auto out = make_node(r1 - r0, cols);
  std::copy(a.values().begin() + static_cast<std::size_t>(r0) * cols,
            a.values().begin() + static_cast<std::size_t>(r1) * cols,
            out->values.begin());
  if (track({&a})) {
    auto pa = a.node();
    out->requires_grad = true;
    out->parents = {pa};
    out->backward_fn = [pa, r0, cols](TensorNode& self) {
      pa->ensure_grad();
      for (int i = 0; i < self.size(); ++i)
        pa->grad[r0 * cols + i] += self.grad[i];
    };
  }
  return Tensor(std::move(out));
}

Tensor slice_cols(const Tensor& a, int c0, int c1) {
  if (c0 < 0 || c0 >= c1 || c1 > a.cols())
    throw ContractError("slice_cols: range [" + std::to_string(c0) + ", " +
                        std::to_string(c1) + ") out of bounds for " +
                        shape_str(a));
  auto out = make_node(a.rows(), c1 - c0);
  for (int r = 0; r < a.rows(); ++r)
    for (int c = c0; c < c1; ++c)
      out->values[r * (c1 - c0) + (c - c0)] = a.values()[r * a.cols() + c];
  if (track({&a})) {
    auto pa = a.node();
    const int acols = a.cols();
    out->requires_grad = true;
    out->parents = {pa};
    out->backward_fn = [pa, c0, acols](TensorNode& self) {
      pa->ensure_grad();
      for (int r = 0; r < self.rows; ++r)
        for (int c = 0; c < self.cols; ++c)
          pa->grad[r * acols + c0 + c] += self.grad[r * self.cols + c];
    };
  }
  return Tensor(std::move(out));
}

Tensor row(const Tensor& a, int r) { return slice_rows(a, r, r + 1); }

Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids) {
  if (ids.empty()) throw ContractError("embedding_rows: empty id list");
  const int dim = table.cols();
  for (int id : ids)
    if (id < 0 || id >= table.rows())
      throw ContractError("embedding_rows: id " + std::to_string(id) +
                          " out of range for table " + shape_str(table));
  auto out = make_node(static_cast<int>(ids.size()), dim);
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy(table.values().begin() + static_cast<std::size_t>(ids[i]) * dim,
              table.values().begin() + static_cast<std::size_t>(ids[i] + 1) * dim,
              out->values.begin() + i * dim);
  if (track({&table})) {
    auto pt = table.node();
    out->requires_grad = true;
    out->parents = {pt};
    out->backward_fn = [pt, ids, dim](TensorNode& self) {
      pt->ensure_grad();
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (int c = 0; c < dim; ++c)
          pt->grad[static_cast<std::size_t>(ids[i]) * dim + c] +=
              self.grad[i * dim + c];
    };
  }
  return Tensor(std::move(out));
}

Tensor gather(const Tensor& a, const std::vector<int>& flat_indices) {
  if (flat_indices.empty()) throw ContractError("gather: empty index list");
  for (int idx : flat_indices)
    if (idx < 0 || idx >= a.size())
      throw ContractError("gather: index " + std::to_string(idx) +
                          " out of range for " + shape_str(a));
  auto out = make_node(1, static_cast<int>(flat_indices.size()));
  for (std::size_t i = 0; i < flat_indices.size(); ++i)
    out->values[i] = a.values()[flat_indices[i]];
  if (track({&a})) {
    auto pa = a.node();
    out->requires_grad = true;
    out->parents = {pa};
    out->backward_fn = [pa, flat_indices](TensorNode& self) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < flat_indices.size(); ++i)
        pa->grad[flat_indices[i]] += self.grad[i];
    };
  }
  return Tensor(std::move(out));
}

Tensor mean_rows(const Tensor& a) {
  const int m = a.rows(), n = a.cols();
  auto out = make_node(1, n);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < n; ++c) out->values[c] += a.values()[r * n + c];
  for (int c = 0; c < n; ++c) out->values[c] /= m;
  if (track({&a})) {
    auto pa = a.node();
    out->requires_grad = true;
    out->parents = {pa};
    out->backward_fn = [pa, m, n](TensorNode& self) {
      pa->ensure_grad();
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) pa->grad[r * n + c] += self.grad[c] / m;
    };
  }
  return Tensor(std::move(out));
}

Tensor sum_all(const Tensor& a) {
  auto out = make_node(1, 1);
  for (int i = 0; i < a.size(); ++i) out->values[0] += a.values()[i];
  if (track({&a})) {
    auto pa = a.node();
    out->requires_grad = true;
    out->parents = {pa};
    out->backward_fn = [pa](TensorNode& self) {
      pa->ensure_grad();
      for (auto& g : pa->grad) g += self.grad[0];
    };
  }
  return Tensor(std::move(out));
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / a.size()); }

// --- nonlinearities ----------------------------------------------------------

namespace {

Tensor unary(const Tensor& a, const std::function<double(double)>& f,
             const std::function<double(double, double)>& dfdx_from_x_y) {
  auto out = make_node(a.rows(), a.cols());
  for (int i = 0; i < a.size(); ++i) out->values[i] = f(a.values()[i]);
  if (track({&a})) {
    auto pa = a.node();
    out->requires_grad = true;
    out->parents = {pa};
    out->backward_fn = [pa, dfdx_from_x_y](TensorNode& self) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        pa->grad[i] +=
            self.grad[i] * dfdx_from_x_y(pa->values[i], self.values[i]);
    };
  }
  return Tensor(std::move(out));
}

double stable_sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Tensor sigmoid(const Tensor& a) {
  return unary(a, stable_sigmoid,
               [](double, double y) { return y * (1.0 - y); });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
  constexpr double kSqrt2OverPi = 0.7978845608028654;
  constexpr double kCubic = 0.044715;
  return unary(
      a,
      [](double x) {
        const double u = kSqrt2OverPi * (x + kCubic * x * x * x);
        return 0.5 * x * (1.0 + std::tanh(u));
      },
      [](double x, double) {
        const double u = kSqrt2OverPi * (x + kCubic * x * x * x);
        const double t = std::tanh(u);
        const double du = kSqrt2OverPi * (1.0 + 3.0 * kCubic * x * x);
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
      });
}

Tensor tanh_op(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor softmax_rows(const Tensor& a) {
  const int m = a.rows(), n = a.cols();
  auto out = make_node(m, n);
  for (int r = 0; r < m; ++r) {
    const double* x = a.values().data() + static_cast<std::size_t>(r) * n;
    double* y = out->values.data() + static_cast<std::size_t>(r) * n;
    double mx = x[0];
    for (int c = 1; c < n; ++c) mx = std::max(mx, x[c]);
    double z = 0.0;
    for (int c = 0; c < n; ++c) {
      y[c] = std::exp(x[c] - mx);
      z += y[c];
    }
    for (int c = 0; c < n; ++c) y[c] /= z;
  }
  if (track({&a})) {
    auto pa = a.node();
    out->requires_grad = true;
    out->parents = {pa};
    out->backward_fn = [pa, m, n](TensorNode& self) {
      pa->ensure_grad();
      for (int r = 0; r < m; ++r) {
        const double* y = self.values.data() + static_cast<std::size_t>(r) * n;
        const double* dy = self.grad.data() + static_cast<std::size_t>(r) * n;
        double dot = 0.0;
        for (int c = 0; c < n; ++c) dot += y[c] * dy[c];
        for (int c = 0; c < n; ++c)
          pa->grad[r * n + c] += y[c] * (dy[c] - dot);
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor layer_norm_rows(const Tensor& a, const Tensor& gain, const Tensor& bias,
                       double eps) {
  const int m = a.rows(), n = a.cols();
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 ||
      bias.cols() != n)
    throw ContractError("layer_norm_rows: gain/bias must be [1, " +
                        std::to_string(n) + "]");
  auto out = make_node(m, n);
  std::vector<double> xhat(static_cast<std::size_t>(m) * n);
  std::vector<double> inv_std(m);
  for (int r = 0; r < m; ++r) {
    const double* x = a.values().data() + static_cast<std::size_t>(r) * n;
    double mu = 0.0;
    for (int c = 0; c < n; ++c) mu += x[c];
    mu /= n;
    double var = 0.0;
    for (int c = 0; c < n; ++c) var += (x[c] - mu) * (x[c] - mu);
    var /= n;
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (int c = 0; c < n; ++c) {
      xhat[r * n + c] = (x[c] - mu) * is;
      out->values[r * n + c] =
          gain.values()[c] * xhat[r * n + c] + bias.values()[c];
    }
  }
  if (track({&a, &gain, &bias})) {
    auto pa = a.node(), pg = gain.node(), pb = bias.node();
    out->requires_grad = true;
    out->parents = {pa, pg, pb};
    out->backward_fn = [pa, pg, pb, xhat, inv_std, m, n](TensorNode& self) {
      if (pg->requires_grad) {
        pg->ensure_grad();
        for (int r = 0; r < m; ++r)
          for (int c = 0; c < n; ++c)
            pg->grad[c] += self.grad[r * n + c] * xhat[r * n + c];
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (int r = 0; r < m; ++r)
          for (int c = 0; c < n; ++c) pb->grad[c] += self.grad[r * n + c];
      }
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (int r = 0; r < m; ++r) {
          double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
          for (int c = 0; c < n; ++c) {
            const double dxhat = self.grad[r * n + c] * pg->values[c];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * xhat[r * n + c];
          }
          mean_dxhat /= n;
          mean_dxhat_xhat /= n;
          for (int c = 0; c < n; ++c) {
            const double dxhat = self.grad[r * n + c] * pg->values[c];
            pa->grad[r * n + c] +=
                (dxhat - mean_dxhat - xhat[r * n + c] * mean_dxhat_xhat) *
                inv_std[r];
          }
        }
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor dropout(const Tensor& a, double p, Rng& rng, bool training) {
  if (p < 0.0 || p >= 1.0)
    throw ContractError("dropout: probability " + std::to_string(p) +
                        " outside [0, 1)");
  if (!training || p == 0.0) return a;
  auto out = make_node(a.rows(), a.cols());
  std::vector<double> mask(a.size());
  const double keep_scale = 1.0 / (1.0 - p);
  for (int i = 0; i < a.size(); ++i) {
    mask[i] = rng.uniform() < p ? 0.0 : keep_scale;
    out->values[i] = a.values()[i] * mask[i];
  }
  if (track({&a})) {
    auto pa = a.node();
    out->requires_grad = true;
    out->parents = {pa};
    out->backward_fn = [pa, mask](TensorNode& self) {
      pa->ensure_grad();
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        pa->grad[i] += self.grad[i] * mask[i];
    };
  }
  return Tensor(std::move(out));
}

Tensor bilinear(const Tensor& x, const Tensor& w, const Tensor& y) {
  return matmul(matmul(x, w), transpose(y));
}

Tensor multi_head_attention(const Tensor& x, const Tensor& wq, const Tensor& bq,
                            const Tensor& wk, const Tensor& bk,
                            const Tensor& wv, const Tensor& bv,
                            const Tensor& wo, const Tensor& bo, int n_heads) {
  const int dim = x.cols();
  if (n_heads <= 0 || dim % n_heads != 0)
    throw ContractError("multi_head_attention: dim " + std::to_string(dim) +
                        " not divisible by heads " + std::to_string(n_heads));
  const int head_dim = dim / n_heads;
  Tensor q = add_bias(matmul(x, wq), bq);
  Tensor k = add_bias(matmul(x, wk), bk);
  Tensor v = add_bias(matmul(x, wv), bv);
  std::vector<Tensor> heads;
  heads.reserve(n_heads);
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  for (int h = 0; h < n_heads; ++h) {
    Tensor qh = slice_cols(q, h * head_dim, (h + 1) * head_dim);
    Tensor kh = slice_cols(k, h * head_dim, (h + 1) * head_dim);
    Tensor vh = slice_cols(v, h * head_dim, (h + 1) * head_dim);
    Tensor att = softmax_rows(scale(matmul(qh, transpose(kh)), inv_sqrt));
    heads.push_back(matmul(att, vh));
  }
  return add_bias(matmul(concat_cols(heads), wo), bo);
}

// --- losses ------------------------------------------------------------------

Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets,
                       const std::vector<double>& mask) {
  if (targets.size() != static_cast<std::size_t>(logits.size()))
    throw ContractError("bce_with_logits: targets size " +
                        std::to_string(targets.size()) +
                        " does not match logits " + shape_str(logits));
  if (!mask.empty() && mask.size() != targets.size())
    throw ContractError("bce_with_logits: mask size mismatch");
  double active = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i)
    active += mask.empty() ? 1.0 : mask[i];
  auto out = make_node(1, 1);
  if (active > 0.0) {
    double total = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const double w = mask.empty() ? 1.0 : mask[i];
      if (w == 0.0) continue;
      const double z = logits.values()[i];
      const double y = targets[i];
      total += w * (std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z))));
    }
    out->values[0] = total / active;
  }
  if (active > 0.0 && track({&logits})) {
    auto pl = logits.node();
    out->requires_grad = true;
    out->parents = {pl};
    out->backward_fn = [pl, targets, mask, active](TensorNode& self) {
      pl->ensure_grad();
      for (std::size_t i = 0; i < targets.size(); ++i) {
        const double w = mask.empty() ? 1.0 : mask[i];
        if (w == 0.0) continue;
        pl->grad[i] += self.grad[0] * w *
                       (stable_sigmoid(pl->values[i]) - targets[i]) / active;
      }
    };
  }
  return Tensor(std::move(out));
}

Tensor ce_with_logits(const Tensor& logits, const std::vector<int>& targets) {
  const int n = logits.rows(), c = logits.cols();
  if (targets.size() != static_cast<std::size_t>(n))
    throw ContractError("ce_with_logits: expected " + std::to_string(n) +
                        " targets, got " + std::to_string(targets.size()));
  for (int t : targets)
    if (t < 0 || t >= c)
      throw ContractError("ce_with_logits: target class " + std::to_string(t) +
                          " out of range [0, " + std::to_string(c) + ")");
  auto out = make_node(1, 1);
  double total = 0.0;
  for (int r = 0; r < n; ++r) {
    const double* z = logits.values().data() + static_cast<std::size_t>(r) * c;
    double mx = z[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, z[j]);
    double lse = 0.0;
    for (int j = 0; j < c; ++j) lse += std::exp(z[j] - mx);
    total += mx + std::log(lse) - z[targets[r]];
  }
  out->values[0] = total / n;
  if (track({&logits})) {
    auto pl = logits.node();
    out->requires_grad = true;
    out->parents = {pl};
    out->backward_fn = [pl, targets, n, c](TensorNode& self) {
      pl->ensure_grad();
      for (int r = 0; r < n; ++r) {
        const double* z = pl->values.data() + static_cast<std::size_t>(r) * c;
        double mx = z[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, z[j]);
        double lse = 0.0;
        for (int j = 0; j < c; ++j) lse += std::exp(z[j] - mx);
        for (int j = 0; j < c; ++j) {
          const double p = std::exp(z[j] - mx) / lse;
          const double indicator = (j == targets[r]) ? 1.0 : 0.0;
          pl->grad[r * c + j] += self.grad[0] * (p - indicator) / n;
        }
      }
    };
  }
  return Tensor(std::move(out));
}

}  // namespace docie
