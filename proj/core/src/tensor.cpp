#include "cloven/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cloven {
namespace detail {

void fail_contract(const std::string& what) {
  throw std::invalid_argument(what);
}

void ensure_grad(TensorImpl& t) {
  if (t.grad.empty()) t.grad.assign(t.data.size(), 0.0);
}

}  // namespace detail

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data,
               bool requires_grad) {
  if (rows * cols != data.size()) {
    detail::fail_contract("tensor: data length " + std::to_string(data.size()) +
                          " does not match shape " + std::to_string(rows) +
                          "x" + std::to_string(cols));
  }
  impl_ = std::make_shared<detail::TensorImpl>();
  impl_->rows = rows;
  impl_->cols = cols;
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
  impl_->needs_grad = requires_grad;
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
  return Tensor(rows, cols, std::vector<double>(rows * cols, 0.0),
                requires_grad);
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value,
                    bool requires_grad) {
  return Tensor(rows, cols, std::vector<double>(rows * cols, value),
                requires_grad);
}

Tensor Tensor::scalar(double value) { return Tensor(1, 1, {value}); }

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) d[i * n + i] = 1.0;
  return Tensor(n, n, std::move(d));
}

Tensor Tensor::rand_uniform(std::size_t rows, std::size_t cols, double bound,
                            Rng& rng, bool requires_grad) {
  std::vector<double> d(rows * cols);
  for (auto& v : d) v = rng.uniform(-bound, bound);
  return Tensor(rows, cols, std::move(d), requires_grad);
}

Tensor Tensor::rand_normal(std::size_t rows, std::size_t cols, double stddev,
                           Rng& rng, bool requires_grad) {
  std::vector<double> d(rows * cols);
  for (auto& v : d) v = stddev * rng.normal();
  return Tensor(rows, cols, std::move(d), requires_grad);
}

double Tensor::at(std::size_t r, std::size_t c) const {
  if (r >= rows() || c >= cols()) {
    detail::fail_contract("tensor: index out of range");
  }
  return impl_->data[r * cols() + c];
}

double Tensor::item() const {
  if (size() != 1) {
    detail::fail_contract("tensor: item() requires a 1x1 tensor, got " +
                          std::to_string(rows()) + "x" + std::to_string(cols()));
  }
  return impl_->data[0];
}

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) {
    detail::fail_contract("tensor: gradient has not been populated");
  }
  return impl_->grad;
}

std::vector<double>& Tensor::raw_grad() {
  detail::ensure_grad(*impl_);
  return impl_->grad;
}

void Tensor::zero_grad() {
  impl_->grad.assign(impl_->data.size(), 0.0);
}

namespace {
thread_local Graph* g_active_graph = nullptr;
}

Graph::Graph() {
  prev_ = g_active_graph;
  g_active_graph = this;
}

Graph::~Graph() { g_active_graph = prev_; }

Graph* Graph::active() { return g_active_graph; }

void Graph::record(const char* op,
                   std::vector<std::shared_ptr<detail::TensorImpl>> inputs,
                   std::shared_ptr<detail::TensorImpl> output,
                   std::function<void()> backward) {
  output->node = static_cast<std::int64_t>(records_.size());
  records_.push_back(
      Record{op, std::move(inputs), std::move(output), std::move(backward)});
}

void Graph::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    detail::fail_contract("backward: loss must be scalar, got " +
                          std::to_string(loss.rows()) + "x" +
                          std::to_string(loss.cols()));
  }
  auto impl = loss.impl();
  if (impl->node < 0) {  // loss is a leaf: nothing to propagate
    detail::ensure_grad(*impl);
    impl->grad[0] += 1.0;
    return;
  }
  if (static_cast<std::size_t>(impl->node) >= records_.size() ||
      records_[impl->node].output != impl) {
    detail::fail_contract("backward: loss does not belong to this graph");
  }
  // Tape-produced grads are per-sweep scratch; only leaves accumulate across
  // repeated backward calls.
  for (std::int64_t i = impl->node; i >= 0; --i) {
    records_[i].output->grad.clear();
  }
  detail::ensure_grad(*impl);
  impl->grad[0] = 1.0;
  for (std::int64_t i = impl->node; i >= 0; --i) {
    Record& r = records_[i];
    if (!r.output->grad.empty()) r.backward();
  }
}

std::string Graph::dump() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    const Record& r = records_[i];
    out << "#" << i << " " << r.op << " [";
    for (std::size_t k = 0; k < r.inputs.size(); ++k) {
      if (k) out << ", ";
      out << (r.inputs[k]->node >= 0 ? "#" + std::to_string(r.inputs[k]->node)
                                     : std::string("leaf"))
          << " " << r.inputs[k]->rows << "x" << r.inputs[k]->cols;
    }
    out << "] -> " << r.output->rows << "x" << r.output->cols << "\n";
  }
  return out.str();
}

}  // namespace cloven
