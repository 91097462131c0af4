#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace spgan {

// Extents, row-major. Canonical image layout is (channels, height, width);
// losses and other reductions are rank-0 scalars.
using Shape = std::vector<int>;

int64_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

class Tape;

namespace detail {
struct TensorData {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // same length as value while tracked, else empty
  bool tracked = false;
  Tape* tape = nullptr;
};
}  // namespace detail

// Value-semantics handle onto a shared buffer of 64-bit floats. Copies are
// shallow. A tensor recorded on a tape additionally carries a same-length
// gradient buffer, populated by Tape::backward.
class Tensor {
 public:
  Tensor() : d_(std::make_shared<detail::TensorData>()) {}

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor from_data(Shape shape, std::vector<double> data);
  static Tensor scalar(double v) { return from_data({}, {v}); }

  const Shape& shape() const { return d_->shape; }
  int rank() const { return static_cast<int>(d_->shape.size()); }
  int64_t size() const { return static_cast<int64_t>(d_->value.size()); }

  double* data() { return d_->value.data(); }
  const double* data() const { return d_->value.data(); }
  std::span<const double> values() const { return d_->value; }

  double item() const;  // value of a single-element tensor

  bool tracked() const { return d_->tracked; }
  Tape* tape() const { return d_->tape; }
  std::span<const double> grad() const;

  // Deep copy with no tape link.
  Tensor detached() const;

  std::shared_ptr<detail::TensorData> payload() const { return d_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorData> d) : d_(std::move(d)) {}
  std::shared_ptr<detail::TensorData> d_;
  friend class Tape;
};

// Reverse-mode tape. Operations append one node each in execution order,
// which is topological by construction; backward() replays the nodes once,
// in reverse. Confined to a single thread.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  ~Tape();

  // Mark an existing tensor as a differentiable leaf of this tape and
  // zero its gradient buffer.
  void watch(Tensor& t);

  // Called by ops: make `t` a tracked intermediate of this tape.
  void adopt(Tensor& t);

  // Append the backward step for the most recent operation.
  void record(std::function<void()> backward_step);

  // Reverse accumulation from a scalar loss. Seeds d(loss)/d(loss) = 1,
  // visits nodes exactly once in reverse order. A second call without a
  // fresh tape is rejected.
  void backward(const Tensor& loss);

  bool backward_run() const { return backward_done_; }
  size_t node_count() const { return nodes_.size(); }

 private:
  void track(const std::shared_ptr<detail::TensorData>& d);

  std::vector<std::function<void()>> nodes_;
  std::vector<std::shared_ptr<detail::TensorData>> tracked_;
  bool backward_done_ = false;
};

// The tape shared by any tracked argument; null when none is tracked.
// Mixing tensors from two live tapes is rejected.
Tape* common_tape(std::initializer_list<const Tensor*> ts);

}  // namespace spgan
