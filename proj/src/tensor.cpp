#include "spgan/tensor.hpp"

#include <stdexcept>

namespace spgan {

int64_t shape_size(const Shape& s) {
  int64_t n = 1;
  for (int e : s) n *= e;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  out += ")";
  return out;
}

Tensor Tensor::zeros(Shape shape) {
  for (int e : shape)
    if (e <= 0)
      throw std::invalid_argument("Tensor: non-positive extent in shape " +
                                  shape_str(shape));
  auto d = std::make_shared<detail::TensorData>();
  d->value.assign(static_cast<size_t>(shape_size(shape)), 0.0);
  d->shape = std::move(shape);
  return Tensor(std::move(d));
}

Tensor Tensor::full(Shape shape, double v) {
  Tensor t = zeros(std::move(shape));
  for (auto& x : t.d_->value) x = v;
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
  for (int e : shape)
    if (e <= 0)
      throw std::invalid_argument("Tensor: non-positive extent in shape " +
                                  shape_str(shape));
  if (shape_size(shape) != static_cast<int64_t>(data.size()))
    throw std::invalid_argument("Tensor: data length " +
                                std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  auto d = std::make_shared<detail::TensorData>();
  d->shape = std::move(shape);
  d->value = std::move(data);
  return Tensor(std::move(d));
}

double Tensor::item() const {
  if (size() != 1)
    throw std::invalid_argument("Tensor::item: tensor has " +
                                std::to_string(size()) + " elements");
  return d_->value[0];
}

std::span<const double> Tensor::grad() const {
  if (!d_->tracked)
    throw std::logic_error("Tensor::grad: tensor is not tracked on a tape");
  return d_->grad;
}

Tensor Tensor::detached() const {
  auto d = std::make_shared<detail::TensorData>();
  d->shape = d_->shape;
  d->value = d_->value;
  return Tensor(std::move(d));
}

Tape::~Tape() {
  for (auto& d : tracked_) {
    d->tracked = false;
    d->tape = nullptr;
  }
}

void Tape::track(const std::shared_ptr<detail::TensorData>& d) {
  if (d->tracked && d->tape != this)
    throw std::logic_error("Tape: tensor already tracked on another tape");
  d->tracked = true;
  d->tape = this;
  d->grad.assign(d->value.size(), 0.0);
  tracked_.push_back(d);
}

void Tape::watch(Tensor& t) {
  track(t.d_);
}

void Tape::adopt(Tensor& t) {
  track(t.d_);
}

void Tape::record(std::function<void()> backward_step) {
  nodes_.push_back(std::move(backward_step));
}

void Tape::backward(const Tensor& loss) {
  if (backward_done_)
    throw std::logic_error(
        "Tape::backward: called twice; use a fresh tape per backward pass");
  if (loss.size() != 1 || loss.rank() != 0)
    throw std::invalid_argument("Tape::backward: loss must be a rank-0 scalar, got shape " +
                                shape_str(loss.shape()));
  if (!loss.tracked() || loss.tape() != this)
    throw std::logic_error("Tape::backward: loss is not tracked on this tape");
  backward_done_ = true;
  loss.d_->grad[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

Tape* common_tape(std::initializer_list<const Tensor*> ts) {
  Tape* tape = nullptr;
  for (const Tensor* t : ts) {
    if (!t->tracked()) continue;
    if (tape == nullptr) {
      tape = t->tape();
    } else if (tape != t->tape()) {
      throw std::logic_error("op: arguments live on different tapes");
    }
  }
  return tape;
}

}  // namespace spgan
