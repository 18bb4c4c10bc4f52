#include "tapir/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace tapir {

namespace {
thread_local Tape* g_active_tape = nullptr;
}

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int e : shape) {
        if (e <= 0) throw std::invalid_argument("tensor shape extents must be positive");
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    Tensor t;
    t.n_ = std::make_shared<TensorNode>();
    t.n_->value.assign(shape_numel(shape), real(0));
    t.n_->shape = std::move(shape);
    if (requires_grad) {
        t.n_->tracked = true;
        t.n_->grad.assign(t.n_->value.size(), real(0));
    }
    return t;
}

Tensor Tensor::full(std::vector<int> shape, real v, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (auto& x : t.n_->value) x = v;
    return t;
}

Tensor Tensor::from(std::vector<real> data, std::vector<int> shape, bool requires_grad) {
    if (data.size() != shape_numel(shape)) {
        throw std::invalid_argument("tensor data size does not match shape");
    }
    Tensor t = zeros(std::move(shape), requires_grad);
    t.n_->value = std::move(data);
    return t;
}

Tensor Tensor::scalar(real v, bool requires_grad) { return from({v}, {1}, requires_grad); }

std::vector<real>& Tensor::grad() {
    if (!tracked()) throw std::logic_error("tensor has no gradient slot");
    return n_->grad;
}

const std::vector<real>& Tensor::grad() const {
    if (!tracked()) throw std::logic_error("tensor has no gradient slot");
    return n_->grad;
}

real Tensor::item() const {
    if (size() != 1) throw std::logic_error("item() requires a scalar tensor");
    return n_->value[0];
}

void Tensor::zero_grad() {
    if (tracked()) std::fill(n_->grad.begin(), n_->grad.end(), real(0));
}

void Tensor::check_finite(const char* what) const {
    for (real v : n_->value) {
        if (!std::isfinite(static_cast<double>(v))) {
            throw NumericError(std::string("non-finite value in ") + what);
        }
    }
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : prev_(g_active_tape) { g_active_tape = &tape; }

TapeScope::~TapeScope() { g_active_tape = prev_; }

Tensor make_op(std::vector<int> shape, std::vector<Tensor> parents,
               std::function<void(TensorNode&)> backward) {
    Tensor out = Tensor::zeros(std::move(shape));
    Tape* tape = g_active_tape;
    if (tape != nullptr) {
        bool any_tracked = false;
        for (const Tensor& p : parents) {
            if (p.tracked()) {
                any_tracked = true;
                break;
            }
        }
        if (any_tracked) {
            out.n_->tracked = true;
            out.n_->grad.assign(out.n_->value.size(), real(0));
            out.n_->parents = std::move(parents);
            out.n_->backward = std::move(backward);
            tape->record(out.n_);
        }
    }
    return out;
}

void Tape::backward(const Tensor& loss) {
    if (consumed_) throw std::logic_error("tape already consumed");
    if (!loss.defined() || loss.size() != 1) {
        throw std::invalid_argument("backward requires a scalar loss");
    }
    if (!loss.tracked()) throw std::invalid_argument("loss is not tracked by this tape");
    consumed_ = true;
    loss.node()->grad[0] = real(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        TensorNode& n = **it;
        if (n.backward) n.backward(n);
    }
}

void Tape::clear() {
    nodes_.clear();
    consumed_ = false;
}

}  // namespace tapir
