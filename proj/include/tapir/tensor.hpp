#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "tapir/common.hpp"

namespace tapir {

class Tensor;

// One recorded value in the computation graph. `backward` reads this node's
// grad and accumulates into the parents' grads.
struct TensorNode {
    std::vector<int> shape;
    std::vector<real> value;
    std::vector<real> grad;  // allocated iff tracked
    bool tracked = false;
    std::vector<Tensor> parents;
    std::function<void(TensorNode&)> backward;

    std::size_t size() const { return value.size(); }
};

// Value-semantic handle to a shared node. Cheap to copy; the node is immutable
// once built except for gradient accumulation and optimizer updates.
class Tensor {
  public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, real v, bool requires_grad = false);
    static Tensor from(std::vector<real> data, std::vector<int> shape, bool requires_grad = false);
    static Tensor scalar(real v, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(n_); }
    const std::vector<int>& shape() const { return n_->shape; }
    int dim(int i) const { return n_->shape[static_cast<std::size_t>(i)]; }
    int ndim() const { return static_cast<int>(n_->shape.size()); }
    std::size_t size() const { return n_->value.size(); }

    std::vector<real>& value() { return n_->value; }
    const std::vector<real>& value() const { return n_->value; }
    std::vector<real>& grad();
    const std::vector<real>& grad() const;
    bool tracked() const { return n_ && n_->tracked; }

    real item() const;        // scalar tensors only
    real at(int i) const { return n_->value[static_cast<std::size_t>(i)]; }
    real at(int i, int j) const {
        return n_->value[static_cast<std::size_t>(i) * static_cast<std::size_t>(n_->shape[1]) +
                         static_cast<std::size_t>(j)];
    }

    void zero_grad();
    void check_finite(const char* what) const;  // throws NumericError on NaN/Inf

    TensorNode* node() const { return n_.get(); }
    std::shared_ptr<TensorNode> handle() const { return n_; }

  private:
    friend class Tape;
    friend Tensor make_op(std::vector<int> shape, std::vector<Tensor> parents,
                          std::function<void(TensorNode&)> backward);
    std::shared_ptr<TensorNode> n_;
};

// Ordered record of the differentiable ops executed while the tape was
// active. Backward replays it in exact reverse execution order.
class Tape {
  public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Assigns dLoss/dTensor to every tracked tensor reachable from `loss`.
    // Errors: non-scalar loss, tape already consumed.
    void backward(const Tensor& loss);

    void clear();
    std::size_t node_count() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }

    void record(std::shared_ptr<TensorNode> node) { nodes_.push_back(std::move(node)); }

  private:
    std::vector<std::shared_ptr<TensorNode>> nodes_;
    bool consumed_ = false;
};

// Tape recording is single-threaded per training context: the active tape is
// a thread-local set for the lifetime of a TapeScope.
Tape* active_tape();

class TapeScope {
  public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

  private:
    Tape* prev_;
};

// Op constructor used by ops.cpp: allocates the output node, marks it tracked
// and records it when an active tape sees a tracked parent.
Tensor make_op(std::vector<int> shape, std::vector<Tensor> parents,
               std::function<void(TensorNode&)> backward);

std::size_t shape_numel(const std::vector<int>& shape);

}  // namespace tapir
