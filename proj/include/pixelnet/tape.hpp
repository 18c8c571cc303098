#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "pixelnet/errors.hpp"
#include "pixelnet/tensor.hpp"

namespace pixelnet {

// One value slot in the recorded graph. `grad` is allocated zero-filled as
// soon as the slot is created with needs_grad, so every registered parameter
// starts each step with a fresh zero gradient buffer of identical shape.
template <typename T>
struct TapeNode {
    Tensor<T> value;
    Tensor<T> grad;
    bool needs_grad = false;
    std::string tag;
};

template <typename T>
using NodePtr = std::shared_ptr<TapeNode<T>>;

// Reverse-mode tape. Single-writer: one training step owns the tape
// exclusively; node values are immutable once recorded. backward() replays
// the recorded primitive applications in exact reverse order of recording.
template <typename T>
class Tape {
  public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }

    NodePtr<T> constant(Tensor<T> v, std::string tag = {}) {
        return make_node(std::move(v), false, std::move(tag));
    }

    // Leaf with a gradient buffer; used for model parameters and for inputs
    // whose gradient the caller wants (e.g. the gradient-check harness).
    NodePtr<T> leaf(Tensor<T> v, std::string tag = {}) {
        return make_node(std::move(v), grad_enabled_, std::move(tag));
    }

    NodePtr<T> output(Tensor<T> v, bool needs_grad, std::string tag = {}) {
        return make_node(std::move(v), needs_grad && grad_enabled_, std::move(tag));
    }

    void record(std::function<void()> backward_fn) {
        if (grad_enabled_) ops_.push_back(std::move(backward_fn));
    }

    void backward(const NodePtr<T>& loss) {
        if (!grad_enabled_) throw InternalError("backward on a grad-disabled tape");
        if (loss->value.size() != 1) throw InternalError("backward root must be scalar");
        if (!loss->needs_grad) throw InternalError("backward root does not require grad");
        loss->grad[0] = T(1);
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    }

    // Activation ledger: total bytes held by every recorded value slot.
    std::int64_t value_bytes() const { return value_bytes_; }
    std::int64_t grad_bytes() const { return grad_bytes_; }
    std::size_t num_slots() const { return num_slots_; }
    std::size_t num_ops() const { return ops_.size(); }

  private:
    NodePtr<T> make_node(Tensor<T> v, bool needs_grad, std::string tag) {
        auto n = std::make_shared<TapeNode<T>>();
        n->needs_grad = needs_grad;
        n->tag = std::move(tag);
        value_bytes_ += v.bytes();
        if (needs_grad) {
            n->grad = Tensor<T>(v.shape());
            grad_bytes_ += n->grad.bytes();
        }
        n->value = std::move(v);
        ++num_slots_;
        keep_.push_back(n);
        return n;
    }

    bool grad_enabled_;
    std::vector<std::function<void()>> ops_;
    std::vector<NodePtr<T>> keep_;
    std::int64_t value_bytes_ = 0;
    std::int64_t grad_bytes_ = 0;
    std::size_t num_slots_ = 0;
};

}  // namespace pixelnet
