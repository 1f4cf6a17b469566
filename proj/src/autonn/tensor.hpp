#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "common/memtrack.hpp"

namespace ipseg::nn {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string shape_string(const Shape& shape);

template <class T>
struct Node {
    Shape shape;
    mem::TrackedVector<T> data;
    mem::TrackedVector<T> grad;  // empty until something writes a gradient
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into the parents' grads.
    std::function<void(Node&)> backward_fn;

    bool is_leaf() const { return !backward_fn; }
    T* ensure_grad()
    {
        if (grad.empty())
            grad.assign(data.size(), T(0));
        return grad.data();
    }
};

/// Shared handle to a graph node. Copies alias the same storage.
template <class T>
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, T value, bool requires_grad = false);
    static Tensor from(Shape shape, std::span<const T> values, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::int64_t dim(std::size_t i) const { return node_->shape[i]; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->data.size(); }

    std::span<T> data() { return node_->data; }
    std::span<const T> data() const { return node_->data; }
    T item() const { return node_->data.at(0); }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<T> grad() { return node_->grad; }
    std::span<const T> grad() const { return node_->grad; }
    void zero_grad() { node_->grad.clear(); node_->grad.shrink_to_fit(); }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }

    Node<T>* node() const { return node_.get(); }
    const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

private:
    std::shared_ptr<Node<T>> node_;
};

bool grad_enabled();

// Disables graph recording in the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

// Creates an op result. When recording is on and any parent requires grad,
// the result keeps the parents and the backward closure.
template <class T>
Tensor<T> make_result(Shape shape, std::vector<Tensor<T>> parents, std::function<void(Node<T>&)> backward_fn);

/// Reverse-mode sweep from a scalar loss. Gradients accumulate into leaves;
/// intermediate nodes release their grads and saved state once consumed.
/// Returns how many of `params` the loss never reached (their grad is zeroed).
template <class T>
std::size_t backward(const Tensor<T>& loss, std::span<Tensor<T>> params = {});

}  // namespace ipseg::nn
