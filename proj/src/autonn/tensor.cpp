#include "autonn/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "common/error.hpp"

namespace ipseg::nn {

std::int64_t numel(const Shape& shape)
{
    std::int64_t n = 1;
    for (auto d : shape)
        n *= d;
    return n;
}

std::string shape_string(const Shape& shape)
{
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i)
            s += ",";
        s += std::to_string(shape[i]);
    }
    return s + ")";
}

namespace {
thread_local bool t_grad_enabled = true;

void check_shape(const Shape& shape)
{
    for (auto d : shape)
        if (d < 0)
            throw Error(ErrorCode::ShapeMismatch, "negative extent in shape " + shape_string(shape));
}
}  // namespace

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

template <class T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad)
{
    return full(std::move(shape), T(0), requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad)
{
    check_shape(shape);
    auto node = std::make_shared<Node<T>>();
    node->data.assign(static_cast<std::size_t>(nn::numel(shape)), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor<T>(std::move(node));
}

template <class T>
Tensor<T> Tensor<T>::from(Shape shape, std::span<const T> values, bool requires_grad)
{
    check_shape(shape);
    if (static_cast<std::int64_t>(values.size()) != nn::numel(shape))
        throw Error(ErrorCode::ShapeMismatch, "value count does not match shape " + shape_string(shape));
    auto node = std::make_shared<Node<T>>();
    node->data.assign(values.begin(), values.end());
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor<T>(std::move(node));
}

template <class T>
Tensor<T> make_result(Shape shape, std::vector<Tensor<T>> parents, std::function<void(Node<T>&)> backward_fn)
{
    Tensor<T> out = Tensor<T>::zeros(std::move(shape));
    if (!grad_enabled())
        return out;
    const bool any = std::any_of(parents.begin(), parents.end(), [](const Tensor<T>& p) { return p.defined() && p.requires_grad(); });
    if (!any)
        return out;
    Node<T>* node = out.node();
    node->requires_grad = true;
    for (auto& p : parents)
        if (p.defined() && p.requires_grad())
            node->parents.push_back(p.node_ptr());
    node->backward_fn = std::move(backward_fn);
    return out;
}

template <class T>
std::size_t backward(const Tensor<T>& loss, std::span<Tensor<T>> params)
{
    if (!loss.defined() || loss.numel() != 1)
        throw Error(ErrorCode::NotScalarLoss, "backward needs a single-element loss");
    if (!loss.requires_grad())
        throw Error(ErrorCode::NotScalarLoss, "loss does not depend on any tensor that requires grad");

    // Iterative post-order DFS; reversed it is a valid reverse sweep. `order`
    // owns the nodes so each one lives until it has been swept.
    std::vector<std::shared_ptr<Node<T>>> order;
    std::unordered_set<Node<T>*> seen;
    std::vector<std::pair<std::shared_ptr<Node<T>>, std::size_t>> stack{{loss.node_ptr(), 0}};
    seen.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            std::shared_ptr<Node<T>> p = node->parents[next++];
            if (p->requires_grad && seen.insert(p.get()).second)
                stack.emplace_back(std::move(p), 0);
        } else {
            order.push_back(std::move(node));
            stack.pop_back();
        }
    }

    loss.node()->ensure_grad()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        std::shared_ptr<Node<T>> node = std::move(*it);
        if (node->is_leaf())
            continue;
        if (!node->grad.empty())
            node->backward_fn(*node);
        node->backward_fn = nullptr;
        node->parents.clear();
        node->grad.clear();
        node->grad.shrink_to_fit();
    }

    std::size_t disconnected = 0;
    for (auto& p : params) {
        if (!seen.count(p.node())) {
            ++disconnected;
            p.node()->ensure_grad();
        }
    }
    return disconnected;
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> make_result(Shape, std::vector<Tensor<float>>, std::function<void(Node<float>&)>);
template Tensor<double> make_result(Shape, std::vector<Tensor<double>>, std::function<void(Node<double>&)>);
template std::size_t backward(const Tensor<float>&, std::span<Tensor<float>>);
template std::size_t backward(const Tensor<double>&, std::span<Tensor<double>>);

}  // namespace ipseg::nn
