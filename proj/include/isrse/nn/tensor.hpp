// SPDX-License-Identifier: Apache-2.0
//
// isrse - bistatic ISAC signal enhancement workbench
// Copyright (C) 2026 The isrse authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

// Dense tensors with a reverse-mode tape. Every op returns a new node that
// remembers its parents and a closure accumulating parent gradients; the
// tape is dropped when recording is disabled (inference).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace isrse::nn {

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& s)
{
    std::size_t n = 1;
    for (int d : s)
        n *= static_cast<std::size_t>(d);
    return n;
}

inline std::string shape_str(const Shape& s)
{
    std::ostringstream o;
    o << '[';
    for (std::size_t i = 0; i < s.size(); ++i)
        o << (i ? "," : "") << s[i];
    o << ']';
    return o.str();
}

namespace detail {
inline bool& grad_mode()
{
    thread_local bool enabled = true;
    return enabled;
}
} // namespace detail

inline bool grad_enabled() { return detail::grad_mode(); }

// Disables tape recording for the lifetime of the guard.
class NoGradGuard {
  public:
    NoGradGuard() : prev_(detail::grad_mode()) { detail::grad_mode() = false; }
    ~NoGradGuard() { detail::grad_mode() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

template <class T>
struct Node {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    std::vector<T>& grad_buffer()
    {
        if (grad.size() != data.size())
            grad.assign(data.size(), T(0));
        return grad;
    }
};

template <class T>
class Tensor {
  public:
    using Scalar = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false) : node_(std::make_shared<Node<T>>())
    {
        node_->data.assign(nn::numel(shape), fill);
        node_->shape = std::move(shape);
        node_->requires_grad = requires_grad;
    }
    Tensor(Shape shape, std::vector<T> data, bool requires_grad = false) : node_(std::make_shared<Node<T>>())
    {
        if (data.size() != nn::numel(shape))
            throw std::invalid_argument("Tensor: data length " + std::to_string(data.size()) +
                                        " does not match shape " + shape_str(shape));
        node_->shape = std::move(shape);
        node_->data = std::move(data);
        node_->requires_grad = requires_grad;
    }

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    int dim(int i) const { return node_->shape.at(static_cast<std::size_t>(i)); }
    int rank() const { return static_cast<int>(node_->shape.size()); }
    std::size_t numel() const { return node_->data.size(); }
    std::vector<T>& data() { return node_->data; }
    const std::vector<T>& data() const { return node_->data; }
    std::vector<T>& grad() { return node_->grad_buffer(); }
    bool has_grad() const { return node_->grad.size() == node_->data.size(); }
    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool r) { node_->requires_grad = r; }
    T item() const
    {
        if (numel() != 1)
            throw std::invalid_argument("Tensor::item on tensor of shape " + shape_str(shape()));
        return node_->data[0];
    }
    void zero_grad() { node_->grad.assign(node_->data.size(), T(0)); }
    const std::shared_ptr<Node<T>>& node() const { return node_; }

    // Fresh leaf sharing no tape history.
    Tensor detach() const { return Tensor(shape(), data(), false); }

    // Reverse pass from a scalar.
    void backward() const
    {
        if (numel() != 1)
            throw std::invalid_argument("backward: root must be a scalar, got " + shape_str(shape()));
        std::vector<Node<T>*> order;
        std::unordered_set<Node<T>*> seen;
        std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
        seen.insert(node_.get());
        while (!stack.empty()) {
            auto& [n, i] = stack.back();
            if (i < n->parents.size()) {
                Node<T>* p = n->parents[i++].get();
                if (seen.insert(p).second)
                    stack.emplace_back(p, 0);
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }
        node_->grad_buffer()[0] += T(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it)
            if ((*it)->backward_fn && (*it)->grad.size() == (*it)->data.size())
                (*it)->backward_fn(**it);
    }

  private:
    std::shared_ptr<Node<T>> node_;
};

// Creates the result node of an op; parents/backward are only kept when at
// least one input requires a gradient and recording is on.
template <class T>
Tensor<T> make_result(Shape shape, const std::vector<Tensor<T>>& inputs, std::function<void(Node<T>&)> bw)
{
    Tensor<T> out(std::move(shape));
    if (!grad_enabled())
        return out;
    bool any = false;
    for (const auto& t : inputs)
        any = any || t.requires_grad();
    if (!any)
        return out;
    auto& n = *out.node();
    n.requires_grad = true;
    for (const auto& t : inputs)
        if (t.requires_grad())
            n.parents.push_back(t.node());
    n.backward_fn = std::move(bw);
    return out;
}

template <class T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using ConstMatMap = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

} // namespace isrse::nn
