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

// Bias-corrected Adam.

#include "unet.hpp"

namespace isrse::nn {

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <class T>
struct AdamState {
    std::vector<std::vector<T>> m, v;
    long step = 0;
};

// Updates every tensor in `params` from its accumulated gradient (a missing
// gradient counts as zero).
template <class T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& st, const AdamConfig& c)
{
    if (st.m.empty()) {
        for (const auto& p : params) {
            st.m.emplace_back(p.numel(), T(0));
            st.v.emplace_back(p.numel(), T(0));
        }
    }
    if (st.m.size() != params.size())
        throw std::invalid_argument("adam_step: optimizer state does not match the parameter list");
    ++st.step;
    const double c1 = 1.0 - std::pow(c.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(c.beta2, static_cast<double>(st.step));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = params[k];
        if (st.m[k].size() != p.numel())
            throw std::invalid_argument("adam_step: state size mismatch for parameter " + std::to_string(k));
        const bool has = p.has_grad();
        auto& d = p.data();
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double g = has ? static_cast<double>(p.node()->grad[i]) : 0.0;
            const double m = c.beta1 * st.m[k][i] + (1.0 - c.beta1) * g;
            const double v = c.beta2 * st.v[k][i] + (1.0 - c.beta2) * g * g;
            st.m[k][i] = static_cast<T>(m);
            st.v[k][i] = static_cast<T>(v);
            d[i] -= static_cast<T>(c.lr * (m / c1) / (std::sqrt(v / c2) + c.eps));
        }
    }
}

template <class T>
std::vector<Tensor<T>> param_tensors(std::vector<NamedParam<T>>& named)
{
    std::vector<Tensor<T>> out;
    for (auto& p : named)
        out.push_back(p.value);
    return out;
}

template <class T>
void zero_grad(std::vector<Tensor<T>>& params)
{
    for (auto& p : params)
        p.zero_grad();
}

} // namespace isrse::nn
