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

// Composite denoising loss: alpha * MSE(z, z_hat) + (1 - alpha) * (1 - SSIM(x, x_hat)).

#include "ops.hpp"

namespace isrse::nn {

struct LossWeights {
    double alpha = 0.9;
    double ssim_c1 = 1e-4;
    double ssim_c2 = 9e-4;

    void validate() const
    {
        if (!(alpha >= 0.0 && alpha <= 1.0))
            throw std::invalid_argument("LossWeights: alpha must lie in [0, 1], got " + std::to_string(alpha));
        if (!(ssim_c1 > 0.0 && ssim_c2 > 0.0))
            throw std::invalid_argument("LossWeights: ssim constants must be > 0");
    }
};

template <class T>
Tensor<T> composite_loss(const Tensor<T>& z, const Tensor<T>& z_hat, const Tensor<T>& x, const Tensor<T>& x_hat,
                         const LossWeights& w)
{
    w.validate();
    const Tensor<T> l_mse = mse_loss(z_hat, z);
    if (w.alpha == 1.0)
        return l_mse;
    const Tensor<T> s = ssim_global(x, x_hat, SsimConstants{w.ssim_c1, w.ssim_c2});
    const Tensor<T> l_ssim = add_scalar(scale(s, T(-1)), T(1));
    return add(scale(l_mse, static_cast<T>(w.alpha)), scale(l_ssim, static_cast<T>(1.0 - w.alpha)));
}

} // namespace isrse::nn
