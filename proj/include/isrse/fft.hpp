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

// Unitary DFT helpers (1/sqrt(N) in both directions) on top of Eigen's FFT.

#include "common.hpp"

#include <unsupported/Eigen/FFT>

#include <span>

namespace isrse {

namespace detail {
inline Eigen::FFT<double>& fft_engine()
{
    thread_local Eigen::FFT<double> engine;
    return engine;
}
} // namespace detail

inline void dft_unitary(std::span<const cplx> in, std::span<cplx> out)
{
    const auto n = static_cast<Eigen::Index>(in.size());
    detail::fft_engine().fwd(out.data(), in.data(), n);
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& v : out)
        v *= s;
}

inline void idft_unitary(std::span<const cplx> in, std::span<cplx> out)
{
    const auto n = static_cast<Eigen::Index>(in.size());
    auto& f = detail::fft_engine();
    f.SetFlag(Eigen::FFT<double>::Unscaled);
    f.inv(out.data(), in.data(), n);
    f.ClearFlag(Eigen::FFT<double>::Unscaled);
    const double s = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& v : out)
        v *= s;
}

inline CVec dft_unitary(const CVec& in)
{
    CVec out(in.size());
    dft_unitary(std::span<const cplx>(in), std::span<cplx>(out));
    return out;
}

inline CVec idft_unitary(const CVec& in)
{
    CVec out(in.size());
    idft_unitary(std::span<const cplx>(in), std::span<cplx>(out));
    return out;
}

// Plain (unnormalized) forward DFT and 1/N inverse, the classical pair.
inline CVec dft_plain(const CVec& in)
{
    CVec out(in.size());
    detail::fft_engine().fwd(out.data(), in.data(), static_cast<Eigen::Index>(in.size()));
    return out;
}

inline CVec idft_plain(const CVec& in)
{
    CVec out(in.size());
    detail::fft_engine().inv(out.data(), in.data(), static_cast<Eigen::Index>(in.size()));
    return out;
}

} // namespace isrse
