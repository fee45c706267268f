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

// Counter-based seed derivation. Every random draw in the workbench comes
// from a generator seeded by (master seed, trial index, stage tag); there is
// no global RNG.

#include "common.hpp"

#include <cstdint>
#include <random>

namespace isrse {

using Rng = std::mt19937_64;

enum class Stage : std::uint64_t {
    scene = 1,
    data = 2,
    noise = 3,
    diffusion = 4,
    training = 5,
    init = 6,
    dataset = 7,
    shuffle = 8,
    crop = 9,
    pilot = 10,
    enhance = 11,
    comm_noise = 12,
};

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t trial, std::uint64_t stage)
{
    return splitmix64(splitmix64(splitmix64(master) ^ trial) ^ (stage * 0xD1B54A32D192ED03ull));
}

inline Rng make_rng(std::uint64_t master, std::uint64_t trial, Stage stage)
{
    return Rng(derive_seed(master, trial, static_cast<std::uint64_t>(stage)));
}

// Circularly-symmetric complex Gaussian with E|z|^2 = variance.
inline cplx complex_normal(Rng& rng, double variance)
{
    std::normal_distribution<double> nd(0.0, std::sqrt(variance / 2.0));
    const double re = nd(rng);
    const double im = nd(rng);
    return {re, im};
}

inline double uniform(Rng& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

} // namespace isrse
