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

// UPA steering vectors. Element (p, q) with p along x and q along y sits at
// index q * mx + p (y-ramp Kronecker x-ramp), half-wavelength spacing.

#include "scenario.hpp"

namespace isrse {

struct DirectionCosines {
    double omega_x;
    double omega_y;
};

inline DirectionCosines direction_cosines(const AnglePair& q)
{
    return {std::sin(q.elevation) * std::cos(q.azimuth), std::sin(q.elevation) * std::sin(q.azimuth)};
}

inline Eigen::VectorXcd steering_vector(const ArrayGeometry& g, const AnglePair& q)
{
    const auto [ox, oy] = direction_cosines(q);
    Eigen::VectorXcd x(g.mx), y(g.my);
    for (int p = 0; p < g.mx; ++p)
        x(p) = std::polar(1.0, -kPi * p * ox);
    for (int r = 0; r < g.my; ++r)
        y(r) = std::polar(1.0, -kPi * r * oy);
    Eigen::VectorXcd a(g.size());
    for (int r = 0; r < g.my; ++r)
        a.segment(r * g.mx, g.mx) = y(r) * x;
    return a;
}

} // namespace isrse
