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

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace isrse {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr cplx kJ{0.0, 1.0};

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

// Direction in array coordinates: azimuth from +x in the x-y plane,
// elevation measured from +z. Both in radians.
struct AnglePair {
    double azimuth = 0.0;
    double elevation = 0.0;
};

inline Vec3 unit_vector(const AnglePair& q)
{
    return {std::sin(q.elevation) * std::cos(q.azimuth), std::sin(q.elevation) * std::sin(q.azimuth),
            std::cos(q.elevation)};
}

inline AnglePair angles_of(const Vec3& dir)
{
    const double n = dir.norm();
    if (!(n > 0.0))
        throw std::invalid_argument("angles_of: zero-length direction");
    const Vec3 u = dir / n;
    return {std::atan2(u.y(), u.x()), std::acos(std::clamp(u.z(), -1.0, 1.0))};
}

// Great-circle separation between two directions, radians.
inline double angular_distance(const AnglePair& a, const AnglePair& b)
{
    const double c = unit_vector(a).dot(unit_vector(b));
    return std::acos(std::clamp(c, -1.0, 1.0));
}

// Uniformly sampled complex baseband stream.
struct ComplexSignal {
    CVec samples;
    double sample_rate_hz = 0.0;

    std::size_t size() const { return samples.size(); }
};

inline double mean_power(const CVec& x)
{
    if (x.empty())
        return 0.0;
    double acc = 0.0;
    for (const auto& v : x)
        acc += std::norm(v);
    return acc / static_cast<double>(x.size());
}

inline bool all_finite(const CVec& x)
{
    for (const auto& v : x)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            return false;
    return true;
}

} // namespace isrse
