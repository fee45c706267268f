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

// Transmit multi-beam design and least-squares beam synthesis.

#include "array.hpp"

#include <sstream>

namespace isrse {

enum class BeamKind { tx_scan, tx_comm, tx_combined, rx_ls };

struct BeamVector {
    Eigen::VectorXcd weights;
    BeamKind kind = BeamKind::tx_scan;
};

// Normalized conj(alpha)/||alpha||; alpha^T w = sqrt(M) at the given direction.
inline BeamVector matched_beam(const ArrayGeometry& g, const AnglePair& dir, BeamKind kind)
{
    Eigen::VectorXcd a = steering_vector(g, dir);
    return {a.conjugate() / a.norm(), kind};
}

// Minimum-norm least-squares solution of A_q w = v, where the rows of A_q
// are alpha^T(q_k). The pseudo-inverse uses an SVD with relative cutoff
// 1e-10 * sigma_max; direction pairs whose steering vectors are numerically
// coherent (normalized correlation above 1 - 1e-4) are rejected.
inline BeamVector ls_beam(const ArrayGeometry& g, const std::vector<AnglePair>& dirs, const Eigen::VectorXcd& desired,
                          BeamKind kind = BeamKind::tx_scan)
{
    const auto k = static_cast<Eigen::Index>(dirs.size());
    if (k < 1)
        throw std::invalid_argument("ls_beam: need at least one direction");
    if (k > g.size())
        throw std::invalid_argument("ls_beam: more directions than antennas");
    if (desired.size() != k)
        throw std::invalid_argument("ls_beam: desired response length must equal the number of directions");
    Eigen::MatrixXcd a(k, g.size());
    for (Eigen::Index i = 0; i < k; ++i)
        a.row(i) = steering_vector(g, dirs[i]).transpose();
    const double m = static_cast<double>(g.size());
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = i + 1; j < k; ++j) {
            const double corr = std::abs(a.row(i).dot(a.row(j))) / m;
            if (corr > 1.0 - 1e-4) {
                std::ostringstream os;
                os << "ls_beam: rank-deficient response matrix, directions " << i << " (az "
                   << rad2deg(dirs[i].azimuth) << ", el " << rad2deg(dirs[i].elevation) << " deg) and " << j
                   << " (az " << rad2deg(dirs[j].azimuth) << ", el " << rad2deg(dirs[j].elevation)
                   << " deg) are not separable";
                throw std::invalid_argument(os.str());
            }
        }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double cutoff = 1e-10 * s(0);
    Eigen::VectorXcd uhv = svd.matrixU().adjoint() * desired;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) <= cutoff)
            throw std::invalid_argument("ls_beam: rank-deficient response matrix");
        uhv(i) /= s(i);
    }
    return {svd.matrixV() * uhv, kind};
}

// Receive-side LS beam: w^H alpha(q_k) = v_k, so that w^H h separates the
// component arriving from q_k.
inline BeamVector ls_receive_beam(const ArrayGeometry& g, const std::vector<AnglePair>& dirs,
                                  const Eigen::VectorXcd& desired)
{
    BeamVector b = ls_beam(g, dirs, desired, BeamKind::rx_ls);
    b.weights = b.weights.conjugate().eval();
    return b;
}

// w_t = sqrt(beta_R) e^{j phi} w_s + sqrt(1 - beta_R) w_c, no renormalization.
inline BeamVector combine_multibeam(const BeamVector& scan, const BeamVector& comm, double beta_r, double phi)
{
    if (scan.weights.size() != comm.weights.size())
        throw std::invalid_argument("combine_multibeam: length mismatch");
    if (std::abs(scan.weights.norm() - 1.0) > 1e-9 || std::abs(comm.weights.norm() - 1.0) > 1e-9)
        throw std::invalid_argument("combine_multibeam: sub-beams must have unit norm");
    if (!(beta_r >= 0.0 && beta_r <= 1.0))
        throw std::invalid_argument("combine_multibeam: beta_R must lie in [0, 1]");
    Eigen::VectorXcd w = std::sqrt(beta_r) * std::polar(1.0, phi) * scan.weights + std::sqrt(1.0 - beta_r) * comm.weights;
    return {w, BeamKind::tx_combined};
}

// chi = alpha^T(q) w.
inline cplx tx_gain(const AnglePair& aod, const BeamVector& w, const ArrayGeometry& g)
{
    if (w.weights.size() != g.size())
        throw std::invalid_argument("tx_gain: beam length does not match the array");
    return steering_vector(g, aod).transpose() * w.weights;
}

} // namespace isrse
