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

#include <isrse/waveform.hpp>

#include <catch_amalgamated.hpp>

#include <boost/math/special_functions/erf.hpp>

using namespace isrse;
using Catch::Matchers::WithinAbs;

namespace {

SystemConfig small_config()
{
    SystemConfig c = desk_profile();
    c.n_subcarriers = 64;
    c.subcarrier_spacing_hz = c.bandwidth_hz / 64;
    c.n_packets = 3;
    c.symbols_per_packet = 4;
    return c;
}

double q_function(double x) { return 0.5 * boost::math::erfc(x / std::sqrt(2.0)); }

} // namespace

TEST_CASE("QPSK Gray map", "[waveform]")
{
    const double s = 1.0 / std::sqrt(2.0);
    const Bits b{0, 0, 1, 1, 0, 1, 1, 0};
    const CVec x = modulate_bits(b, Modulation::QPSK);
    CHECK(x[0] == cplx(s, s));
    CHECK(x[1] == cplx(-s, -s));
    CHECK(x[2] == cplx(s, -s));
    CHECK(x[3] == cplx(-s, s));
    CHECK_THROWS_AS(modulate_bits(Bits{1, 0, 1}, Modulation::QPSK), std::invalid_argument);
}

TEST_CASE("16-QAM has unit mean energy and Gray neighbours", "[waveform]")
{
    double e = 0.0;
    CVec pts;
    for (int v = 0; v < 16; ++v) {
        const Bits b{static_cast<std::uint8_t>(v >> 3 & 1), static_cast<std::uint8_t>(v >> 2 & 1),
                     static_cast<std::uint8_t>(v >> 1 & 1), static_cast<std::uint8_t>(v & 1)};
        const cplx p = modulate_bits(b, Modulation::QAM16)[0];
        pts.push_back(p);
        e += std::norm(p);
        std::uint8_t back[4];
        demap_symbol(p, Modulation::QAM16, back);
        for (int i = 0; i < 4; ++i)
            CHECK(back[i] == b[i]);
    }
    CHECK_THAT(e / 16.0, WithinAbs(1.0, 1e-15));
    CHECK(modulate_bits(Bits{0, 0, 0, 0}, Modulation::QAM16)[0] == cplx(3, 3) / std::sqrt(10.0));
    // Nearest neighbours differ in exactly one bit.
    const double d = 2.0 / std::sqrt(10.0);
    for (int a = 0; a < 16; ++a)
        for (int b = 0; b < 16; ++b)
            if (std::abs(std::abs(pts[a] - pts[b]) - d) < 1e-9)
                CHECK(std::popcount(static_cast<unsigned>(a ^ b)) == 1);
}

TEST_CASE("OFDM framing", "[waveform]")
{
    const SystemConfig c = small_config();
    const int n = c.n_subcarriers, m = c.n_symbols(), len = n + c.cp_samples();

    SECTION("single DC tone is constant modulus")
    {
        SymbolGrid g;
        g.data = Eigen::MatrixXcd::Zero(n, m);
        g.data(0, 0) = 1.0;
        const ComplexSignal s = build_frame(g, c);
        for (int i = 0; i < len; ++i)
            CHECK_THAT(std::abs(s.samples[i]), WithinAbs(1.0 / std::sqrt(n), 1e-15));
    }
    SECTION("zero grid gives zero signal")
    {
        SymbolGrid g;
        g.data = Eigen::MatrixXcd::Zero(n, m);
        for (const auto& v : build_frame(g, c).samples)
            CHECK(v == cplx{});
    }
    SECTION("cyclic prefix copies the symbol tail")
    {
        Rng rng(3);
        SymbolGrid g;
        g.data = Eigen::MatrixXcd::Random(n, m);
        const ComplexSignal s = build_frame(g, c);
        for (int k = 0; k < m; ++k)
            for (int i = 0; i < c.cp_samples(); ++i)
                CHECK(s.samples[k * len + i] == s.samples[k * len + n + i]);
    }
    SECTION("loopback round trip and Parseval")
    {
        Rng d(1), p(2);
        const IsacFrame f = make_isac_frame(c, d, p);
        const ComplexSignal s = build_frame(f.grid, c);
        REQUIRE(s.samples.size() == static_cast<std::size_t>(c.frame_samples()));
        const Eigen::MatrixXcd back = demodulate_frame(s, c);
        CHECK((back - f.grid.data).cwiseAbs().maxCoeff() < 1e-12);
        double body = 0.0;
        for (int k = 0; k < m; ++k)
            for (int i = c.cp_samples(); i < len; ++i)
                body += std::norm(s.samples[k * len + i]);
        CHECK_THAT(body / (n * m), WithinAbs(f.grid.data.cwiseAbs2().mean(), 1e-12));
    }
}

TEST_CASE("pilot layout", "[waveform]")
{
    const SystemConfig c = small_config();
    Rng d(1), p(2);
    const IsacFrame f = make_isac_frame(c, d, p, Modulation::QAM16);
    CHECK(f.pilots.cols() == c.n_packets);
    CHECK(f.data_bits.size() == static_cast<std::size_t>((c.n_symbols() - c.n_packets) * c.n_subcarriers * 4));
    for (int s = 0; s < c.n_symbols(); ++s) {
        CHECK(f.grid.pilot_mask(0, s) == (s % c.symbols_per_packet == 0));
        if (is_pilot_symbol(s, c))
            CHECK((f.grid.data.col(s) - f.pilots.col(s / c.symbols_per_packet)).norm() == 0.0);
    }
    for (Eigen::Index i = 0; i < f.pilots.size(); ++i)
        CHECK_THAT(std::abs(f.pilots(i)), WithinAbs(1.0, 1e-15));
}

TEST_CASE("equalization and detection", "[waveform]")
{
    Rng rng(9);
    for (Modulation mod : {Modulation::QPSK, Modulation::QAM16}) {
        const Bits bits = random_bits(rng, 64 * 8 * bits_per_symbol(mod));
        const CVec sym = modulate_bits(bits, mod);
        Eigen::MatrixXcd obs = Eigen::Map<const Eigen::MatrixXcd>(sym.data(), 64, 8);
        Eigen::MatrixXcd h = Eigen::MatrixXcd::Ones(64, 8);
        CHECK(bit_error_rate(bits, equalize_and_detect(obs, h, mod).bits) == 0.0);
        const cplx g = std::polar(2.0, kPi / 3);
        CHECK(bit_error_rate(bits, equalize_and_detect((obs * g).eval(), (h * g).eval(), mod).bits) == 0.0);
    }
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Ones(2, 1);
    h(1) = 0.0;
    const Detection d = equalize_and_detect(Eigen::MatrixXcd::Ones(2, 1), h, Modulation::QPSK);
    CHECK(d.erasures == 1);
}

TEST_CASE("bit error rate counting", "[waveform]")
{
    Bits a(1000, 0), b(1000, 0);
    CHECK(bit_error_rate(a, b) == 0.0);
    for (auto& v : b)
        v = 1;
    CHECK(bit_error_rate(a, b) == 1.0);
    b.assign(1000, 0);
    b[3] = b[500] = b[999] = 1;
    CHECK(bit_error_rate(a, b) == 0.003);
    CHECK_THROWS_AS(bit_error_rate(a, Bits(10)), std::invalid_argument);
}

TEST_CASE("QPSK BER over AWGN follows the Q-function", "[waveform][montecarlo]")
{
    // Eb/N0 = 6 dB keeps the expected error count near 2400 at 1e6 bits.
    const double ebn0 = db_to_linear(6.0);
    const double expected = q_function(std::sqrt(2.0 * ebn0));
    Rng rng(21);
    const std::size_t nbits = 1'000'000;
    const Bits bits = random_bits(rng, nbits);
    const CVec sym = modulate_bits(bits, Modulation::QPSK);
    Eigen::MatrixXcd obs = Eigen::Map<const Eigen::MatrixXcd>(sym.data(), 1000, static_cast<Eigen::Index>(sym.size() / 1000));
    std::normal_distribution<double> nd(0.0, std::sqrt(1.0 / (2.0 * ebn0) / 2.0));
    for (Eigen::Index i = 0; i < obs.size(); ++i)
        obs(i) += cplx(nd(rng), nd(rng));
    const double ber = bit_error_rate(bits, equalize_and_detect(obs, Eigen::MatrixXcd::Ones(obs.rows(), obs.cols()),
                                                                Modulation::QPSK).bits);
    CHECK(ber > expected / 3.0);
    CHECK(ber < expected * 3.0);
    CHECK(std::abs(ber / expected - 1.0) < 0.1);
}
