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

// A trained denoiser bundle (network, codec calibration, schedule) and its
// checkpoint file.
//
// Checkpoint layout (little-endian):
//   8 bytes  magic "ISRSECKP"
//   u32      version (1)
//   u32      kind: 0 = diffusion noise predictor, 1 = single-pass residual denoiser
//   i32 x 7  in_channels, out_channels, base_channels, depth, attention_reduction,
//            time_embed_dim, max_timestep
//   u8 x 3   use_attention, use_residual, use_time
//   i32, f64, f64        schedule T, beta_start, beta_end
//   f64 x 4              codec m_max, epsilon, f_min, f_max
//   i32 x 3              stft window, hop, fft_size
//   f64 x 2              reference_rms, sample_rate_hz
//   u32                  parameter count, then per parameter:
//                        name (u32 length + bytes), u32 rank, i32 dims[rank], f32 data

#include "diffusion.hpp"
#include "io.hpp"

namespace isrse {

enum class ModelKind : std::uint32_t { diffusion = 0, direct = 1 };

struct DenoiserModel {
    ModelKind kind = ModelKind::diffusion;
    nn::UNet<float> net;
    Schedule schedule;
    RgbCodecMeta codec;
    StftConfig stft;
    // Clean streams are scaled to this RMS before encoding.
    double reference_rms = 600.0;
    double sample_rate_hz = 100e6;

    DenoiserModel(ModelKind k, const nn::UNetConfig& cfg, std::uint64_t seed, Schedule s)
        : kind(k), net(cfg, seed), schedule(std::move(s))
    {
    }
};

inline constexpr char kCheckpointMagic[8] = {'I', 'S', 'R', 'S', 'E', 'C', 'K', 'P'};

inline void save_checkpoint(const std::filesystem::path& path, const DenoiserModel& m)
{
    std::ofstream o(path, std::ios::binary);
    if (!o)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    const auto& c = m.net.config();
    o.write(kCheckpointMagic, 8);
    bin::put<std::uint32_t>(o, 1);
    bin::put<std::uint32_t>(o, static_cast<std::uint32_t>(m.kind));
    for (int v : {c.in_channels, c.out_channels, c.base_channels, c.depth, c.attention_reduction, c.time_embed_dim,
                  c.max_timestep})
        bin::put<std::int32_t>(o, v);
    for (bool b : {c.use_attention, c.use_residual, c.use_time})
        bin::put<std::uint8_t>(o, b ? 1 : 0);
    bin::put<std::int32_t>(o, m.schedule.T);
    bin::put<double>(o, m.schedule.beta_start);
    bin::put<double>(o, m.schedule.beta_end);
    for (double v : {m.codec.m_max, m.codec.epsilon, m.codec.f_min, m.codec.f_max})
        bin::put<double>(o, v);
    for (int v : {m.stft.window_length, m.stft.hop, m.stft.fft_size})
        bin::put<std::int32_t>(o, v);
    bin::put<double>(o, m.reference_rms);
    bin::put<double>(o, m.sample_rate_hz);
    const auto& ps = m.net.parameters();
    bin::put<std::uint32_t>(o, static_cast<std::uint32_t>(ps.size()));
    for (const auto& p : ps) {
        bin::put_string(o, p.name);
        bin::put<std::uint32_t>(o, static_cast<std::uint32_t>(p.value.rank()));
        for (int d : p.value.shape())
            bin::put<std::int32_t>(o, d);
        o.write(reinterpret_cast<const char*>(p.value.data().data()),
                static_cast<std::streamsize>(p.value.numel() * sizeof(float)));
    }
    if (!o)
        throw std::runtime_error("write failure on '" + path.string() + "'");
}

inline DenoiserModel load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream i(path, std::ios::binary);
    if (!i)
        throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
    char magic[8];
    i.read(magic, 8);
    if (!i || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw std::runtime_error("'" + path.string() + "' is not a checkpoint");
    const auto version = bin::get<std::uint32_t>(i);
    if (version != 1)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    const auto kind = bin::get<std::uint32_t>(i);
    if (kind > 1)
        throw std::runtime_error("unknown model kind " + std::to_string(kind));
    nn::UNetConfig c;
    for (int* v : {&c.in_channels, &c.out_channels, &c.base_channels, &c.depth, &c.attention_reduction,
                   &c.time_embed_dim, &c.max_timestep})
        *v = bin::get<std::int32_t>(i);
    for (bool* b : {&c.use_attention, &c.use_residual, &c.use_time})
        *b = bin::get<std::uint8_t>(i) != 0;
    const int t = bin::get<std::int32_t>(i);
    const double b0 = bin::get<double>(i);
    const double b1 = bin::get<double>(i);
    DenoiserModel m(static_cast<ModelKind>(kind), c, 0, make_schedule(t, b0, b1));
    for (double* v : {&m.codec.m_max, &m.codec.epsilon, &m.codec.f_min, &m.codec.f_max})
        *v = bin::get<double>(i);
    for (int* v : {&m.stft.window_length, &m.stft.hop, &m.stft.fft_size})
        *v = bin::get<std::int32_t>(i);
    m.reference_rms = bin::get<double>(i);
    m.sample_rate_hz = bin::get<double>(i);
    auto& ps = m.net.parameters();
    const auto n = bin::get<std::uint32_t>(i);
    if (n != ps.size())
        throw std::runtime_error("checkpoint holds " + std::to_string(n) + " parameters, network expects " +
                                 std::to_string(ps.size()));
    for (auto& p : ps) {
        const std::string name = bin::get_string(i);
        if (name != p.name)
            throw std::runtime_error("checkpoint parameter '" + name + "' where '" + p.name + "' was expected");
        const auto rank = bin::get<std::uint32_t>(i);
        nn::Shape shape;
        for (std::uint32_t k = 0; k < rank; ++k)
            shape.push_back(bin::get<std::int32_t>(i));
        if (shape != p.value.shape())
            throw std::runtime_error("checkpoint parameter '" + name + "' has shape " + nn::shape_str(shape));
        i.read(reinterpret_cast<char*>(p.value.data().data()), static_cast<std::streamsize>(p.value.numel() * sizeof(float)));
        if (!i)
            throw std::runtime_error("checkpoint truncated in parameter '" + name + "'");
    }
    m.codec.validate();
    return m;
}

// uint8 tiles -> [B,3,H,W] in [0,1] and back.
inline nn::Tensor<float> tiles_to_tensor(const std::vector<const RgbTile*>& tiles)
{
    if (tiles.empty())
        throw std::invalid_argument("tiles_to_tensor: no tiles");
    const int n = tiles[0]->size;
    nn::Tensor<float> x({static_cast<int>(tiles.size()), 3, n, n});
    const std::size_t per = static_cast<std::size_t>(3) * n * n;
    for (std::size_t b = 0; b < tiles.size(); ++b) {
        if (tiles[b]->size != n)
            throw std::invalid_argument("tiles_to_tensor: tiles differ in size");
        for (std::size_t k = 0; k < per; ++k)
            x.data()[b * per + k] = tiles[b]->pixels[k] / 255.0f;
    }
    return x;
}

inline RgbTile tensor_to_tile(const nn::Tensor<float>& x, int b)
{
    const int n = x.dim(2);
    RgbTile t(n);
    const std::size_t per = static_cast<std::size_t>(3) * n * n;
    for (std::size_t k = 0; k < per; ++k)
        t.pixels[k] = quantize_level(static_cast<double>(x.data()[static_cast<std::size_t>(b) * per + k]) * 255.0);
    return t;
}

} // namespace isrse
