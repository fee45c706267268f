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

// Encoder/decoder denoiser with residual-concat skips, channel attention and
// sinusoidal timestep conditioning. The plain variant disables the residual
// shortcuts and the attention gates.

#include "ops.hpp"

#include <random>

namespace isrse::nn {

struct UNetConfig {
    int in_channels = 3;
    int out_channels = 3;
    int base_channels = 32;
    int depth = 3;
    int attention_reduction = 8;
    int time_embed_dim = 64;
    bool use_attention = true;
    bool use_residual = true;
    bool use_time = true;
    int max_timestep = 1000;

    int channels(int level) const { return base_channels << level; }

    void validate() const
    {
        auto fail = [](const std::string& w) { throw std::invalid_argument("UNetConfig: " + w); };
        if (depth < 1 || depth > 6)
            fail("depth must be in [1, 6]");
        if (base_channels < 1 || channels(depth) > 1024)
            fail("base_channels * 2^depth must lie in [1, 1024]");
        if (in_channels < 1 || out_channels < 1)
            fail("channel counts must be >= 1");
        if (use_attention && (attention_reduction < 1 || base_channels % attention_reduction != 0))
            fail("base_channels must be divisible by attention_reduction");
        if (use_time && (time_embed_dim < 2 || time_embed_dim % 2 != 0))
            fail("time_embed_dim must be even and >= 2");
    }

    bool operator==(const UNetConfig&) const = default;
};

// Paper-scale and desk-scale presets.
inline UNetConfig unet_default() { return {}; }
inline UNetConfig unet_desk()
{
    UNetConfig c;
    c.base_channels = 8;
    c.depth = 2;
    c.attention_reduction = 4;
    c.time_embed_dim = 32;
    return c;
}
inline UNetConfig unet_plain(UNetConfig c)
{
    c.use_attention = false;
    c.use_residual = false;
    return c;
}

template <class T>
struct NamedParam {
    std::string name;
    Tensor<T> value;
};

template <class T>
struct Conv {
    Tensor<T> w, b;
    int stride = 1, pad = 0;
    Tensor<T> operator()(const Tensor<T>& x) const { return conv2d(x, w, b, stride, pad); }
};

template <class T>
struct Dense {
    Tensor<T> w, b;
    Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, w, b); }
};

// Squeeze (global average) -> dense C/r -> ReLU -> dense C -> sigmoid gates.
template <class T>
struct ChannelAttention {
    Dense<T> squeeze, excite;
    Tensor<T> operator()(const Tensor<T>& x) const
    {
        const Tensor<T> gates = sigmoid(excite(relu(squeeze(global_avg_pool(x)))));
        return scale_channels(x, gates);
    }
};

template <class T>
struct ConvBlock {
    Conv<T> conv1, conv2;
    Dense<T> time_proj; // undefined when the net is unconditioned
    bool residual = true;

    Tensor<T> operator()(const Tensor<T>& h, const Tensor<T>& temb) const
    {
        Tensor<T> a = conv1(h);
        if (time_proj.w.defined())
            a = add_channel(a, time_proj(temb));
        a = conv2(silu(a));
        return residual ? add(h, a) : silu(a);
    }
};

// Sinusoidal embedding of integer timesteps, [B, dim].
template <class T>
Tensor<T> timestep_embedding(const std::vector<int>& t, int dim)
{
    Tensor<T> e({static_cast<int>(t.size()), dim});
    const int half = dim / 2;
    for (std::size_t b = 0; b < t.size(); ++b)
        for (int i = 0; i < half; ++i) {
            const double f = std::exp(-std::log(10000.0) * i / half);
            e.data()[b * dim + i] = static_cast<T>(std::sin(t[b] * f));
            e.data()[b * dim + half + i] = static_cast<T>(std::cos(t[b] * f));
        }
    return e;
}

template <class T>
class UNet {
  public:
    explicit UNet(UNetConfig cfg, std::uint64_t seed = 0) : cfg_(cfg)
    {
        cfg_.validate();
        std::mt19937_64 rng(seed);
        build(rng);
    }

    const UNetConfig& config() const { return cfg_; }
    std::vector<NamedParam<T>>& parameters() { return params_; }
    const std::vector<NamedParam<T>>& parameters() const { return params_; }

    std::size_t parameter_count() const
    {
        std::size_t n = 0;
        for (const auto& p : params_)
            n += p.value.numel();
        return n;
    }

    Tensor<T> forward(const Tensor<T>& x, const std::vector<int>& t) const
    {
        detail::require_rank(x.shape(), 4, "unet_forward");
        const int div = 1 << cfg_.depth;
        if (x.dim(1) != cfg_.in_channels || x.dim(2) % div != 0 || x.dim(3) % div != 0)
            throw std::invalid_argument("unet_forward: input " + shape_str(x.shape()) +
                                        " needs " + std::to_string(cfg_.in_channels) +
                                        " channels and spatial dims divisible by " + std::to_string(div));
        Tensor<T> temb;
        if (cfg_.use_time) {
            if (t.size() != static_cast<std::size_t>(x.dim(0)))
                throw std::invalid_argument("unet_forward: need one timestep per batch item");
            for (int v : t)
                if (v < 0 || v > cfg_.max_timestep)
                    throw std::invalid_argument("unet_forward: invalid timestep " + std::to_string(v));
            temb = silu(time_mlp_(timestep_embedding<T>(t, cfg_.time_embed_dim)));
        }
        Tensor<T> h = conv_in_(x);
        std::vector<Tensor<T>> skips;
        for (int i = 0; i < cfg_.depth; ++i) {
            h = enc_[i](h, temb);
            skips.push_back(h);
            h = down_[i](h);
        }
        h = mid_(h, temb);
        if (cfg_.use_attention)
            h = mid_attn_(h);
        for (int i = cfg_.depth - 1; i >= 0; --i) {
            const Tensor<T> u = up_[i](upsample2x(h));
            Tensor<T> m = fuse_[i](concat_channels(u, skips[i]));
            if (cfg_.use_residual)
                m = add(m, skips[i]);
            h = dec_[i](m, temb);
            if (cfg_.use_attention)
                h = dec_attn_[i](h);
        }
        return conv_out_(silu(h));
    }

    Tensor<T> forward(const Tensor<T>& x, int t) const
    {
        return forward(x, std::vector<int>(static_cast<std::size_t>(x.dim(0)), t));
    }

    // Copies parameter values between precisions (names and shapes must match).
    template <class U>
    void load_from(const UNet<U>& other)
    {
        const auto& src = other.parameters();
        if (src.size() != params_.size())
            throw std::invalid_argument("UNet::load_from: parameter count mismatch");
        for (std::size_t i = 0; i < params_.size(); ++i) {
            if (src[i].name != params_[i].name || src[i].value.shape() != params_[i].value.shape())
                throw std::invalid_argument("UNet::load_from: parameter '" + params_[i].name + "' mismatch");
            auto& d = params_[i].value.data();
            for (std::size_t k = 0; k < d.size(); ++k)
                d[k] = static_cast<T>(src[i].value.data()[k]);
        }
    }

  private:
    Tensor<T> param(const std::string& name, Shape shape, int fan_in, std::mt19937_64& rng, bool zero = false)
    {
        Tensor<T> t(std::move(shape), T(0), true);
        if (!zero) {
            const double bound = std::sqrt(6.0 / fan_in);
            std::uniform_real_distribution<double> u(-bound, bound);
            for (auto& v : t.data())
                v = static_cast<T>(u(rng));
        }
        params_.push_back({name, t});
        return t;
    }

    Conv<T> conv(const std::string& name, int cin, int cout, int k, int stride, std::mt19937_64& rng,
                 bool zero = false)
    {
        Conv<T> c;
        c.w = param(name + ".w", {cout, cin, k, k}, cin * k * k, rng, zero);
        c.b = param(name + ".b", {cout}, 1, rng, true);
        c.stride = stride;
        c.pad = k / 2;
        return c;
    }

    Dense<T> dense(const std::string& name, int in, int out, std::mt19937_64& rng, bool zero_bias = true)
    {
        Dense<T> d;
        d.w = param(name + ".w", {out, in}, in, rng);
        d.b = param(name + ".b", {out}, 1, rng, zero_bias);
        return d;
    }

    ConvBlock<T> block(const std::string& name, int c, std::mt19937_64& rng)
    {
        ConvBlock<T> b;
        b.conv1 = conv(name + ".conv1", c, c, 3, 1, rng);
        b.conv2 = conv(name + ".conv2", c, c, 3, 1, rng, cfg_.use_residual);
        if (cfg_.use_time)
            b.time_proj = dense(name + ".time", cfg_.time_embed_dim, c, rng);
        b.residual = cfg_.use_residual;
        return b;
    }

    ChannelAttention<T> attention(const std::string& name, int c, std::mt19937_64& rng)
    {
        const int r = std::max(1, c / cfg_.attention_reduction);
        return {dense(name + ".squeeze", c, r, rng), dense(name + ".excite", r, c, rng)};
    }

    void build(std::mt19937_64& rng)
    {
        if (cfg_.use_time)
            time_mlp_ = dense("time_mlp", cfg_.time_embed_dim, cfg_.time_embed_dim, rng);
        conv_in_ = conv("conv_in", cfg_.in_channels, cfg_.channels(0), 3, 1, rng);
        for (int i = 0; i < cfg_.depth; ++i) {
            const std::string p = "enc" + std::to_string(i);
            enc_.push_back(block(p, cfg_.channels(i), rng));
            down_.push_back(conv(p + ".down", cfg_.channels(i), cfg_.channels(i + 1), 3, 2, rng));
        }
        mid_ = block("mid", cfg_.channels(cfg_.depth), rng);
        if (cfg_.use_attention)
            mid_attn_ = attention("mid.attn", cfg_.channels(cfg_.depth), rng);
        up_.resize(cfg_.depth);
        fuse_.resize(cfg_.depth);
        dec_.resize(cfg_.depth);
        dec_attn_.resize(cfg_.depth);
        for (int i = cfg_.depth - 1; i >= 0; --i) {
            const std::string p = "dec" + std::to_string(i);
            const int c = cfg_.channels(i);
            up_[i] = conv(p + ".up", cfg_.channels(i + 1), c, 3, 1, rng);
            fuse_[i] = conv(p + ".fuse", 2 * c, c, 1, 1, rng);
            dec_[i] = block(p, c, rng);
            if (cfg_.use_attention)
                dec_attn_[i] = attention(p + ".attn", c, rng);
        }
        conv_out_ = conv("conv_out", cfg_.channels(0), cfg_.out_channels, 3, 1, rng, true);
    }

    UNetConfig cfg_;
    std::vector<NamedParam<T>> params_;
    Dense<T> time_mlp_;
    Conv<T> conv_in_, conv_out_;
    std::vector<ConvBlock<T>> enc_, dec_;
    std::vector<Conv<T>> down_, up_, fuse_;
    ConvBlock<T> mid_;
    ChannelAttention<T> mid_attn_;
    std::vector<ChannelAttention<T>> dec_attn_;
};

} // namespace isrse::nn
