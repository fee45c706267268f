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

// File formats: the binary tensor container, PNG tiles and small binary
// stream helpers shared by the checkpoint writer.
//
// Tensor container (little-endian):
//   8 bytes  magic "ISRSETNS"
//   u32      version (1)
//   u32      dtype: 0 = f32, 1 = f64, 2 = complex f32 (re, im), 3 = complex f64
//   u32      rank
//   u64      dims[rank]
//   u32      attribute count, then per attribute: u32 key length, key bytes, f64 value
//   data     product(dims) elements, row-major

#include "tfr.hpp"

#include <png.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>

namespace isrse {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

namespace bin {

template <class T>
void put(std::ostream& o, const T& v)
{
    static_assert(std::is_trivially_copyable_v<T>);
    o.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& i)
{
    T v{};
    i.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!i)
        throw std::runtime_error("unexpected end of file");
    return v;
}

inline void put_string(std::ostream& o, const std::string& s)
{
    put<std::uint32_t>(o, static_cast<std::uint32_t>(s.size()));
    o.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& i, std::uint32_t max_len = 1u << 20)
{
    const auto n = get<std::uint32_t>(i);
    if (n > max_len)
        throw std::runtime_error("string length " + std::to_string(n) + " exceeds limit");
    std::string s(n, '\0');
    i.read(s.data(), n);
    if (!i)
        throw std::runtime_error("unexpected end of file");
    return s;
}

} // namespace bin

enum class DType : std::uint32_t { f32 = 0, f64 = 1, c64 = 2, c128 = 3 };

inline std::size_t dtype_size(DType d)
{
    switch (d) {
    case DType::f32:
        return 4;
    case DType::f64:
        return 8;
    case DType::c64:
        return 8;
    case DType::c128:
        return 16;
    }
    throw std::invalid_argument("unknown dtype");
}

// Data is held as raw little-endian bytes; typed accessors convert.
struct TensorFile {
    DType dtype = DType::f64;
    std::vector<std::uint64_t> dims;
    std::map<std::string, double> attrs;
    std::vector<char> bytes;

    std::size_t numel() const
    {
        std::size_t n = 1;
        for (auto d : dims)
            n *= d;
        return n;
    }
};

inline constexpr char kTensorMagic[8] = {'I', 'S', 'R', 'S', 'E', 'T', 'N', 'S'};

inline void write_tensor_file(const std::filesystem::path& path, const TensorFile& t)
{
    if (t.bytes.size() != t.numel() * dtype_size(t.dtype))
        throw std::invalid_argument("write_tensor_file: payload size does not match dims");
    std::ofstream o(path, std::ios::binary);
    if (!o)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    o.write(kTensorMagic, 8);
    bin::put<std::uint32_t>(o, 1);
    bin::put<std::uint32_t>(o, static_cast<std::uint32_t>(t.dtype));
    bin::put<std::uint32_t>(o, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims)
        bin::put<std::uint64_t>(o, d);
    bin::put<std::uint32_t>(o, static_cast<std::uint32_t>(t.attrs.size()));
    for (const auto& [k, v] : t.attrs) {
        bin::put_string(o, k);
        bin::put<double>(o, v);
    }
    o.write(t.bytes.data(), static_cast<std::streamsize>(t.bytes.size()));
    if (!o)
        throw std::runtime_error("write failure on '" + path.string() + "'");
}

inline TensorFile read_tensor_file(const std::filesystem::path& path)
{
    std::ifstream i(path, std::ios::binary);
    if (!i)
        throw std::runtime_error("cannot open '" + path.string() + "'");
    char magic[8];
    i.read(magic, 8);
    if (!i || std::memcmp(magic, kTensorMagic, 8) != 0)
        throw std::runtime_error("'" + path.string() + "' is not a tensor file");
    const auto version = bin::get<std::uint32_t>(i);
    if (version != 1)
        throw std::runtime_error("unsupported tensor file version " + std::to_string(version));
    TensorFile t;
    const auto dt = bin::get<std::uint32_t>(i);
    if (dt > 3)
        throw std::runtime_error("unknown dtype code " + std::to_string(dt));
    t.dtype = static_cast<DType>(dt);
    const auto rank = bin::get<std::uint32_t>(i);
    if (rank > 16)
        throw std::runtime_error("tensor rank " + std::to_string(rank) + " too large");
    for (std::uint32_t k = 0; k < rank; ++k)
        t.dims.push_back(bin::get<std::uint64_t>(i));
    const auto na = bin::get<std::uint32_t>(i);
    for (std::uint32_t k = 0; k < na; ++k) {
        std::string key = bin::get_string(i);
        t.attrs[key] = bin::get<double>(i);
    }
    t.bytes.resize(t.numel() * dtype_size(t.dtype));
    i.read(t.bytes.data(), static_cast<std::streamsize>(t.bytes.size()));
    if (!i)
        throw std::runtime_error("'" + path.string() + "': truncated payload");
    return t;
}

template <class T>
TensorFile make_tensor_file(DType d, std::vector<std::uint64_t> dims, const T* data, std::size_t n)
{
    TensorFile t;
    t.dtype = d;
    t.dims = std::move(dims);
    if (t.numel() * dtype_size(d) != n * sizeof(T))
        throw std::invalid_argument("make_tensor_file: element type does not match dtype");
    t.bytes.resize(n * sizeof(T));
    std::memcpy(t.bytes.data(), data, t.bytes.size());
    return t;
}

// Streams [rows][samples] as complex f64 with the sample rate as attribute.
inline TensorFile signals_to_tensor(const std::vector<ComplexSignal>& sigs)
{
    if (sigs.empty())
        throw std::invalid_argument("signals_to_tensor: no signals");
    const std::size_t len = sigs[0].size();
    CVec flat;
    flat.reserve(len * sigs.size());
    for (const auto& s : sigs) {
        if (s.size() != len)
            throw std::invalid_argument("signals_to_tensor: streams differ in length");
        flat.insert(flat.end(), s.samples.begin(), s.samples.end());
    }
    TensorFile t = make_tensor_file(DType::c128, {sigs.size(), len}, flat.data(), flat.size());
    t.attrs["sample_rate_hz"] = sigs[0].sample_rate_hz;
    return t;
}

inline std::vector<ComplexSignal> tensor_to_signals(const TensorFile& t)
{
    if (t.dims.empty() || t.dims.size() > 2)
        throw std::invalid_argument("tensor_to_signals: expected rank 1 or 2");
    const std::size_t rows = t.dims.size() == 2 ? t.dims[0] : 1;
    const std::size_t len = t.dims.back();
    const double fs = t.attrs.count("sample_rate_hz") ? t.attrs.at("sample_rate_hz") : 1.0;
    std::vector<ComplexSignal> out(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        out[r].sample_rate_hz = fs;
        out[r].samples.resize(len);
        for (std::size_t k = 0; k < len; ++k) {
            const std::size_t idx = r * len + k;
            if (t.dtype == DType::c128) {
                std::memcpy(&out[r].samples[k], t.bytes.data() + idx * 16, 16);
            } else if (t.dtype == DType::c64) {
                float v[2];
                std::memcpy(v, t.bytes.data() + idx * 8, 8);
                out[r].samples[k] = {v[0], v[1]};
            } else {
                throw std::invalid_argument("tensor_to_signals: tensor is not complex");
            }
        }
    }
    return out;
}

inline void write_png(const std::filesystem::path& path, const RgbTile& tile)
{
    FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp)
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("libpng failure writing '" + path.string() + "'");
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, tile.size, tile.size, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<std::size_t>(tile.size) * 3);
    for (int r = 0; r < tile.size; ++r) {
        for (int c = 0; c < tile.size; ++c)
            for (int ch = 0; ch < 3; ++ch)
                row[static_cast<std::size_t>(c) * 3 + ch] = tile.at(ch, r, c);
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

inline RgbTile read_png(const std::filesystem::path& path)
{
    FILE* fp = std::fopen(path.string().c_str(), "rb");
    if (!fp)
        throw std::runtime_error("cannot open '" + path.string() + "'");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error("libpng failure reading '" + path.string() + "'");
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    const auto w = png_get_image_width(png, info), h = png_get_image_height(png, info);
    if (w != h || png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB || png_get_bit_depth(png, info) != 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error("'" + path.string() + "' is not a square 8-bit RGB tile");
    }
    RgbTile tile(static_cast<int>(w));
    std::vector<png_byte> row(static_cast<std::size_t>(w) * 3);
    for (int r = 0; r < tile.size; ++r) {
        png_read_row(png, row.data(), nullptr);
        for (int c = 0; c < tile.size; ++c)
            for (int ch = 0; ch < 3; ++ch)
                tile.at(ch, r, c) = row[static_cast<std::size_t>(c) * 3 + ch];
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return tile;
}

inline std::vector<char> read_file_bytes(const std::filesystem::path& p)
{
    std::ifstream i(p, std::ios::binary);
    if (!i)
        throw std::runtime_error("cannot open '" + p.string() + "'");
    return {std::istreambuf_iterator<char>(i), std::istreambuf_iterator<char>()};
}

} // namespace isrse
