#pragma once

#include "samg/field.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace samg {

namespace detail {

inline void put_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32_le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) |
           (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64_le(std::ostream& os, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline double get_f64_le(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

}  // namespace detail

/// 8-bit binary PGM (P5) after per-map min/max rescaling to [0, 255].
/// A constant map rescales to all zeros.
template <typename Scalar>
void write_pgm(const std::string& path, const EnergyMapT<Scalar>& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_pgm: cannot open " + path);
    os << "P5\n" << m.width() << " " << m.height() << "\n255\n";
    const Scalar lo = m.array().minCoeff();
    const Scalar hi = m.array().maxCoeff();
    const Scalar range = hi - lo;
    std::vector<unsigned char> row(static_cast<std::size_t>(m.width()));
    for (Eigen::Index y = 0; y < m.height(); ++y) {
        for (Eigen::Index x = 0; x < m.width(); ++x) {
            double v = 0.0;
            if (range > Scalar(0))
                v = static_cast<double>((m(y, x) - lo) / range) * 255.0;
            row[static_cast<std::size_t>(x)] =
                static_cast<unsigned char>(std::lround(v));
        }
        os.write(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::streamsize>(row.size()));
    }
    if (!os) throw std::runtime_error("write_pgm: write failed for " + path);
}

template <typename Scalar>
void write_pgm(const std::string& path, const OmegaMapT<Scalar>& m) {
    EnergyMapT<Scalar> as_map(m.height(), m.width(), GridArray<Scalar>(m.array()));
    write_pgm(path, as_map);
}

// LatentField binary format: 16-byte header (magic "LFLD", u32 C, H, W,
// little-endian) followed by C*H*W float64 little-endian values in
// channel-major row-major order.

template <typename Scalar>
void write_latent_field(std::ostream& os, const LatentFieldT<Scalar>& f) {
    os.write("LFLD", 4);
    detail::put_u32_le(os, static_cast<std::uint32_t>(f.channels()));
    detail::put_u32_le(os, static_cast<std::uint32_t>(f.height()));
    detail::put_u32_le(os, static_cast<std::uint32_t>(f.width()));
    const Scalar* p = f.array().data();
    for (Eigen::Index i = 0; i < f.size(); ++i)
        detail::put_f64_le(os, static_cast<double>(p[i]));
}

template <typename Scalar>
void write_latent_field(const std::string& path, const LatentFieldT<Scalar>& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_latent_field: cannot open " + path);
    write_latent_field(os, f);
    if (!os) throw std::runtime_error("write_latent_field: write failed for " + path);
}

template <typename Scalar = double>
LatentFieldT<Scalar> read_latent_field(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "LFLD", 4) != 0)
        throw std::runtime_error("read_latent_field: bad magic");
    const auto c = static_cast<Eigen::Index>(detail::get_u32_le(is));
    const auto h = static_cast<Eigen::Index>(detail::get_u32_le(is));
    const auto w = static_cast<Eigen::Index>(detail::get_u32_le(is));
    if (!is || c < 1 || h < 1 || w < 1)
        throw std::runtime_error("read_latent_field: bad header");
    GridArray<Scalar> data(c, h * w);
    for (Eigen::Index i = 0; i < c * h * w; ++i)
        data.data()[i] = static_cast<Scalar>(detail::get_f64_le(is));
    if (!is) throw std::runtime_error("read_latent_field: truncated payload");
    return LatentFieldT<Scalar>(c, h, w, std::move(data));
}

template <typename Scalar = double>
LatentFieldT<Scalar> read_latent_field(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_latent_field: cannot open " + path);
    return read_latent_field<Scalar>(is);
}

// Trajectory sequence: magic "LFSQ", u32 C, H, W, count, then per state a
// u32 step index followed by the C*H*W float64 payload (no per-state header).

template <typename Scalar>
void write_field_sequence(const std::string& path,
                          const std::vector<std::uint32_t>& step_indices,
                          const std::vector<LatentFieldT<Scalar>>& states) {
    if (states.empty() || states.size() != step_indices.size())
        throw std::invalid_argument("write_field_sequence: empty or mismatched input");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_field_sequence: cannot open " + path);
    const auto& first = states.front();
    os.write("LFSQ", 4);
    detail::put_u32_le(os, static_cast<std::uint32_t>(first.channels()));
    detail::put_u32_le(os, static_cast<std::uint32_t>(first.height()));
    detail::put_u32_le(os, static_cast<std::uint32_t>(first.width()));
    detail::put_u32_le(os, static_cast<std::uint32_t>(states.size()));
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (!states[i].same_shape(first))
            throw std::invalid_argument("write_field_sequence: shape mismatch");
        detail::put_u32_le(os, step_indices[i]);
        const Scalar* p = states[i].array().data();
        for (Eigen::Index j = 0; j < states[i].size(); ++j)
            detail::put_f64_le(os, static_cast<double>(p[j]));
    }
    if (!os) throw std::runtime_error("write_field_sequence: write failed for " + path);
}

}  // namespace samg
