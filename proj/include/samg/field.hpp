#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <utility>

namespace samg {

template <typename Scalar>
using GridArray = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense C x H x W grid stored channel-major, then row, then column.
/// Internally a C x (H*W) row-major Eigen array, so data() is exactly the
/// serialized layout and col(p) is the channel vector of pixel p.
template <typename Scalar>
class LatentFieldT {
public:
    LatentFieldT() = default;

    LatentFieldT(Eigen::Index channels, Eigen::Index height, Eigen::Index width)
        : channels_(channels), height_(height), width_(width) {
        if (channels < 1 || height < 1 || width < 1)
            throw std::invalid_argument("LatentField: dimensions must be positive");
        data_.setZero(channels, height * width);
    }

    LatentFieldT(Eigen::Index channels, Eigen::Index height, Eigen::Index width,
                 GridArray<Scalar> values)
        : channels_(channels), height_(height), width_(width), data_(std::move(values)) {
        if (channels < 1 || height < 1 || width < 1)
            throw std::invalid_argument("LatentField: dimensions must be positive");
        if (data_.rows() != channels || data_.cols() != height * width)
            throw std::invalid_argument("LatentField: value array does not match C x (H*W)");
    }

    Eigen::Index channels() const { return channels_; }
    Eigen::Index height() const { return height_; }
    Eigen::Index width() const { return width_; }
    Eigen::Index pixels() const { return height_ * width_; }
    Eigen::Index size() const { return channels_ * height_ * width_; }

    GridArray<Scalar>& array() { return data_; }
    const GridArray<Scalar>& array() const { return data_; }

    Scalar& operator()(Eigen::Index c, Eigen::Index y, Eigen::Index x) {
        return data_(c, y * width_ + x);
    }
    Scalar operator()(Eigen::Index c, Eigen::Index y, Eigen::Index x) const {
        return data_(c, y * width_ + x);
    }

    /// Channel vector of one spatial position.
    auto pixel(Eigen::Index p) { return data_.col(p); }
    auto pixel(Eigen::Index p) const { return data_.col(p); }

    bool is_finite() const { return data_.isFinite().all(); }

    bool same_shape(const LatentFieldT& other) const {
        return channels_ == other.channels_ && height_ == other.height_ &&
               width_ == other.width_;
    }

private:
    Eigen::Index channels_ = 0;
    Eigen::Index height_ = 0;
    Eigen::Index width_ = 0;
    GridArray<Scalar> data_;  // C x (H*W)
};

/// H x W non-negative scalar map (guidance energy per spatial position).
template <typename Scalar>
class EnergyMapT {
public:
    EnergyMapT() = default;

    EnergyMapT(Eigen::Index height, Eigen::Index width)
        : height_(height), width_(width) {
        if (height < 1 || width < 1)
            throw std::invalid_argument("EnergyMap: dimensions must be positive");
        data_.setZero(height, width);
    }

    EnergyMapT(Eigen::Index height, Eigen::Index width, GridArray<Scalar> values)
        : height_(height), width_(width), data_(std::move(values)) {
        if (height < 1 || width < 1)
            throw std::invalid_argument("EnergyMap: dimensions must be positive");
        if (data_.rows() != height || data_.cols() != width)
            throw std::invalid_argument("EnergyMap: value array does not match H x W");
    }

    Eigen::Index height() const { return height_; }
    Eigen::Index width() const { return width_; }
    Eigen::Index pixels() const { return height_ * width_; }

    GridArray<Scalar>& array() { return data_; }
    const GridArray<Scalar>& array() const { return data_; }

    Scalar& operator()(Eigen::Index y, Eigen::Index x) { return data_(y, x); }
    Scalar operator()(Eigen::Index y, Eigen::Index x) const { return data_(y, x); }

    /// Flat view in row-major spatial order (same pixel indexing as LatentField).
    auto flat() const {
        return Eigen::Map<const Eigen::Array<Scalar, 1, Eigen::Dynamic>>(data_.data(),
                                                                         pixels());
    }

    bool is_finite() const { return data_.isFinite().all(); }

private:
    Eigen::Index height_ = 0;
    Eigen::Index width_ = 0;
    GridArray<Scalar> data_;  // H x W
};

/// H x W per-pixel guidance-scale map with its generating bounds attached.
/// Every element lies in [lo, hi].
template <typename Scalar>
class OmegaMapT {
public:
    OmegaMapT() = default;

    OmegaMapT(Eigen::Index height, Eigen::Index width, Scalar lo, Scalar hi,
              GridArray<Scalar> values)
        : height_(height), width_(width), lo_(lo), hi_(hi), data_(std::move(values)) {
        if (height < 1 || width < 1)
            throw std::invalid_argument("OmegaMap: dimensions must be positive");
        if (!(lo > Scalar(0)) || !(lo <= hi))
            throw std::invalid_argument("OmegaMap: bounds must satisfy 0 < lo <= hi");
        if (data_.rows() != height || data_.cols() != width)
            throw std::invalid_argument("OmegaMap: value array does not match H x W");
        if ((data_ < lo_).any() || (data_ > hi_).any())
            throw std::invalid_argument("OmegaMap: values escape [lo, hi]");
    }

    Eigen::Index height() const { return height_; }
    Eigen::Index width() const { return width_; }
    Eigen::Index pixels() const { return height_ * width_; }
    Scalar lo() const { return lo_; }
    Scalar hi() const { return hi_; }

    const GridArray<Scalar>& array() const { return data_; }

    Scalar operator()(Eigen::Index y, Eigen::Index x) const { return data_(y, x); }

    auto flat() const {
        return Eigen::Map<const Eigen::Array<Scalar, 1, Eigen::Dynamic>>(data_.data(),
                                                                         pixels());
    }

private:
    Eigen::Index height_ = 0;
    Eigen::Index width_ = 0;
    Scalar lo_ = Scalar(1);
    Scalar hi_ = Scalar(1);
    GridArray<Scalar> data_;  // H x W
};

using LatentField = LatentFieldT<double>;
using EnergyMap = EnergyMapT<double>;
using OmegaMap = OmegaMapT<double>;

/// Channel-wise mean of squares: out(x) = (1/C) * sum_c f(c,x)^2.
template <typename Scalar>
EnergyMapT<Scalar> channel_mean_square(const LatentFieldT<Scalar>& f) {
    GridArray<Scalar> out(f.height(), f.width());
    Eigen::Map<Eigen::Array<Scalar, 1, Eigen::Dynamic>> flat(out.data(), f.pixels());
    flat = f.array().square().colwise().mean();
    return EnergyMapT<Scalar>(f.height(), f.width(), std::move(out));
}

/// (e - min) / (max - min + tau), min/max over all spatial positions of this
/// single map. Constant maps normalize to zero through the tau guard.
template <typename Scalar>
EnergyMapT<Scalar> minmax_normalize(const EnergyMapT<Scalar>& e, Scalar tau) {
    if (!(tau > Scalar(0)))
        throw std::invalid_argument("minmax_normalize: tau must be positive");
    const Scalar lo = e.array().minCoeff();
    const Scalar hi = e.array().maxCoeff();
    GridArray<Scalar> out = (e.array() - lo) / (hi - lo + tau);
    return EnergyMapT<Scalar>(e.height(), e.width(), std::move(out));
}

/// out(c, x) = f(c, x) * m(x) for every channel c.
template <typename Scalar, typename MapLike>
LatentFieldT<Scalar> broadcast_scale(const LatentFieldT<Scalar>& f, const MapLike& m) {
    if (m.height() != f.height() || m.width() != f.width())
        throw std::invalid_argument("broadcast_scale: spatial dimensions mismatch");
    GridArray<Scalar> out = f.array().rowwise() * m.flat();
    return LatentFieldT<Scalar>(f.channels(), f.height(), f.width(), std::move(out));
}

namespace detail {

/// Mirror index into [0, n) without repeating the edge sample: -1 -> 1, n -> n-2.
inline Eigen::Index reflect_index(Eigen::Index i, Eigen::Index n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

}  // namespace detail

/// Uniform k x k mean filter with reflect padding; k = 1 is the exact identity.
template <typename Scalar>
EnergyMapT<Scalar> box_smooth(const EnergyMapT<Scalar>& e, int k) {
    if (k < 1 || k % 2 == 0)
        throw std::invalid_argument("box_smooth: kernel must be odd and positive");
    if (k == 1) return e;

    const Eigen::Index h = e.height(), w = e.width();
    const int r = k / 2;
    GridArray<Scalar> out(h, w);
    for (Eigen::Index y = 0; y < h; ++y) {
        for (Eigen::Index x = 0; x < w; ++x) {
            Scalar acc = Scalar(0);
            for (int dy = -r; dy <= r; ++dy) {
                const Eigen::Index yy = detail::reflect_index(y + dy, h);
                for (int dx = -r; dx <= r; ++dx) {
                    const Eigen::Index xx = detail::reflect_index(x + dx, w);
                    acc += e(yy, xx);
                }
            }
            out(y, x) = acc / Scalar(k * k);
        }
    }
    return EnergyMapT<Scalar>(h, w, std::move(out));
}

}  // namespace samg
