#pragma once

#include <string>
#include <vector>

#include "rtr/math.hpp"

namespace rtr {

/// Dense interleaved image, row-major, top row first. Channel count is
/// 1 or 3. Pixels are stored as double for gradient accuracy; file IO
/// converts to/from float32.
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels, Real fill = 0.0)
        : width_(width), height_(height), channels_(channels),
          data_(size_t(width) * height * channels, fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    size_t pixel_count() const { return size_t(width_) * height_; }
    size_t data_size() const { return data_.size(); }

    Real* data() { return data_.data(); }
    const Real* data() const { return data_.data(); }

    Real& at(int x, int y, int c) {
        return data_[(size_t(y) * width_ + x) * channels_ + c];
    }
    Real at(int x, int y, int c) const {
        return data_[(size_t(y) * width_ + x) * channels_ + c];
    }

    Vec3 rgb(int x, int y) const {
        const size_t i = (size_t(y) * width_ + x) * channels_;
        if (channels_ == 1) return Vec3(data_[i]);
        return {data_[i], data_[i + 1], data_[i + 2]};
    }
    void set_rgb(int x, int y, const Vec3& v) {
        const size_t i = (size_t(y) * width_ + x) * channels_;
        if (channels_ == 1) {
            data_[i] = v.x;
        } else {
            data_[i] = v.x;
            data_[i + 1] = v.y;
            data_[i + 2] = v.z;
        }
    }
    void add_rgb(int x, int y, const Vec3& v) {
        const size_t i = (size_t(y) * width_ + x) * channels_;
        if (channels_ == 1) {
            data_[i] += v.x;
        } else {
            data_[i] += v.x;
            data_[i + 1] += v.y;
            data_[i + 2] += v.z;
        }
    }

    bool empty() const { return data_.empty(); }

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<Real> data_;
};

/// PFM: float32 scanlines, bottom row first, scale sign encodes
/// endianness (negative = little-endian). Grayscale uses header "Pf",
/// color "PF".
void write_pfm(const std::string& path, const Image& img);
Image read_pfm(const std::string& path);

/// 8-bit PPM/PGM preview with gamma-2.2 encoding of [0,1]-clamped values.
void write_ppm(const std::string& path, const Image& img);

}  // namespace rtr
