#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace dtraj {

// Row-major grayscale raster. Loaded frames hold intensities in [0,1];
// the same container carries flow magnitudes and texture canvases, which
// are nonnegative but not bounded by 1.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0)
        : width(w), height(h),
          data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

    double& at(int x, int y) {
        return data[static_cast<std::size_t>(y) * width + x];
    }
    double at(int x, int y) const {
        return data[static_cast<std::size_t>(y) * width + x];
    }
    bool same_size(const GrayImage& o) const {
        return width == o.width && height == o.height;
    }
    std::size_t size() const { return data.size(); }
};

bool image_is_finite(const GrayImage& img);

// Bilinear sample at real coordinates; out-of-range positions clamp to the
// nearest edge pixel.
double sample_bilinear(const GrayImage& img, double x, double y);

// Separable Gaussian blur with replicated edges.
GrayImage gaussian_smooth(const GrayImage& img, double sigma);

// Corner-aligned bilinear resampling: output corners map onto input corners,
// so resizing to the same dimensions is the identity.
GrayImage resize_bilinear(const GrayImage& img, int out_w, int out_h);

// Frame I/O. PGM is binary P5 with maxval 255; PNG is read as 8-bit
// grayscale (color inputs are converted). Values map to [0,1].
GrayImage load_gray(const std::filesystem::path& file);
void save_pgm(const GrayImage& img, const std::filesystem::path& file);
void save_png(const GrayImage& img, const std::filesystem::path& file);

}  // namespace dtraj
