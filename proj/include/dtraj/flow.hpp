#pragma once

#include <filesystem>
#include <vector>

#include "dtraj/image.hpp"

namespace dtraj {

// Dense per-pixel motion field between two consecutive frames.
// Immutable once computed; safe to share across threads.
struct FlowField {
    int width = 0;
    int height = 0;
    std::vector<double> u;  // horizontal displacement, pixels/frame
    std::vector<double> v;  // vertical displacement, pixels/frame

    FlowField() = default;
    FlowField(int w, int h)
        : width(w), height(h),
          u(static_cast<std::size_t>(w) * h, 0.0),
          v(static_cast<std::size_t>(w) * h, 0.0) {}

    double& u_at(int x, int y) { return u[static_cast<std::size_t>(y) * width + x]; }
    double u_at(int x, int y) const { return u[static_cast<std::size_t>(y) * width + x]; }
    double& v_at(int x, int y) { return v[static_cast<std::size_t>(y) * width + x]; }
    double v_at(int x, int y) const { return v[static_cast<std::size_t>(y) * width + x]; }
};

struct FlowParams {
    double alpha = 30.0;        // smoothness weight, > 0
    double gamma = 80.0;        // gradient constancy weight, >= 0
    double pyramid_factor = 0.5;  // in (0,1)
    int min_level_size = 16;    // >= 8
    int outer_iterations = 10;  // warping / lagged-nonlinearity updates
    int inner_iterations = 5;   // SOR sweeps per outer iteration
    double sor_omega = 1.8;     // relaxation, in (0,2)
    double robust_eps = 1e-3;   // epsilon of the robust penalty sqrt(s^2+eps^2)
};

// Coarse-to-fine image pyramid, level 0 = input. Each next level is the
// Gaussian-smoothed, bilinearly downsampled previous one; construction stops
// before either dimension would fall below min_size.
std::vector<GrayImage> build_pyramid(const GrayImage& img, double factor, int min_size);

// output(x,y) = img sampled at (x+u, y+v), edge-clamped.
GrayImage warp_image(const GrayImage& img, const FlowField& flow);

// Variational optical flow: gray-value constancy + gamma * gradient
// constancy under the robust penalty, plus alpha * smoothness, minimized by
// coarse-to-fine warping with SOR inner solves. Deterministic.
FlowField compute_flow(const GrayImage& prev, const GrayImage& next,
                       const FlowParams& params = {});

// Per-pixel sqrt(u^2 + v^2).
GrayImage flow_magnitude(const FlowField& flow);

// Bilinear flow sample at a real position, edge-clamped.
void sample_flow(const FlowField& flow, double x, double y,
                 double& out_u, double& out_v);

// Zeroes the flow outside the foreground (mask >= 0.5).
void mask_flow(FlowField& flow, const GrayImage& mask);

// Middlebury .flo: float tag 202021.25, int32 width/height, then row-major
// interleaved (u,v) float32, all little-endian.
void write_flo(const FlowField& flow, const std::filesystem::path& file);
FlowField read_flo(const std::filesystem::path& file);

}  // namespace dtraj
