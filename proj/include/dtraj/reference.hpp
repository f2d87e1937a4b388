#pragma once

#include <vector>

#include "dtraj/advect.hpp"
#include "dtraj/canvas.hpp"
#include "dtraj/cnn.hpp"
#include "dtraj/flow.hpp"
#include "dtraj/image.hpp"

// Serial reference implementations. Plain single-threaded loops written
// independently of the library kernels; tests compare the two and the
// benchmark target measures them against the OpenMP paths. Nothing here is
// used by the production pipeline.
namespace dtraj::ref {

// Exhaustive integer block matching: for each pixel whose patch fits, the
// displacement in [-max_disp, max_disp]^2 minimizing patch SSD. Pixels whose
// patch or search window leaves the frame keep (0,0) and are reported
// invalid.
struct BlockMatchResult {
    FlowField flow;
    std::vector<std::uint8_t> valid;
};
BlockMatchResult block_match_flow(const GrayImage& prev, const GrayImage& next,
                                  int patch_radius, int max_disp);

// Straight-line reimplementation of the advection recurrence
// X_{t+1} = X_t + F(X_t) * B, one particle at a time.
std::vector<Trajectory> advect_scalar(const std::vector<FlowField>& flows,
                                      const std::vector<GrayImage>* masks,
                                      const AdvectParams& params);

// Brute-force canvas: gathers every magnitude written to each pixel, then
// reduces with max.
TextureImage render_canvas_gather(const std::vector<Trajectory>& trajs,
                                  int width, int height);

// Naive-loop layer forwards.
Tensor conv2d_naive(const Tensor& input, const ConvLayer& layer);
Tensor max_pool_naive(const Tensor& x, int window, int stride);
Tensor lrn_naive(const Tensor& x, const LrnSpec& spec);
std::vector<double> fc_naive(const std::vector<double>& x, const FcLayer& layer);

// Serial twin of the red-black SOR sweep, for the kernel benchmark.
GrayImage warp_serial(const GrayImage& img, const FlowField& flow);

}  // namespace dtraj::ref
