#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dtraj/flow.hpp"
#include "dtraj/image.hpp"

namespace dtraj {

struct TrajectoryPoint {
    int t;     // frame index, consecutive within a trajectory
    double x;  // position at frame t, pixels
    double y;
    double u;  // displacement applied from t to t+1, pixels/frame
    double v;
};

struct Trajectory {
    std::vector<TrajectoryPoint> points;
};

struct AdvectParams {
    int stride = 2;                  // particle grid spacing, pixels
    double min_extent = 5.0;         // start-to-end distance threshold
    double coherence_cos_min = 0.0;  // min cosine between step and previous step
    double magnitude_min = 0.05;     // min flow magnitude to keep advecting
    bool use_foreground_mask = true;
};

// Particles seeded on a regular lattice. map_x/map_y are the two flow maps:
// grid-shaped stores of each particle's evolving horizontal and vertical
// coordinate, indexed by source location.
struct ParticleGrid {
    int frame_width = 0;
    int frame_height = 0;
    int stride = 1;
    int grid_w = 0;  // lattice columns
    int grid_h = 0;  // lattice rows

    std::vector<double> src_x, src_y;    // source positions
    std::vector<double> map_x, map_y;    // current positions (the flow maps)
    std::vector<std::uint8_t> active;
    std::vector<double> prev_u, prev_v;  // last emitted displacement
    std::vector<std::uint8_t> has_prev;
    std::vector<Trajectory> trajectories;  // one slot per particle

    std::size_t particle_count() const { return src_x.size(); }
};

struct GateContext {
    bool in_bounds = false;
    bool mask_foreground = true;  // true when the mask is absent or disabled
    double u = 0.0, v = 0.0;      // flow sampled at the particle position
    bool has_prev = false;
    double prev_u = 0.0, prev_v = 0.0;
};

// The binary advection gate B: 1 iff in bounds, on foreground, flow magnitude
// above threshold, and direction coherent with the previous step. B = 0 is
// terminal for the particle.
bool gate(const GateContext& ctx, const AdvectParams& params);

// Lattice of particles at (i*stride, j*stride) strictly inside the frame.
ParticleGrid init_particles(int width, int height, int stride);

// One explicit Euler step through `flow` at frame index t. Emits a point per
// particle that passes the gate and advances both flow maps; gate failure
// deactivates the particle for good.
void advect_step(ParticleGrid& grid, const FlowField& flow,
                 const GrayImage* mask, const AdvectParams& params, int t);

// Full advection over a flow sequence; returns every trajectory that emitted
// at least one point, in source order.
std::vector<Trajectory> extract_trajectories(
    const std::vector<FlowField>& flows,
    const std::vector<GrayImage>* masks,
    const AdvectParams& params);

double trajectory_extent(const Trajectory& traj);

// Keeps trajectories whose start-to-end distance is >= min_extent
// (boundary inclusive); order preserved.
std::vector<Trajectory> filter_trajectories(const std::vector<Trajectory>& trajs,
                                            double min_extent);

// CSV with header traj_id,t,x,y,u,v; coordinates at 6 decimal places.
void write_trajectory_csv(const std::vector<Trajectory>& trajs,
                          const std::filesystem::path& file);
std::vector<Trajectory> read_trajectory_csv(const std::filesystem::path& file);

}  // namespace dtraj
