#include "dtraj/advect.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace dtraj {

namespace {

bool position_in_bounds(double x, double y, int width, int height) {
    return x >= 0.0 && x <= width - 1.0 && y >= 0.0 && y <= height - 1.0;
}

bool mask_is_foreground(const GrayImage& mask, double x, double y) {
    const int xi = std::clamp(static_cast<int>(std::lround(x)), 0, mask.width - 1);
    const int yi = std::clamp(static_cast<int>(std::lround(y)), 0, mask.height - 1);
    return mask.at(xi, yi) >= 0.5;
}

}  // namespace

bool gate(const GateContext& ctx, const AdvectParams& params) {
    if (!ctx.in_bounds) return false;
    if (!ctx.mask_foreground) return false;
    const double mag = std::sqrt(ctx.u * ctx.u + ctx.v * ctx.v);
    if (mag < params.magnitude_min) return false;
    if (ctx.has_prev) {
        const double prev_mag =
            std::sqrt(ctx.prev_u * ctx.prev_u + ctx.prev_v * ctx.prev_v);
        if (mag > 0.0 && prev_mag > 0.0) {
            const double cosine =
                (ctx.u * ctx.prev_u + ctx.v * ctx.prev_v) / (mag * prev_mag);
            if (cosine < params.coherence_cos_min) return false;
        }
    }
    return true;
}

ParticleGrid init_particles(int width, int height, int stride) {
    if (stride < 1) throw std::invalid_argument("stride must be >= 1");
    if (stride >= std::min(width, height)) throw std::invalid_argument("stride too large");

    ParticleGrid grid;
    grid.frame_width = width;
    grid.frame_height = height;
    grid.stride = stride;
    grid.grid_w = (width + stride - 1) / stride;
    grid.grid_h = (height + stride - 1) / stride;

    const std::size_t count =
        static_cast<std::size_t>(grid.grid_w) * static_cast<std::size_t>(grid.grid_h);
    grid.src_x.reserve(count);
    grid.src_y.reserve(count);
    for (int j = 0; j < grid.grid_h; ++j) {
        for (int i = 0; i < grid.grid_w; ++i) {
            grid.src_x.push_back(static_cast<double>(i) * stride);
            grid.src_y.push_back(static_cast<double>(j) * stride);
        }
    }
    grid.map_x = grid.src_x;
    grid.map_y = grid.src_y;
    grid.active.assign(count, 1);
    grid.prev_u.assign(count, 0.0);
    grid.prev_v.assign(count, 0.0);
    grid.has_prev.assign(count, 0);
    grid.trajectories.assign(count, Trajectory{});
    return grid;
}

void advect_step(ParticleGrid& grid, const FlowField& flow,
                 const GrayImage* mask, const AdvectParams& params, int t) {
    if (flow.width != grid.frame_width || flow.height != grid.frame_height)
        throw std::invalid_argument("frame size mismatch");

    const bool masking = params.use_foreground_mask && mask != nullptr;
    const std::int64_t count = static_cast<std::int64_t>(grid.particle_count());
#pragma omp parallel for schedule(static)
    for (std::int64_t p = 0; p < count; ++p) {
        const std::size_t i = static_cast<std::size_t>(p);
        if (!grid.active[i]) continue;

        const double x = grid.map_x[i];
        const double y = grid.map_y[i];

        GateContext ctx;
        ctx.in_bounds = position_in_bounds(x, y, grid.frame_width, grid.frame_height);
        ctx.mask_foreground = !masking || (ctx.in_bounds && mask_is_foreground(*mask, x, y));
        if (ctx.in_bounds) sample_flow(flow, x, y, ctx.u, ctx.v);
        ctx.has_prev = grid.has_prev[i] != 0;
        ctx.prev_u = grid.prev_u[i];
        ctx.prev_v = grid.prev_v[i];

        if (!gate(ctx, params)) {
            grid.active[i] = 0;  // B = 0 closes the trajectory for good
            continue;
        }
        grid.trajectories[i].points.push_back({t, x, y, ctx.u, ctx.v});
        grid.map_x[i] = x + ctx.u;
        grid.map_y[i] = y + ctx.v;
        grid.prev_u[i] = ctx.u;
        grid.prev_v[i] = ctx.v;
        grid.has_prev[i] = 1;
    }
}

std::vector<Trajectory> extract_trajectories(
    const std::vector<FlowField>& flows,
    const std::vector<GrayImage>* masks,
    const AdvectParams& params) {
    if (flows.empty()) return {};
    for (const FlowField& f : flows) {
        if (f.width != flows[0].width || f.height != flows[0].height)
            throw std::invalid_argument("frame size mismatch");
    }
    if (masks != nullptr && params.use_foreground_mask) {
        if (masks->size() != flows.size())
            throw std::invalid_argument("mask count mismatch");
        for (const GrayImage& m : *masks) {
            if (m.width != flows[0].width || m.height != flows[0].height)
                throw std::invalid_argument("frame size mismatch");
        }
    }

    ParticleGrid grid = init_particles(flows[0].width, flows[0].height, params.stride);
    for (std::size_t t = 0; t < flows.size(); ++t) {
        const GrayImage* mask = masks != nullptr ? &(*masks)[t] : nullptr;
        advect_step(grid, flows[t], mask, params, static_cast<int>(t));
    }

    std::vector<Trajectory> result;
    for (Trajectory& traj : grid.trajectories) {
        if (!traj.points.empty()) result.push_back(std::move(traj));
    }
    return result;
}

double trajectory_extent(const Trajectory& traj) {
    if (traj.points.size() < 2) return 0.0;
    const TrajectoryPoint& a = traj.points.front();
    const TrajectoryPoint& b = traj.points.back();
    return std::sqrt((b.x - a.x) * (b.x - a.x) + (b.y - a.y) * (b.y - a.y));
}

std::vector<Trajectory> filter_trajectories(const std::vector<Trajectory>& trajs,
                                            double min_extent) {
    if (min_extent < 0.0) throw std::invalid_argument("min_extent must be >= 0");
    std::vector<Trajectory> kept;
    for (const Trajectory& traj : trajs) {
        if (trajectory_extent(traj) >= min_extent) kept.push_back(traj);
    }
    return kept;
}

void write_trajectory_csv(const std::vector<Trajectory>& trajs,
                          const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << "traj_id,t,x,y,u,v\n";
    char line[160];
    for (std::size_t id = 0; id < trajs.size(); ++id) {
        for (const TrajectoryPoint& p : trajs[id].points) {
            std::snprintf(line, sizeof line, "%zu,%d,%.6f,%.6f,%.6f,%.6f\n",
                          id, p.t, p.x, p.y, p.u, p.v);
            out << line;
        }
    }
    if (!out) throw std::runtime_error("write failed: " + file.string());
}

std::vector<Trajectory> read_trajectory_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("traj_id", 0) != 0)
        throw std::runtime_error("invalid trajectory CSV header in " + file.string());

    std::vector<Trajectory> trajs;
    long long current_id = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        long long id;
        TrajectoryPoint p;
        char sep;
        if (!(row >> id >> sep >> p.t >> sep >> p.x >> sep >> p.y >> sep >> p.u >> sep >> p.v))
            throw std::runtime_error("invalid trajectory CSV row: " + line);
        if (id != current_id) {
            trajs.emplace_back();
            current_id = id;
        }
        trajs.back().points.push_back(p);
    }
    return trajs;
}

}  // namespace dtraj
