#include "dtraj/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dtraj::ref {

BlockMatchResult block_match_flow(const GrayImage& prev, const GrayImage& next,
                                  int patch_radius, int max_disp) {
    const int w = prev.width, h = prev.height;
    BlockMatchResult result;
    result.flow = FlowField(w, h);
    result.valid.assign(static_cast<std::size_t>(w) * h, 0);

    const int guard = patch_radius + max_disp;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (x < guard || x >= w - guard || y < guard || y >= h - guard) continue;
            double best = std::numeric_limits<double>::infinity();
            int best_dx = 0, best_dy = 0;
            for (int dy = -max_disp; dy <= max_disp; ++dy) {
                for (int dx = -max_disp; dx <= max_disp; ++dx) {
                    double ssd = 0.0;
                    for (int py = -patch_radius; py <= patch_radius; ++py) {
                        for (int px = -patch_radius; px <= patch_radius; ++px) {
                            const double d = prev.at(x + px, y + py) -
                                             next.at(x + dx + px, y + dy + py);
                            ssd += d * d;
                        }
                    }
                    if (ssd < best) {
                        best = ssd;
                        best_dx = dx;
                        best_dy = dy;
                    }
                }
            }
            result.flow.u_at(x, y) = best_dx;
            result.flow.v_at(x, y) = best_dy;
            result.valid[static_cast<std::size_t>(y) * w + x] = 1;
        }
    }
    return result;
}

namespace {

double bilinear_at(const std::vector<double>& grid, int w, int h, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fx = x - x0, fy = y - y0;
    const double top = (1.0 - fx) * grid[static_cast<std::size_t>(y0) * w + x0] +
                       fx * grid[static_cast<std::size_t>(y0) * w + x1];
    const double bot = (1.0 - fx) * grid[static_cast<std::size_t>(y1) * w + x0] +
                       fx * grid[static_cast<std::size_t>(y1) * w + x1];
    return (1.0 - fy) * top + fy * bot;
}

}  // namespace

std::vector<Trajectory> advect_scalar(const std::vector<FlowField>& flows,
                                      const std::vector<GrayImage>* masks,
                                      const AdvectParams& params) {
    if (flows.empty()) return {};
    const int w = flows.front().width;
    const int h = flows.front().height;
    const int stride = params.stride;

    std::vector<Trajectory> result;
    for (int sy = 0; sy < h; sy += stride) {
        for (int sx = 0; sx < w; sx += stride) {
            double x = sx, y = sy;
            double prev_u = 0.0, prev_v = 0.0;
            bool has_prev = false;
            Trajectory traj;
            for (std::size_t t = 0; t < flows.size(); ++t) {
                if (x < 0.0 || x > w - 1.0 || y < 0.0 || y > h - 1.0) break;
                if (params.use_foreground_mask && masks != nullptr) {
                    const GrayImage& mask = (*masks)[t];
                    const int mx = std::clamp(static_cast<int>(std::lround(x)), 0, w - 1);
                    const int my = std::clamp(static_cast<int>(std::lround(y)), 0, h - 1);
                    if (mask.at(mx, my) < 0.5) break;
                }
                const double fu = bilinear_at(flows[t].u, w, h, x, y);
                const double fv = bilinear_at(flows[t].v, w, h, x, y);
                const double mag = std::sqrt(fu * fu + fv * fv);
                if (mag < params.magnitude_min) break;
                if (has_prev) {
                    const double prev_mag = std::sqrt(prev_u * prev_u + prev_v * prev_v);
                    if (mag > 0.0 && prev_mag > 0.0) {
                        const double cosine = (fu * prev_u + fv * prev_v) / (mag * prev_mag);
                        if (cosine < params.coherence_cos_min) break;
                    }
                }
                traj.points.push_back({static_cast<int>(t), x, y, fu, fv});
                x += fu;
                y += fv;
                prev_u = fu;
                prev_v = fv;
                has_prev = true;
            }
            if (!traj.points.empty()) result.push_back(std::move(traj));
        }
    }
    return result;
}

TextureImage render_canvas_gather(const std::vector<Trajectory>& trajs,
                                  int width, int height) {
    std::vector<std::vector<double>> hits(static_cast<std::size_t>(width) * height);
    for (const Trajectory& traj : trajs) {
        for (const TrajectoryPoint& p : traj.points) {
            const int xi = std::min(static_cast<int>(std::lround(p.x)), width - 1);
            const int yi = std::min(static_cast<int>(std::lround(p.y)), height - 1);
            hits[static_cast<std::size_t>(yi) * width + xi].push_back(
                std::sqrt(p.u * p.u + p.v * p.v));
        }
    }
    TextureImage canvas(width, height, 0.0);
    for (std::size_t i = 0; i < hits.size(); ++i) {
        for (double m : hits[i]) canvas.data[i] = std::max(canvas.data[i], m);
    }
    return canvas;
}

Tensor conv2d_naive(const Tensor& input, const ConvLayer& layer) {
    const int k = layer.kernel, s = layer.stride;
    const int oh = (input.h - k) / s + 1;
    const int ow = (input.w - k) / s + 1;
    Tensor out(layer.out_channels, oh, ow);
    for (int o = 0; o < layer.out_channels; ++o)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                double acc = layer.bias[static_cast<std::size_t>(o)];
                for (int i = 0; i < layer.in_channels; ++i)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx)
                            acc += layer.w_at(o, i, ky, kx) *
                                   input.at(i, y * s + ky, x * s + kx);
                out.at(o, y, x) = acc;
            }
    return out;
}

Tensor max_pool_naive(const Tensor& x, int window, int stride) {
    const int oh = (x.h - window) / stride + 1;
    const int ow = (x.w - window) / stride + 1;
    Tensor out(x.c, oh, ow);
    for (int c = 0; c < x.c; ++c)
        for (int y = 0; y < oh; ++y)
            for (int xo = 0; xo < ow; ++xo) {
                double best = x.at(c, y * stride, xo * stride);
                for (int wy = 0; wy < window; ++wy)
                    for (int wx = 0; wx < window; ++wx)
                        best = std::max(best, x.at(c, y * stride + wy, xo * stride + wx));
                out.at(c, y, xo) = best;
            }
    return out;
}

Tensor lrn_naive(const Tensor& x, const LrnSpec& spec) {
    const int half = spec.depth / 2;
    Tensor out(x.c, x.h, x.w);
    for (int c = 0; c < x.c; ++c)
        for (int y = 0; y < x.h; ++y)
            for (int xo = 0; xo < x.w; ++xo) {
                double sum_sq = 0.0;
                for (int j = std::max(0, c - half); j <= std::min(x.c - 1, c + half); ++j)
                    sum_sq += x.at(j, y, xo) * x.at(j, y, xo);
                out.at(c, y, xo) =
                    x.at(c, y, xo) / std::pow(spec.k + spec.alpha * sum_sq, spec.beta);
            }
    return out;
}

std::vector<double> fc_naive(const std::vector<double>& x, const FcLayer& layer) {
    std::vector<double> out(static_cast<std::size_t>(layer.out_size));
    for (int o = 0; o < layer.out_size; ++o) {
        double acc = layer.bias[static_cast<std::size_t>(o)];
        for (int i = 0; i < layer.in_size; ++i)
            acc += layer.weights[static_cast<std::size_t>(o) * layer.in_size + i] *
                   x[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(o)] = acc;
    }
    return out;
}

GrayImage warp_serial(const GrayImage& img, const FlowField& flow) {
    GrayImage out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            out.at(x, y) = sample_bilinear(img, x + flow.u_at(x, y), y + flow.v_at(x, y));
    return out;
}

}  // namespace dtraj::ref
