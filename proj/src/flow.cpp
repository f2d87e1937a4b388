#include "dtraj/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dtraj {

namespace {

constexpr float kFloTag = 202021.25f;

int scaled_dim(int dim, double factor) {
    return static_cast<int>(std::lround(dim * factor));
}

// central differences with edge replication
GrayImage deriv_x(const GrayImage& img) {
    GrayImage out(img.width, img.height);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const int xm = std::max(x - 1, 0);
            const int xp = std::min(x + 1, img.width - 1);
            out.at(x, y) = 0.5 * (img.at(xp, y) - img.at(xm, y));
        }
    }
    return out;
}

GrayImage deriv_y(const GrayImage& img) {
    GrayImage out(img.width, img.height);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < img.height; ++y) {
        const int ym = std::max(y - 1, 0);
        const int yp = std::min(y + 1, img.height - 1);
        for (int x = 0; x < img.width; ++x) {
            out.at(x, y) = 0.5 * (img.at(x, yp) - img.at(x, ym));
        }
    }
    return out;
}

// derivative of the robust penalty: Psi'(s^2) = 1 / (2 sqrt(s^2 + eps^2))
inline double robust_deriv(double s2, double eps) {
    return 0.5 / std::sqrt(s2 + eps * eps);
}

struct LinearTerms {
    GrayImage ix, iy, iz;     // gray constancy
    GrayImage ixx, ixy, iyy;  // gradient constancy Jacobian
    GrayImage ixz, iyz;
};

LinearTerms linearize(const GrayImage& prev, const GrayImage& warped) {
    LinearTerms t;
    const GrayImage p_x = deriv_x(prev), p_y = deriv_y(prev);
    const GrayImage w_x = deriv_x(warped), w_y = deriv_y(warped);
    const int w = prev.width, h = prev.height;
    t.ix = GrayImage(w, h);
    t.iy = GrayImage(w, h);
    t.iz = GrayImage(w, h);
    t.ixz = GrayImage(w, h);
    t.iyz = GrayImage(w, h);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            t.ix.at(x, y) = 0.5 * (p_x.at(x, y) + w_x.at(x, y));
            t.iy.at(x, y) = 0.5 * (p_y.at(x, y) + w_y.at(x, y));
            t.iz.at(x, y) = warped.at(x, y) - prev.at(x, y);
            t.ixz.at(x, y) = w_x.at(x, y) - p_x.at(x, y);
            t.iyz.at(x, y) = w_y.at(x, y) - p_y.at(x, y);
        }
    }
    t.ixx = deriv_x(t.ix);
    t.ixy = deriv_y(t.ix);
    t.iyy = deriv_y(t.iy);
    return t;
}

FlowField upsample_flow(const FlowField& coarse, int fine_w, int fine_h) {
    GrayImage cu(coarse.width, coarse.height), cv(coarse.width, coarse.height);
    cu.data = coarse.u;
    cv.data = coarse.v;
    const GrayImage fu = resize_bilinear(cu, fine_w, fine_h);
    const GrayImage fv = resize_bilinear(cv, fine_w, fine_h);
    const double scale_u = static_cast<double>(fine_w) / coarse.width;
    const double scale_v = static_cast<double>(fine_h) / coarse.height;
    FlowField fine(fine_w, fine_h);
    for (std::size_t i = 0; i < fine.u.size(); ++i) {
        fine.u[i] = fu.data[i] * scale_u;
        fine.v[i] = fv.data[i] * scale_v;
    }
    return fine;
}

// One lagged-nonlinearity solve for the flow increment at a pyramid level:
// recomputes the robust weights once, then runs red-black SOR sweeps on the
// coupled (du, dv) system. Red-black keeps the sweeps deterministic under
// row-parallel execution: neighbors always hold the other color.
void solve_increment(const LinearTerms& t, const FlowField& flow,
                     const FlowParams& params,
                     std::vector<double>& du, std::vector<double>& dv) {
    const int w = flow.width, h = flow.height;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    const double eps = params.robust_eps;

    std::vector<double> psi_data(n), psi_grad(n), psi_smooth(n);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double iz = t.iz.at(x, y);
            psi_data[i] = robust_deriv(iz * iz, eps);
            const double gx = t.ixz.at(x, y);
            const double gy = t.iyz.at(x, y);
            psi_grad[i] = robust_deriv(gx * gx + gy * gy, eps);

            const int xm = std::max(x - 1, 0), xp = std::min(x + 1, w - 1);
            const int ym = std::max(y - 1, 0), yp = std::min(y + 1, h - 1);
            const double ux = 0.5 * (flow.u_at(xp, y) - flow.u_at(xm, y));
            const double uy = 0.5 * (flow.u_at(x, yp) - flow.u_at(x, ym));
            const double vx = 0.5 * (flow.v_at(xp, y) - flow.v_at(xm, y));
            const double vy = 0.5 * (flow.v_at(x, yp) - flow.v_at(x, ym));
            psi_smooth[i] = robust_deriv(ux * ux + uy * uy + vx * vx + vy * vy, eps);
        }
    }

    const int dx4[4] = {-1, 1, 0, 0};
    const int dy4[4] = {0, 0, -1, 1};
    const double omega = params.sor_omega;

    for (int sweep = 0; sweep < params.inner_iterations; ++sweep) {
        for (int color = 0; color < 2; ++color) {
#pragma omp parallel for schedule(static)
            for (int y = 0; y < h; ++y) {
                for (int x = (y + color) % 2; x < w; x += 2) {
                    const std::size_t i = static_cast<std::size_t>(y) * w + x;
                    double sum_w = 0.0, nbr_u = 0.0, nbr_v = 0.0;
                    for (int k = 0; k < 4; ++k) {
                        const int xn = x + dx4[k], yn = y + dy4[k];
                        if (xn < 0 || xn >= w || yn < 0 || yn >= h) continue;
                        const std::size_t j = static_cast<std::size_t>(yn) * w + xn;
                        const double wgt = 0.5 * (psi_smooth[i] + psi_smooth[j]);
                        sum_w += wgt;
                        nbr_u += wgt * (flow.u[j] + du[j] - flow.u[i]);
                        nbr_v += wgt * (flow.v[j] + dv[j] - flow.v[i]);
                    }
                    const double pd = psi_data[i];
                    const double pg = params.gamma * psi_grad[i];
                    const double ix = t.ix.at(x, y), iy = t.iy.at(x, y), iz = t.iz.at(x, y);
                    const double ixx = t.ixx.at(x, y), ixy = t.ixy.at(x, y), iyy = t.iyy.at(x, y);
                    const double ixz = t.ixz.at(x, y), iyz = t.iyz.at(x, y);

                    const double a11 = pd * ix * ix + pg * (ixx * ixx + ixy * ixy) + params.alpha * sum_w;
                    const double a12 = pd * ix * iy + pg * (ixx * ixy + ixy * iyy);
                    const double a22 = pd * iy * iy + pg * (ixy * ixy + iyy * iyy) + params.alpha * sum_w;
                    const double b1 = -pd * ix * iz - pg * (ixx * ixz + ixy * iyz) + params.alpha * nbr_u;
                    const double b2 = -pd * iy * iz - pg * (ixy * ixz + iyy * iyz) + params.alpha * nbr_v;

                    if (a11 <= 0.0 || a22 <= 0.0) continue;  // isolated pixel, no constraint
                    const double du_new = (1.0 - omega) * du[i] + omega * (b1 - a12 * dv[i]) / a11;
                    const double dv_new = (1.0 - omega) * dv[i] + omega * (b2 - a12 * du_new) / a22;
                    du[i] = du_new;
                    dv[i] = dv_new;
                }
            }
        }
    }
}

void le_put_u32(std::ofstream& out, std::uint32_t value) {
    unsigned char b[4] = {static_cast<unsigned char>(value & 0xff),
                          static_cast<unsigned char>((value >> 8) & 0xff),
                          static_cast<unsigned char>((value >> 16) & 0xff),
                          static_cast<unsigned char>((value >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

void le_put_f32(std::ofstream& out, float value) {
    std::uint32_t bits;
    std::memcpy(&bits, &value, 4);
    le_put_u32(out, bits);
}

std::uint32_t le_get_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

float le_get_f32(std::ifstream& in) {
    const std::uint32_t bits = le_get_u32(in);
    float value;
    std::memcpy(&value, &bits, 4);
    return value;
}

}  // namespace

std::vector<GrayImage> build_pyramid(const GrayImage& img, double factor, int min_size) {
    if (factor <= 0.0 || factor >= 1.0)
        throw std::invalid_argument("pyramid factor must be in (0,1)");
    if (min_size < 8) throw std::invalid_argument("min_size must be >= 8");

    std::vector<GrayImage> levels;
    levels.push_back(img);
    const double sigma = 1.0 / std::sqrt(2.0 * factor);
    while (true) {
        const GrayImage& top = levels.back();
        const int nw = scaled_dim(top.width, factor);
        const int nh = scaled_dim(top.height, factor);
        if (std::min(nw, nh) < min_size) break;
        if (nw >= top.width || nh >= top.height) break;  // rounding stopped shrinking
        levels.push_back(resize_bilinear(gaussian_smooth(top, sigma), nw, nh));
    }
    return levels;
}

GrayImage warp_image(const GrayImage& img, const FlowField& flow) {
    if (img.width != flow.width || img.height != flow.height)
        throw std::invalid_argument("frame size mismatch");
    GrayImage out(img.width, img.height);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            out.at(x, y) = sample_bilinear(img, x + flow.u_at(x, y), y + flow.v_at(x, y));
        }
    }
    return out;
}

FlowField compute_flow(const GrayImage& prev, const GrayImage& next,
                       const FlowParams& params) {
    if (!prev.same_size(next)) throw std::invalid_argument("frame size mismatch");
    if (!image_is_finite(prev) || !image_is_finite(next))
        throw std::invalid_argument("invalid image");

    const std::vector<GrayImage> pyr_prev =
        build_pyramid(prev, params.pyramid_factor, params.min_level_size);
    const std::vector<GrayImage> pyr_next =
        build_pyramid(next, params.pyramid_factor, params.min_level_size);

    FlowField flow;
    for (int level = static_cast<int>(pyr_prev.size()) - 1; level >= 0; --level) {
        const GrayImage& p = pyr_prev[static_cast<std::size_t>(level)];
        const GrayImage& q = pyr_next[static_cast<std::size_t>(level)];
        if (level == static_cast<int>(pyr_prev.size()) - 1) {
            flow = FlowField(p.width, p.height);
        } else {
            flow = upsample_flow(flow, p.width, p.height);
        }

        std::vector<double> du(flow.u.size()), dv(flow.v.size());
        for (int outer = 0; outer < params.outer_iterations; ++outer) {
            const GrayImage warped = warp_image(q, flow);
            const LinearTerms terms = linearize(p, warped);
            std::fill(du.begin(), du.end(), 0.0);
            std::fill(dv.begin(), dv.end(), 0.0);
            solve_increment(terms, flow, params, du, dv);
            for (std::size_t i = 0; i < flow.u.size(); ++i) {
                flow.u[i] += du[i];
                flow.v[i] += dv[i];
            }
        }
    }
    return flow;
}

GrayImage flow_magnitude(const FlowField& flow) {
    GrayImage out(flow.width, flow.height);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < flow.height; ++y) {
        for (int x = 0; x < flow.width; ++x) {
            const double u = flow.u_at(x, y), v = flow.v_at(x, y);
            out.at(x, y) = std::sqrt(u * u + v * v);
        }
    }
    return out;
}

void sample_flow(const FlowField& flow, double x, double y,
                 double& out_u, double& out_v) {
    x = std::clamp(x, 0.0, static_cast<double>(flow.width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(flow.height - 1));
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, flow.width - 1);
    const int y1 = std::min(y0 + 1, flow.height - 1);
    const double fx = x - x0, fy = y - y0;
    out_u = (1.0 - fy) * ((1.0 - fx) * flow.u_at(x0, y0) + fx * flow.u_at(x1, y0)) +
            fy * ((1.0 - fx) * flow.u_at(x0, y1) + fx * flow.u_at(x1, y1));
    out_v = (1.0 - fy) * ((1.0 - fx) * flow.v_at(x0, y0) + fx * flow.v_at(x1, y0)) +
            fy * ((1.0 - fx) * flow.v_at(x0, y1) + fx * flow.v_at(x1, y1));
}

void mask_flow(FlowField& flow, const GrayImage& mask) {
    if (mask.width != flow.width || mask.height != flow.height)
        throw std::invalid_argument("frame size mismatch");
    for (std::size_t i = 0; i < flow.u.size(); ++i) {
        if (mask.data[i] < 0.5) {
            flow.u[i] = 0.0;
            flow.v[i] = 0.0;
        }
    }
}

void write_flo(const FlowField& flow, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    le_put_f32(out, kFloTag);
    le_put_u32(out, static_cast<std::uint32_t>(flow.width));
    le_put_u32(out, static_cast<std::uint32_t>(flow.height));
    for (int y = 0; y < flow.height; ++y) {
        for (int x = 0; x < flow.width; ++x) {
            le_put_f32(out, static_cast<float>(flow.u_at(x, y)));
            le_put_f32(out, static_cast<float>(flow.v_at(x, y)));
        }
    }
    if (!out) throw std::runtime_error("write failed: " + file.string());
}

FlowField read_flo(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    const float tag = le_get_f32(in);
    if (!in || tag != kFloTag) throw std::runtime_error("not a .flo file: " + file.string());
    const int w = static_cast<int>(le_get_u32(in));
    const int h = static_cast<int>(le_get_u32(in));
    if (!in || w < 1 || h < 1) throw std::runtime_error("invalid .flo header: " + file.string());
    FlowField flow(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            flow.u_at(x, y) = le_get_f32(in);
            flow.v_at(x, y) = le_get_f32(in);
        }
    }
    if (!in) throw std::runtime_error("truncated .flo file: " + file.string());
    return flow;
}

}  // namespace dtraj
