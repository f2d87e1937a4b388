#include "dtraj/canvas.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dtraj {

namespace {

constexpr char kTextureMagic[4] = {'D', 'T', 'C', '1'};

void le_put_u32(std::ofstream& out, std::uint32_t value) {
    unsigned char b[4] = {static_cast<unsigned char>(value & 0xff),
                          static_cast<unsigned char>((value >> 8) & 0xff),
                          static_cast<unsigned char>((value >> 16) & 0xff),
                          static_cast<unsigned char>((value >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t le_get_u32(std::ifstream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

TextureImage render_canvas(const std::vector<Trajectory>& trajs,
                           int width, int height) {
    if (width < 1 || height < 1)
        throw std::invalid_argument("canvas dims must be >= 1");
    TextureImage canvas(width, height, 0.0);
    for (const Trajectory& traj : trajs) {
        for (const TrajectoryPoint& p : traj.points) {
            if (p.x < 0.0 || p.x >= width || p.y < 0.0 || p.y >= height)
                throw std::invalid_argument("trajectory outside canvas");
            const int xi = std::min(static_cast<int>(std::lround(p.x)), width - 1);
            const int yi = std::min(static_cast<int>(std::lround(p.y)), height - 1);
            const double mag = std::sqrt(p.u * p.u + p.v * p.v);
            canvas.at(xi, yi) = std::max(canvas.at(xi, yi), mag);
        }
    }
    return canvas;
}

TextureImage normalize(const TextureImage& img) {
    double max_value = 0.0;
    for (double v : img.data) max_value = std::max(max_value, v);
    if (max_value <= 0.0) return img;
    TextureImage out = img;
    for (double& v : out.data) v /= max_value;
    return out;
}

TextureStack build_stack(std::vector<TextureImage> per_segment, int n) {
    if (static_cast<int>(per_segment.size()) != n)
        throw std::invalid_argument("segment count mismatch");
    for (const TextureImage& img : per_segment) {
        if (!img.same_size(per_segment.front()))
            throw std::invalid_argument("segment dims mismatch");
    }
    TextureStack stack;
    stack.channels = std::move(per_segment);
    return stack;
}

void write_texture_raw(const TextureImage& img, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out.write(kTextureMagic, 4);
    le_put_u32(out, static_cast<std::uint32_t>(img.width));
    le_put_u32(out, static_cast<std::uint32_t>(img.height));
    for (double v : img.data) {
        const float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        le_put_u32(out, bits);
    }
    if (!out) throw std::runtime_error("write failed: " + file.string());
}

TextureImage read_texture_raw(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kTextureMagic, 4) != 0)
        throw std::runtime_error("not a texture file: " + file.string());
    const int w = static_cast<int>(le_get_u32(in));
    const int h = static_cast<int>(le_get_u32(in));
    if (!in || w < 1 || h < 1)
        throw std::runtime_error("invalid texture header: " + file.string());
    TextureImage img(w, h);
    for (double& v : img.data) {
        const std::uint32_t bits = le_get_u32(in);
        float f;
        std::memcpy(&f, &bits, 4);
        v = f;
    }
    if (!in) throw std::runtime_error("truncated texture file: " + file.string());
    return img;
}

}  // namespace dtraj
