#pragma once

#include <filesystem>
#include <vector>

#include "dtraj/advect.hpp"
#include "dtraj/image.hpp"

namespace dtraj {

// Canvas of flow magnitudes written at trajectory point locations.
using TextureImage = GrayImage;

// N per-segment texture images stacked as one multi-channel network input.
struct TextureStack {
    std::vector<TextureImage> channels;

    int segment_count() const { return static_cast<int>(channels.size()); }
};

// Projects trajectory points onto a zero canvas: pixel (round(x), round(y))
// receives sqrt(u^2+v^2); overlapping writes keep the maximum. Points must
// lie inside [0,width) x [0,height).
TextureImage render_canvas(const std::vector<Trajectory>& trajs,
                           int width, int height);

// Divides by the global maximum when it is positive; output in [0,1].
TextureImage normalize(const TextureImage& img);

// Channels in segment order; count and dimensions are checked.
TextureStack build_stack(std::vector<TextureImage> per_segment, int n);

// Lossless float export: magic "DTC1", int32 width/height, then row-major
// float32 values, little-endian.
void write_texture_raw(const TextureImage& img, const std::filesystem::path& file);
TextureImage read_texture_raw(const std::filesystem::path& file);

}  // namespace dtraj
