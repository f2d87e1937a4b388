#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dtraj/image.hpp"

namespace dtraj {

enum class Split { Train, Test, Unassigned };

struct VideoRecord {
    std::filesystem::path frames_dir;
    std::optional<std::filesystem::path> mask_dir;
    std::string label;
    Split split = Split::Unassigned;
};

struct LoadedVideo {
    std::vector<GrayImage> frames;
    std::vector<GrayImage> masks;  // empty when the record has no mask dir
};

struct Segment {
    int begin = 0;  // half-open [begin, end)
    int end = 0;
};

struct SegmentPlan {
    int n = 0;
    std::vector<Segment> segments;
};

enum class MotionFamily {
    TranslateRight,
    TranslateDown,
    OscillateHorizontal,
    Rotate,
};

std::string motion_family_name(MotionFamily family);

// Synthetic labeled motion data: one textured blob per sequence moving over a
// static background, with exact foreground masks. Deterministic per seed.
struct SynthSpec {
    int class_count = 4;
    int sequences_per_class = 20;
    int frame_count = 24;
    int frame_size = 64;
    std::vector<MotionFamily> families;  // per class; defaults cycle all four
    double speed = 1.0;                  // blob speed, pixels/frame
    double noise_level = 0.05;           // static background texture amplitude
    std::uint64_t seed = 7;
};

// Frames (and masks, if present) in numeric filename order.
LoadedVideo load_video(const VideoRecord& record);

// First n-1 segments of floor(frame_count/n) frames; the last takes the
// remainder. Every segment keeps at least 2 frames.
SegmentPlan plan_segments(int frame_count, int n);

// Seeded choice of exactly per_class_train records per class as the train
// split, the rest as test. Classes are processed in lexicographic order.
void split_dataset(std::vector<VideoRecord>& records, int per_class_train,
                   std::uint64_t seed);

// Materializes the synthetic dataset under out_dir (PGM frames + masks) and
// returns the records. Also writes out_dir/manifest.tsv.
std::vector<VideoRecord> synth_generate(const SynthSpec& spec,
                                        const std::filesystem::path& out_dir);

// Analytic blob center at frame t for a given sequence; exposed so tests can
// check the generated motion without re-deriving it.
struct SynthMotion {
    MotionFamily family;
    double start_x = 0.0, start_y = 0.0;
    double speed = 0.0;
    int half_period = 0;     // oscillation only
    double omega = 0.0;      // rotation only, radians/frame
    double blob_radius = 0.0;
};
SynthMotion synth_motion(const SynthSpec& spec, int class_idx, int seq_idx);
void synth_center_at(const SynthMotion& motion, int t, double& x, double& y);

// Manifest: one record per line,
// frames_dir<TAB>mask_dir_or_dash<TAB>label<TAB>split_or_dash.
std::vector<VideoRecord> read_manifest(const std::filesystem::path& file);
void write_manifest(const std::vector<VideoRecord>& records,
                    const std::filesystem::path& file);

}  // namespace dtraj
