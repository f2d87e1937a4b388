#include "dtraj/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "dtraj/random.hpp"

namespace dtraj {

namespace {

const std::vector<MotionFamily> kDefaultFamilies = {
    MotionFamily::TranslateRight,
    MotionFamily::TranslateDown,
    MotionFamily::OscillateHorizontal,
    MotionFamily::Rotate,
};

bool parse_frame_index(const std::string& stem, long long& index) {
    if (stem.empty()) return false;
    for (char c : stem) {
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    }
    index = std::stoll(stem);
    return true;
}

std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw std::runtime_error("not a directory: " + dir.string());
    std::vector<std::pair<long long, std::filesystem::path>> entries;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext != ".pgm" && ext != ".png" && ext != ".PGM" && ext != ".PNG") continue;
        long long index;
        if (!parse_frame_index(entry.path().stem().string(), index)) continue;
        entries.emplace_back(index, entry.path());
    }
    if (entries.empty()) throw std::runtime_error("no frames in " + dir.string());
    std::sort(entries.begin(), entries.end());
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i].first != entries[i - 1].first + 1)
            throw std::runtime_error("non-contiguous sequence in " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    files.reserve(entries.size());
    for (auto& [index, path] : entries) files.push_back(std::move(path));
    return files;
}

std::string split_name(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Test: return "test";
        default: return "-";
    }
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "test") return Split::Test;
    if (name == "-" || name.empty()) return Split::Unassigned;
    throw std::runtime_error("unknown split value: " + name);
}

// smoothed seeded noise stretched to [lo, hi]
GrayImage noise_texture(int width, int height, double lo, double hi, DetRng& rng) {
    GrayImage img(width, height);
    for (double& v : img.data) v = rng.next_unit();
    img = gaussian_smooth(img, 1.2);
    double mn = img.data[0], mx = img.data[0];
    for (double v : img.data) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    const double range = mx > mn ? mx - mn : 1.0;
    for (double& v : img.data) v = lo + (hi - lo) * (v - mn) / range;
    return img;
}

}  // namespace

std::string motion_family_name(MotionFamily family) {
    switch (family) {
        case MotionFamily::TranslateRight: return "translate_right";
        case MotionFamily::TranslateDown: return "translate_down";
        case MotionFamily::OscillateHorizontal: return "oscillate_horizontal";
        case MotionFamily::Rotate: return "rotate";
    }
    throw std::logic_error("unreachable");
}

LoadedVideo load_video(const VideoRecord& record) {
    LoadedVideo video;
    for (const std::filesystem::path& file : list_frames(record.frames_dir)) {
        video.frames.push_back(load_gray(file));
    }
    for (const GrayImage& frame : video.frames) {
        if (!frame.same_size(video.frames.front()))
            throw std::runtime_error("frame size mismatch in " + record.frames_dir.string());
    }
    if (record.mask_dir) {
        for (const std::filesystem::path& file : list_frames(*record.mask_dir)) {
            GrayImage mask = load_gray(file);
            for (double& v : mask.data) v = v >= 0.5 ? 1.0 : 0.0;
            video.masks.push_back(std::move(mask));
        }
        if (video.masks.size() != video.frames.size())
            throw std::runtime_error("mask/frame count mismatch in " + record.frames_dir.string());
        for (const GrayImage& mask : video.masks) {
            if (mask.width != video.frames.front().width ||
                mask.height != video.frames.front().height)
                throw std::runtime_error("mask size mismatch in " + record.frames_dir.string());
        }
    }
    return video;
}

SegmentPlan plan_segments(int frame_count, int n) {
    if (n < 1) throw std::invalid_argument("segment count must be >= 1");
    if (frame_count < 2 * n) throw std::invalid_argument("video too short");
    SegmentPlan plan;
    plan.n = n;
    const int base = frame_count / n;
    for (int i = 0; i < n; ++i) {
        const int begin = i * base;
        const int end = i == n - 1 ? frame_count : (i + 1) * base;
        plan.segments.push_back({begin, end});
    }
    return plan;
}

void split_dataset(std::vector<VideoRecord>& records, int per_class_train,
                   std::uint64_t seed) {
    if (per_class_train < 1) throw std::invalid_argument("per_class_train must be >= 1");
    std::map<std::string, std::vector<std::size_t>> by_class;  // sorted by label
    for (std::size_t i = 0; i < records.size(); ++i) {
        by_class[records[i].label].push_back(i);
    }
    DetRng rng(mix_seed(seed, 0xA));
    for (auto& [label, indices] : by_class) {
        if (static_cast<int>(indices.size()) <= per_class_train)
            throw std::invalid_argument("class '" + label + "' has too few records for the split");
        rng.shuffle(indices);
        for (std::size_t k = 0; k < indices.size(); ++k) {
            records[indices[k]].split =
                static_cast<int>(k) < per_class_train ? Split::Train : Split::Test;
        }
    }
}

SynthMotion synth_motion(const SynthSpec& spec, int class_idx, int seq_idx) {
    const std::vector<MotionFamily>& families =
        spec.families.empty() ? kDefaultFamilies : spec.families;
    if (class_idx < 0 || class_idx >= static_cast<int>(families.size()))
        throw std::invalid_argument("not enough motion families for class count");

    SynthMotion motion;
    motion.family = families[static_cast<std::size_t>(class_idx)];
    motion.speed = spec.speed;
    motion.blob_radius = std::max(4.0, spec.frame_size / 6.0);
    motion.half_period = std::max(4, spec.frame_count / 3);
    motion.omega = 2.0 * spec.speed / motion.blob_radius;  // edge speed ~ 2x blob speed

    DetRng rng(mix_seed(spec.seed, 0x10000u * static_cast<std::uint64_t>(class_idx + 1) +
                                       static_cast<std::uint64_t>(seq_idx)));
    const double margin = motion.blob_radius + 2.0;
    const double size = spec.frame_size;
    double travel_x = 0.0, travel_y = 0.0;
    switch (motion.family) {
        case MotionFamily::TranslateRight:
            travel_x = spec.speed * (spec.frame_count - 1);
            break;
        case MotionFamily::TranslateDown:
            travel_y = spec.speed * (spec.frame_count - 1);
            break;
        case MotionFamily::OscillateHorizontal:
            travel_x = spec.speed * motion.half_period;
            break;
        case MotionFamily::Rotate:
            break;
    }
    const double max_x = size - 1.0 - margin - travel_x;
    const double max_y = size - 1.0 - margin - travel_y;
    if (max_x < margin || max_y < margin)
        throw std::invalid_argument("frame too small for the configured motion");
    // integer start keeps translated frames exact shifted copies
    motion.start_x = std::floor(margin + rng.next_unit() * (max_x - margin));
    motion.start_y = std::floor(margin + rng.next_unit() * (max_y - margin));
    return motion;
}

void synth_center_at(const SynthMotion& motion, int t, double& x, double& y) {
    x = motion.start_x;
    y = motion.start_y;
    switch (motion.family) {
        case MotionFamily::TranslateRight:
            x += motion.speed * t;
            break;
        case MotionFamily::TranslateDown:
            y += motion.speed * t;
            break;
        case MotionFamily::OscillateHorizontal: {
            const int period = 2 * motion.half_period;
            const int phase = t % period;
            const int offset = phase < motion.half_period ? phase : period - phase;
            x += motion.speed * offset;
            break;
        }
        case MotionFamily::Rotate:
            break;
    }
}

std::vector<VideoRecord> synth_generate(const SynthSpec& spec,
                                        const std::filesystem::path& out_dir) {
    if (spec.class_count < 1 || spec.sequences_per_class < 1 ||
        spec.frame_count < 2 || spec.frame_size < 16)
        throw std::invalid_argument("invalid synth spec");
    const std::vector<MotionFamily>& families =
        spec.families.empty() ? kDefaultFamilies : spec.families;
    if (spec.class_count > static_cast<int>(families.size()))
        throw std::invalid_argument("not enough motion families for class count");

    std::filesystem::create_directories(out_dir);
    std::vector<VideoRecord> records;

    for (int c = 0; c < spec.class_count; ++c) {
        const std::string label = motion_family_name(families[static_cast<std::size_t>(c)]);
        for (int s = 0; s < spec.sequences_per_class; ++s) {
            const SynthMotion motion = synth_motion(spec, c, s);
            DetRng tex_rng(mix_seed(spec.seed, 0x20000000u +
                                                   0x10000u * static_cast<std::uint64_t>(c + 1) +
                                                   static_cast<std::uint64_t>(s)));

            char seq_name[32];
            std::snprintf(seq_name, sizeof seq_name, "seq_%03d", s);
            const std::filesystem::path seq_dir = out_dir / label / seq_name;
            const std::filesystem::path frames_dir = seq_dir / "frames";
            const std::filesystem::path masks_dir = seq_dir / "masks";
            std::filesystem::create_directories(frames_dir);
            std::filesystem::create_directories(masks_dir);

            const int r = static_cast<int>(motion.blob_radius);
            const int patch_side = 2 * r + 3;
            const GrayImage patch = noise_texture(patch_side, patch_side, 0.35, 1.0, tex_rng);
            const GrayImage background =
                noise_texture(spec.frame_size, spec.frame_size, 0.0, spec.noise_level, tex_rng);

            for (int t = 0; t < spec.frame_count; ++t) {
                double cx, cy;
                synth_center_at(motion, t, cx, cy);
                const double angle = motion.family == MotionFamily::Rotate ? motion.omega * t : 0.0;
                const double ca = std::cos(angle), sa = std::sin(angle);

                GrayImage frame = background;
                GrayImage mask(spec.frame_size, spec.frame_size, 0.0);
                const int x_lo = std::max(0, static_cast<int>(std::floor(cx - motion.blob_radius)));
                const int x_hi = std::min(spec.frame_size - 1,
                                          static_cast<int>(std::ceil(cx + motion.blob_radius)));
                const int y_lo = std::max(0, static_cast<int>(std::floor(cy - motion.blob_radius)));
                const int y_hi = std::min(spec.frame_size - 1,
                                          static_cast<int>(std::ceil(cy + motion.blob_radius)));
                for (int py = y_lo; py <= y_hi; ++py) {
                    for (int px = x_lo; px <= x_hi; ++px) {
                        const double lx = px - cx, ly = py - cy;
                        if (lx * lx + ly * ly > motion.blob_radius * motion.blob_radius) continue;
                        const double rx = ca * lx + sa * ly;
                        const double ry = -sa * lx + ca * ly;
                        frame.at(px, py) = sample_bilinear(patch, rx + r + 1, ry + r + 1);
                        mask.at(px, py) = 1.0;
                    }
                }
                char name[32];
                std::snprintf(name, sizeof name, "%05d.pgm", t);
                save_pgm(frame, frames_dir / name);
                save_pgm(mask, masks_dir / name);
            }

            VideoRecord record;
            record.frames_dir = frames_dir;
            record.mask_dir = masks_dir;
            record.label = label;
            record.split = Split::Unassigned;
            records.push_back(record);
        }
    }
    write_manifest(records, out_dir / "manifest.tsv");
    return records;
}

std::vector<VideoRecord> read_manifest(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    const std::filesystem::path base = file.parent_path();
    std::vector<VideoRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream row(line);
        std::string frames, masks, label, split;
        if (!std::getline(row, frames, '\t') || !std::getline(row, masks, '\t') ||
            !std::getline(row, label, '\t'))
            throw std::runtime_error("invalid manifest line: " + line);
        std::getline(row, split, '\t');

        VideoRecord record;
        record.frames_dir = std::filesystem::path(frames);
        if (record.frames_dir.is_relative()) record.frames_dir = base / record.frames_dir;
        if (masks != "-" && !masks.empty()) {
            std::filesystem::path mask_path(masks);
            if (mask_path.is_relative()) mask_path = base / mask_path;
            record.mask_dir = mask_path;
        }
        record.label = label;
        record.split = split_from_name(split);
        records.push_back(record);
    }
    return records;
}

void write_manifest(const std::vector<VideoRecord>& records,
                    const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    const std::filesystem::path base = file.parent_path();
    for (const VideoRecord& record : records) {
        std::filesystem::path frames = record.frames_dir.lexically_proximate(base);
        out << frames.string() << '\t';
        if (record.mask_dir) {
            out << record.mask_dir->lexically_proximate(base).string();
        } else {
            out << '-';
        }
        out << '\t' << record.label << '\t' << split_name(record.split) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + file.string());
}

}  // namespace dtraj
