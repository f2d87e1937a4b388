#include "dtraj/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dtraj/random.hpp"

namespace dtraj {

namespace {

[[noreturn]] void rethrow_with_stage(const char* stage, const std::exception& e) {
    throw std::runtime_error(std::string(stage) + ": " + e.what());
}

int to_int(const std::string& value) {
    std::size_t pos = 0;
    const int parsed = std::stoi(value, &pos);
    if (pos != value.size()) throw std::runtime_error("invalid integer: " + value);
    return parsed;
}

double to_double(const std::string& value) {
    std::size_t pos = 0;
    const double parsed = std::stod(value, &pos);
    if (pos != value.size()) throw std::runtime_error("invalid number: " + value);
    return parsed;
}

std::uint64_t to_u64(const std::string& value) {
    std::size_t pos = 0;
    const unsigned long long parsed = std::stoull(value, &pos);
    if (pos != value.size()) throw std::runtime_error("invalid integer: " + value);
    return parsed;
}

bool to_bool(const std::string& value) {
    if (value == "1" || value == "true") return true;
    if (value == "0" || value == "false") return false;
    throw std::runtime_error("invalid boolean: " + value);
}

std::string trimmed(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

}  // namespace

NetworkConfig PipelineConfig::network_for_run(int class_count) const {
    NetworkConfig net = network;
    net.input_channels = segments;
    net.input_size = canvas_size;
    net.class_count = class_count;
    net.fc[2] = class_count;
    net.seed = mix_seed(seed, 2);
    return net;
}

std::uint64_t PipelineConfig::split_seed() const { return mix_seed(seed, 1); }

std::vector<std::string> collect_classes(const std::vector<VideoRecord>& records) {
    std::set<std::string> labels;
    for (const VideoRecord& record : records) labels.insert(record.label);
    return {labels.begin(), labels.end()};
}

TextureStack run_pipeline(const VideoRecord& record, const PipelineConfig& cfg) {
    LoadedVideo video;
    try {
        video = load_video(record);
    } catch (const std::exception& e) {
        rethrow_with_stage("load", e);
    }

    SegmentPlan plan;
    try {
        plan = plan_segments(static_cast<int>(video.frames.size()), cfg.segments);
    } catch (const std::exception& e) {
        rethrow_with_stage("segment", e);
    }

    const bool masked = !video.masks.empty() && cfg.advect.use_foreground_mask;
    const int width = video.frames.front().width;
    const int height = video.frames.front().height;

    std::vector<TextureImage> channels;
    for (const Segment& segment : plan.segments) {
        std::vector<FlowField> flows;
        std::vector<GrayImage> masks;
        try {
            for (int t = segment.begin; t + 1 < segment.end; ++t) {
                FlowField flow = compute_flow(video.frames[static_cast<std::size_t>(t)],
                                              video.frames[static_cast<std::size_t>(t + 1)],
                                              cfg.flow);
                if (masked) {
                    mask_flow(flow, video.masks[static_cast<std::size_t>(t)]);
                    masks.push_back(video.masks[static_cast<std::size_t>(t)]);
                }
                flows.push_back(std::move(flow));
            }
        } catch (const std::exception& e) {
            rethrow_with_stage("flow", e);
        }

        std::vector<Trajectory> trajs;
        try {
            trajs = extract_trajectories(flows, masked ? &masks : nullptr, cfg.advect);
            trajs = filter_trajectories(trajs, cfg.advect.min_extent);
        } catch (const std::exception& e) {
            rethrow_with_stage("advect", e);
        }

        try {
            TextureImage canvas = render_canvas(trajs, width, height);
            canvas = resize_bilinear(canvas, cfg.canvas_size, cfg.canvas_size);
            channels.push_back(normalize(canvas));
        } catch (const std::exception& e) {
            rethrow_with_stage("canvas", e);
        }
    }

    try {
        return build_stack(std::move(channels), cfg.segments);
    } catch (const std::exception& e) {
        rethrow_with_stage("stack", e);
    }
}

EvalResult evaluate_predictions(const std::vector<std::string>& classes,
                                const std::vector<int>& true_labels,
                                const std::vector<int>& predicted) {
    if (true_labels.empty() || true_labels.size() != predicted.size())
        throw std::invalid_argument("empty test set");
    const int k = static_cast<int>(classes.size());

    EvalResult result;
    result.cm.classes = classes;
    result.cm.rows.assign(static_cast<std::size_t>(k), std::vector<double>(static_cast<std::size_t>(k), 0.0));
    result.cm.support.assign(static_cast<std::size_t>(k), 0);

    int correct = 0;
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
        const int truth = true_labels[i];
        const int pred = predicted[i];
        if (truth < 0 || truth >= k || pred < 0 || pred >= k)
            throw std::invalid_argument("label index out of range");
        result.cm.rows[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)] += 1.0;
        result.cm.support[static_cast<std::size_t>(truth)] += 1;
        if (truth == pred) ++correct;
    }
    for (int row = 0; row < k; ++row) {
        const int support = result.cm.support[static_cast<std::size_t>(row)];
        if (support == 0) continue;
        for (double& cell : result.cm.rows[static_cast<std::size_t>(row)]) cell /= support;
    }
    result.accuracy = static_cast<double>(correct) / static_cast<double>(true_labels.size());
    return result;
}

EvalResult evaluate(const CnnModel& model,
                    const std::vector<VideoRecord>& test_records,
                    const PipelineConfig& cfg,
                    const std::vector<std::string>& classes) {
    if (test_records.empty()) throw std::invalid_argument("empty test set");
    const std::vector<std::string> class_list =
        classes.empty() ? collect_classes(test_records) : classes;
    std::map<std::string, int> index_of;
    for (std::size_t i = 0; i < class_list.size(); ++i)
        index_of[class_list[i]] = static_cast<int>(i);

    const std::int64_t n = static_cast<std::int64_t>(test_records.size());
    std::vector<int> truth(test_records.size()), pred(test_records.size());
    for (std::size_t i = 0; i < test_records.size(); ++i) {
        const auto it = index_of.find(test_records[i].label);
        if (it == index_of.end())
            throw std::invalid_argument("label not in class list: " + test_records[i].label);
        truth[i] = it->second;
    }

#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
        const TextureStack stack = run_pipeline(test_records[static_cast<std::size_t>(i)], cfg);
        pred[static_cast<std::size_t>(i)] = predict(model, stack).label;
    }
    return evaluate_predictions(class_list, truth, pred);
}

void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& file) {
    std::ofstream out(file);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    for (std::size_t i = 0; i < cm.classes.size(); ++i) {
        out << (i == 0 ? "" : ",") << cm.classes[i];
    }
    out << '\n';
    char cell[64];
    for (const std::vector<double>& row : cm.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            std::snprintf(cell, sizeof cell, "%.17g", row[i]);
            out << (i == 0 ? "" : ",") << cell;
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + file.string());
}

ConfusionMatrix read_confusion_csv(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    ConfusionMatrix cm;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty confusion CSV");
    std::istringstream header(line);
    std::string token;
    while (std::getline(header, token, ',')) cm.classes.push_back(token);

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row_stream(line);
        std::vector<double> row;
        while (std::getline(row_stream, token, ',')) row.push_back(to_double(token));
        if (row.size() != cm.classes.size())
            throw std::runtime_error("confusion CSV row width mismatch");
        cm.rows.push_back(std::move(row));
    }
    if (cm.rows.size() != cm.classes.size())
        throw std::runtime_error("confusion CSV row count mismatch");
    return cm;
}

void write_report(const EvalResult& result, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    write_confusion_csv(result.cm, out_dir / "confusion.csv");

    std::ofstream summary(out_dir / "summary.txt");
    if (!summary) throw std::runtime_error("cannot write summary.txt");
    int total = 0;
    for (int s : result.cm.support) total += s;
    char line[128];
    std::snprintf(line, sizeof line, "examples=%d\n", total);
    summary << line;
    std::snprintf(line, sizeof line, "accuracy=%.6f\n", result.accuracy);
    summary << line;
    std::snprintf(line, sizeof line, "error_rate=%.6f\n", 1.0 - result.accuracy);
    summary << line;

    std::ofstream recall(out_dir / "per_class_recall.csv");
    if (!recall) throw std::runtime_error("cannot write per_class_recall.csv");
    recall << "class,support,recall\n";
    for (std::size_t i = 0; i < result.cm.classes.size(); ++i) {
        const double value = result.cm.support[i] > 0 ? result.cm.rows[i][i] : 0.0;
        std::snprintf(line, sizeof line, "%s,%d,%.6f\n", result.cm.classes[i].c_str(),
                      result.cm.support[i], value);
        recall << line;
    }
}

void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                        const std::string& value) {
    if (key == "flow.alpha") cfg.flow.alpha = to_double(value);
    else if (key == "flow.gamma") cfg.flow.gamma = to_double(value);
    else if (key == "flow.pyramid_factor") cfg.flow.pyramid_factor = to_double(value);
    else if (key == "flow.min_level_size") cfg.flow.min_level_size = to_int(value);
    else if (key == "flow.outer_iterations") cfg.flow.outer_iterations = to_int(value);
    else if (key == "flow.inner_iterations") cfg.flow.inner_iterations = to_int(value);
    else if (key == "flow.sor_omega") cfg.flow.sor_omega = to_double(value);
    else if (key == "flow.robust_eps") cfg.flow.robust_eps = to_double(value);
    else if (key == "advect.stride") cfg.advect.stride = to_int(value);
    else if (key == "advect.min_extent") cfg.advect.min_extent = to_double(value);
    else if (key == "advect.coherence_cos_min") cfg.advect.coherence_cos_min = to_double(value);
    else if (key == "advect.magnitude_min") cfg.advect.magnitude_min = to_double(value);
    else if (key == "advect.use_foreground_mask") cfg.advect.use_foreground_mask = to_bool(value);
    else if (key == "segments") cfg.segments = to_int(value);
    else if (key == "canvas_size") cfg.canvas_size = to_int(value);
    else if (key == "seed") cfg.seed = to_u64(value);
    else if (key == "net.conv1.filters") cfg.network.conv[0].filters = to_int(value);
    else if (key == "net.conv1.kernel") cfg.network.conv[0].kernel = to_int(value);
    else if (key == "net.conv1.stride") cfg.network.conv[0].stride = to_int(value);
    else if (key == "net.conv2.filters") cfg.network.conv[1].filters = to_int(value);
    else if (key == "net.conv2.kernel") cfg.network.conv[1].kernel = to_int(value);
    else if (key == "net.conv2.stride") cfg.network.conv[1].stride = to_int(value);
    else if (key == "net.conv3.filters") cfg.network.conv[2].filters = to_int(value);
    else if (key == "net.conv3.kernel") cfg.network.conv[2].kernel = to_int(value);
    else if (key == "net.conv3.stride") cfg.network.conv[2].stride = to_int(value);
    else if (key == "net.conv4.filters") cfg.network.conv[3].filters = to_int(value);
    else if (key == "net.conv4.kernel") cfg.network.conv[3].kernel = to_int(value);
    else if (key == "net.conv4.stride") cfg.network.conv[3].stride = to_int(value);
    else if (key == "net.pool1.window") cfg.network.pool[0].window = to_int(value);
    else if (key == "net.pool1.stride") cfg.network.pool[0].stride = to_int(value);
    else if (key == "net.pool2.window") cfg.network.pool[1].window = to_int(value);
    else if (key == "net.pool2.stride") cfg.network.pool[1].stride = to_int(value);
    else if (key == "net.pool3.window") cfg.network.pool[2].window = to_int(value);
    else if (key == "net.pool3.stride") cfg.network.pool[2].stride = to_int(value);
    else if (key == "net.pool4.window") cfg.network.pool[3].window = to_int(value);
    else if (key == "net.pool4.stride") cfg.network.pool[3].stride = to_int(value);
    else if (key == "net.lrn.depth") cfg.network.lrn.depth = to_int(value);
    else if (key == "net.lrn.k") cfg.network.lrn.k = to_double(value);
    else if (key == "net.lrn.alpha") cfg.network.lrn.alpha = to_double(value);
    else if (key == "net.lrn.beta") cfg.network.lrn.beta = to_double(value);
    else if (key == "net.fc1") cfg.network.fc[0] = to_int(value);
    else if (key == "net.fc2") cfg.network.fc[1] = to_int(value);
    else if (key == "net.learning_rate") cfg.network.learning_rate = to_double(value);
    else if (key == "net.epochs") cfg.network.epochs = to_int(value);
    else if (key == "net.batch_size") cfg.network.batch_size = to_int(value);
    else throw std::runtime_error("unknown config key: " + key);
}

PipelineConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    PipelineConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trimmed(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     " is not key=value");
        apply_config_entry(cfg, trimmed(line.substr(0, eq)), trimmed(line.substr(eq + 1)));
    }
    return cfg;
}

}  // namespace dtraj
