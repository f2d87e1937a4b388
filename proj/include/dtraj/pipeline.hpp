#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dtraj/advect.hpp"
#include "dtraj/canvas.hpp"
#include "dtraj/cnn.hpp"
#include "dtraj/dataset.hpp"
#include "dtraj/flow.hpp"

namespace dtraj {

struct PipelineConfig {
    FlowParams flow;
    AdvectParams advect;
    int segments = 3;
    int canvas_size = 165;
    NetworkConfig network;
    std::uint64_t seed = 1;

    // Network shaped to consume what run_pipeline produces.
    NetworkConfig network_for_run(int class_count) const;
    std::uint64_t split_seed() const;
};

// Row-normalized class-vs-class rates; rows with zero support stay all-zero.
struct ConfusionMatrix {
    std::vector<std::string> classes;
    std::vector<std::vector<double>> rows;
    std::vector<int> support;  // test examples per true class
};

// Sorted unique labels.
std::vector<std::string> collect_classes(const std::vector<VideoRecord>& records);

// load -> plan N segments -> per segment: pairwise flows, advection,
// filtering, canvas, resize, normalize -> stack. Stage names are attached to
// propagated errors.
TextureStack run_pipeline(const VideoRecord& record, const PipelineConfig& cfg);

struct EvalResult {
    double accuracy = 0.0;
    ConfusionMatrix cm;
};

// Accuracy and confusion matrix from parallel label vectors; the core of
// evaluate(), exposed for direct testing.
EvalResult evaluate_predictions(const std::vector<std::string>& classes,
                                const std::vector<int>& true_labels,
                                const std::vector<int>& predicted);

EvalResult evaluate(const CnnModel& model,
                    const std::vector<VideoRecord>& test_records,
                    const PipelineConfig& cfg,
                    const std::vector<std::string>& classes = {});

// Writes confusion.csv, summary.txt and per_class_recall.csv under out_dir.
void write_report(const EvalResult& result, const std::filesystem::path& out_dir);

// Header row of class names, then one row of normalized rates per true class.
void write_confusion_csv(const ConfusionMatrix& cm, const std::filesystem::path& file);
ConfusionMatrix read_confusion_csv(const std::filesystem::path& file);

// UTF-8 key=value config file mirroring PipelineConfig; '#' starts a comment.
PipelineConfig load_config(const std::filesystem::path& file);
void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                        const std::string& value);

}  // namespace dtraj
