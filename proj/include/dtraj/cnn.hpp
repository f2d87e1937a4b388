#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "dtraj/canvas.hpp"

namespace dtraj {

// Dense (channels, height, width) activation block.
struct Tensor {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c_, int h_, int w_, double fill = 0.0)
        : c(c_), h(h_), w(w_),
          v(static_cast<std::size_t>(c_) * h_ * w_, fill) {}

    double& at(int ch, int y, int x) {
        return v[(static_cast<std::size_t>(ch) * h + y) * w + x];
    }
    double at(int ch, int y, int x) const {
        return v[(static_cast<std::size_t>(ch) * h + y) * w + x];
    }
    std::size_t size() const { return v.size(); }
};

struct ConvLayer {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 0;  // odd, square
    int stride = 1;
    std::vector<double> weights;  // [out][in][ky][kx]
    std::vector<double> bias;     // [out]

    double& w_at(int o, int i, int ky, int kx) {
        return weights[((static_cast<std::size_t>(o) * in_channels + i) * kernel + ky) * kernel + kx];
    }
    double w_at(int o, int i, int ky, int kx) const {
        return weights[((static_cast<std::size_t>(o) * in_channels + i) * kernel + ky) * kernel + kx];
    }
};

struct FcLayer {
    int in_size = 0;
    int out_size = 0;
    std::vector<double> weights;  // [out][in]
    std::vector<double> bias;     // [out]
};

struct ConvSpec {
    int filters = 0;
    int kernel = 0;
    int stride = 1;
};

struct PoolSpec {
    int window = 2;
    int stride = 2;
};

struct LrnSpec {
    int depth = 5;  // odd cross-channel window
    double k = 2.0;
    double alpha = 1e-4;
    double beta = 0.75;
};

// Architecture: conv1-relu-lrn-pool, conv2-relu-lrn-pool, conv3-relu-pool,
// conv4-relu-pool, fc1-relu, fc2-relu, fc3-softmax.
struct NetworkConfig {
    int input_channels = 3;
    int input_size = 165;
    std::array<ConvSpec, 4> conv{{{16, 7, 1}, {32, 5, 1}, {64, 3, 1}, {64, 3, 1}}};
    std::array<PoolSpec, 4> pool{{{2, 2}, {2, 2}, {2, 2}, {2, 2}}};
    LrnSpec lrn;
    std::array<int, 3> fc{{256, 128, 10}};  // fc[2] must equal class_count
    int class_count = 10;
    double learning_rate = 0.01;
    int epochs = 200;
    int batch_size = 8;
    std::uint64_t seed = 1;
};

// Spatial dimensions after every stage, computed from the config.
struct LayerDims {
    std::array<int, 4> conv_out;  // square side after each conv
    std::array<int, 4> pool_out;  // square side after each pool
    int flat = 0;                 // flattened size feeding fc1
    int conv4_features = 0;       // filters * conv_out[3]^2, extract_features length
};

// Validates the shape algebra (dims stay >= 1, odd kernels, fc3 == classes)
// and returns the per-stage dimensions; throws std::invalid_argument.
LayerDims compute_dims(const NetworkConfig& cfg);

struct CnnModel {
    NetworkConfig config;
    std::array<ConvLayer, 4> convs;
    std::array<FcLayer, 3> fcs;
};

// Seeded initialization: zero biases, Gaussian weights with
// std = 1/sqrt(fan_in).
CnnModel init_model(const NetworkConfig& cfg);

// --- individual layer operations ---

// Valid (no padding) cross-correlation over all input maps plus bias;
// no activation.
Tensor conv_forward(const Tensor& input, const ConvLayer& layer);
Tensor relu(const Tensor& x);
std::vector<double> relu(const std::vector<double>& x);
// Per-channel windowed max; argmax (flat input index per output element)
// recorded for the backward pass when requested.
Tensor max_pool(const Tensor& x, int window, int stride,
                std::vector<int>* argmax = nullptr);
// Cross-channel response normalization b = a / (k + alpha * sum a^2)^beta.
Tensor lrn(const Tensor& x, const LrnSpec& spec);
std::vector<double> fc_forward(const std::vector<double>& x, const FcLayer& layer);

struct SoftmaxResult {
    double loss = 0.0;
    std::vector<double> probs;
};
SoftmaxResult softmax_cross_entropy(const std::vector<double>& logits, int label);

// --- whole-network passes ---

struct ForwardTrace {
    Tensor input;
    std::array<Tensor, 4> conv_pre;    // conv output before activation
    std::array<Tensor, 4> conv_post;   // after ReLU
    std::array<Tensor, 4> norm_out;    // after LRN (layers 0,1) or == conv_post
    std::array<Tensor, 4> pool_out;
    std::array<std::vector<int>, 4> pool_argmax;
    std::vector<double> flat;
    std::array<std::vector<double>, 3> fc_pre;
    std::array<std::vector<double>, 3> fc_post;  // fc3 slot holds the logits
    std::vector<double> logits;
};

Tensor stack_to_tensor(const TextureStack& stack);
std::vector<double> forward(const CnnModel& model, const Tensor& input,
                            ForwardTrace* trace = nullptr);

struct Gradients {
    std::array<ConvLayer, 4> convs;  // weight/bias slots reused as gradient stores
    std::array<FcLayer, 3> fcs;

    void add_scaled(const Gradients& other, double scale);
};

Gradients zero_gradients(const CnnModel& model);

// Reverse-mode gradients of softmax cross-entropy w.r.t. every parameter.
Gradients backward(const CnnModel& model, const TextureStack& input, int label,
                   double* loss_out = nullptr);

struct TrainResult {
    CnnModel model;
    std::vector<double> epoch_loss;  // mean loss per epoch
};

// Seeded minibatch gradient descent, sum reduction over each batch;
// bit-deterministic for fixed (dataset, config).
TrainResult train(const std::vector<std::pair<TextureStack, int>>& dataset,
                  const NetworkConfig& cfg);

struct Prediction {
    int label = 0;
    std::vector<double> probs;
};

// Argmax of the softmax head; ties break toward the lowest class index.
Prediction predict(const CnnModel& model, const TextureStack& input);

// Flattened post-ReLU activations of the fourth convolution layer.
std::vector<double> extract_features(const CnnModel& model, const TextureStack& input);

// Model file: magic "DTRJ", version byte, config fields, then all parameters
// as little-endian float64 in declaration order. Round-trips bit-exactly.
void save_model(const CnnModel& model, const std::filesystem::path& file);
CnnModel load_model(const std::filesystem::path& file);

}  // namespace dtraj
