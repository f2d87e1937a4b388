#include "dtraj/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "dtraj/random.hpp"

namespace dtraj {

namespace {

int conv_out_dim(int in, int kernel, int stride) {
    return (in - kernel) / stride + 1;
}

int pool_out_dim(int in, int window, int stride) {
    return (in - window) / stride + 1;
}

void check(bool ok, const char* message) {
    if (!ok) throw std::invalid_argument(message);
}

}  // namespace

LayerDims compute_dims(const NetworkConfig& cfg) {
    check(cfg.input_channels >= 1, "input channels must be >= 1");
    check(cfg.input_size >= 1, "input size must be >= 1");
    check(cfg.class_count >= 2, "class count must be >= 2");
    check(cfg.fc[2] == cfg.class_count, "final fc width must equal class count");
    check(cfg.fc[0] >= 1 && cfg.fc[1] >= 1, "fc widths must be >= 1");
    check(cfg.lrn.depth >= 1 && cfg.lrn.depth % 2 == 1, "lrn depth must be odd");
    check(cfg.learning_rate > 0.0, "learning rate must be > 0");
    check(cfg.batch_size >= 1, "batch size must be >= 1");

    LayerDims dims{};
    int side = cfg.input_size;
    int channels = cfg.input_channels;
    for (int l = 0; l < 4; ++l) {
        const ConvSpec& c = cfg.conv[static_cast<std::size_t>(l)];
        check(c.filters >= 1, "conv filters must be >= 1");
        check(c.kernel >= 1 && c.kernel % 2 == 1, "conv kernel must be odd");
        check(c.stride >= 1, "conv stride must be >= 1");
        check(side >= c.kernel, "spatial dims fell below kernel size");
        side = conv_out_dim(side, c.kernel, c.stride);
        check(side >= 1, "conv output dims fell below 1");
        dims.conv_out[static_cast<std::size_t>(l)] = side;

        const PoolSpec& p = cfg.pool[static_cast<std::size_t>(l)];
        check(p.window >= 1 && p.stride >= 1, "pool window/stride must be >= 1");
        check(side >= p.window, "spatial dims fell below pool window");
        side = pool_out_dim(side, p.window, p.stride);
        check(side >= 1, "pool output dims fell below 1");
        dims.pool_out[static_cast<std::size_t>(l)] = side;
        channels = c.filters;
    }
    dims.flat = channels * side * side;
    dims.conv4_features = cfg.conv[3].filters * dims.conv_out[3] * dims.conv_out[3];
    return dims;
}

CnnModel init_model(const NetworkConfig& cfg) {
    const LayerDims dims = compute_dims(cfg);
    CnnModel model;
    model.config = cfg;
    DetRng rng(cfg.seed);

    int in_ch = cfg.input_channels;
    for (int l = 0; l < 4; ++l) {
        const ConvSpec& spec = cfg.conv[static_cast<std::size_t>(l)];
        ConvLayer& layer = model.convs[static_cast<std::size_t>(l)];
        layer.in_channels = in_ch;
        layer.out_channels = spec.filters;
        layer.kernel = spec.kernel;
        layer.stride = spec.stride;
        layer.weights.resize(static_cast<std::size_t>(spec.filters) * in_ch *
                             spec.kernel * spec.kernel);
        layer.bias.assign(static_cast<std::size_t>(spec.filters), 0.0);
        const double std_dev =
            1.0 / std::sqrt(static_cast<double>(in_ch) * spec.kernel * spec.kernel);
        for (double& w : layer.weights) w = std_dev * rng.next_normal();
        in_ch = spec.filters;
    }

    int in_size = dims.flat;
    for (int l = 0; l < 3; ++l) {
        FcLayer& layer = model.fcs[static_cast<std::size_t>(l)];
        layer.in_size = in_size;
        layer.out_size = cfg.fc[static_cast<std::size_t>(l)];
        layer.weights.resize(static_cast<std::size_t>(layer.out_size) * in_size);
        layer.bias.assign(static_cast<std::size_t>(layer.out_size), 0.0);
        const double std_dev = 1.0 / std::sqrt(static_cast<double>(in_size));
        for (double& w : layer.weights) w = std_dev * rng.next_normal();
        in_size = layer.out_size;
    }
    return model;
}

Tensor conv_forward(const Tensor& input, const ConvLayer& layer) {
    if (input.c != layer.in_channels) throw std::invalid_argument("conv input channel mismatch");
    if (input.h < layer.kernel || input.w < layer.kernel)
        throw std::invalid_argument("conv input smaller than kernel");

    const int k = layer.kernel, s = layer.stride;
    const int oh = conv_out_dim(input.h, k, s);
    const int ow = conv_out_dim(input.w, k, s);
    Tensor out(layer.out_channels, oh, ow);

#pragma omp parallel for schedule(static)
    for (int o = 0; o < layer.out_channels; ++o) {
        for (int y = 0; y < oh; ++y) {
            for (int x = 0; x < ow; ++x) {
                double acc = layer.bias[static_cast<std::size_t>(o)];
                for (int i = 0; i < layer.in_channels; ++i) {
                    for (int ky = 0; ky < k; ++ky) {
                        const double* in_row = &input.v[(static_cast<std::size_t>(i) * input.h +
                                                         (y * s + ky)) * input.w + x * s];
                        const double* w_row =
                            &layer.weights[((static_cast<std::size_t>(o) * layer.in_channels + i) * k +
                                            ky) * k];
                        for (int kx = 0; kx < k; ++kx) acc += w_row[kx] * in_row[kx];
                    }
                }
                out.at(o, y, x) = acc;
            }
        }
    }
    return out;
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.v) v = std::max(0.0, v);
    return out;
}

std::vector<double> relu(const std::vector<double>& x) {
    std::vector<double> out = x;
    for (double& v : out) v = std::max(0.0, v);
    return out;
}

Tensor max_pool(const Tensor& x, int window, int stride, std::vector<int>* argmax) {
    if (window < 1 || stride < 1) throw std::invalid_argument("pool window/stride must be >= 1");
    if (x.h < window || x.w < window) throw std::invalid_argument("pool input smaller than window");
    const int oh = pool_out_dim(x.h, window, stride);
    const int ow = pool_out_dim(x.w, window, stride);
    Tensor out(x.c, oh, ow);
    if (argmax != nullptr) argmax->assign(out.size(), 0);

#pragma omp parallel for schedule(static)
    for (int c = 0; c < x.c; ++c) {
        for (int y = 0; y < oh; ++y) {
            for (int xo = 0; xo < ow; ++xo) {
                double best = -std::numeric_limits<double>::infinity();
                int best_idx = 0;
                for (int wy = 0; wy < window; ++wy) {
                    for (int wx = 0; wx < window; ++wx) {
                        const int iy = y * stride + wy;
                        const int ix = xo * stride + wx;
                        const int idx = (c * x.h + iy) * x.w + ix;
                        const double v = x.v[static_cast<std::size_t>(idx)];
                        if (v > best) {  // first max wins on ties
                            best = v;
                            best_idx = idx;
                        }
                    }
                }
                const std::size_t out_idx =
                    (static_cast<std::size_t>(c) * oh + y) * ow + xo;
                out.v[out_idx] = best;
                if (argmax != nullptr) (*argmax)[out_idx] = best_idx;
            }
        }
    }
    return out;
}

Tensor lrn(const Tensor& x, const LrnSpec& spec) {
    if (spec.depth < 1 || spec.depth % 2 == 0)
        throw std::invalid_argument("lrn depth must be odd");
    const int half = spec.depth / 2;
    Tensor out(x.c, x.h, x.w);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < x.c; ++c) {
        const int lo = std::max(0, c - half);
        const int hi = std::min(x.c - 1, c + half);
        for (int y = 0; y < x.h; ++y) {
            for (int xo = 0; xo < x.w; ++xo) {
                double sum_sq = 0.0;
                for (int j = lo; j <= hi; ++j) {
                    const double a = x.at(j, y, xo);
                    sum_sq += a * a;
                }
                out.at(c, y, xo) =
                    x.at(c, y, xo) / std::pow(spec.k + spec.alpha * sum_sq, spec.beta);
            }
        }
    }
    return out;
}

std::vector<double> fc_forward(const std::vector<double>& x, const FcLayer& layer) {
    if (static_cast<int>(x.size()) != layer.in_size)
        throw std::invalid_argument("fc input size mismatch");
    std::vector<double> out(static_cast<std::size_t>(layer.out_size));
#pragma omp parallel for schedule(static)
    for (int o = 0; o < layer.out_size; ++o) {
        const double* row = &layer.weights[static_cast<std::size_t>(o) * layer.in_size];
        double acc = layer.bias[static_cast<std::size_t>(o)];
        for (int i = 0; i < layer.in_size; ++i) acc += row[i] * x[static_cast<std::size_t>(i)];
        out[static_cast<std::size_t>(o)] = acc;
    }
    return out;
}

SoftmaxResult softmax_cross_entropy(const std::vector<double>& logits, int label) {
    if (label < 0 || label >= static_cast<int>(logits.size()))
        throw std::invalid_argument("label out of range");
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    SoftmaxResult result;
    result.probs.resize(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        result.probs[i] = std::exp(logits[i] - max_logit);
        sum += result.probs[i];
    }
    for (double& p : result.probs) p /= sum;
    // loss via log-sum-exp, stable for extreme logits
    result.loss = std::log(sum) - (logits[static_cast<std::size_t>(label)] - max_logit);
    return result;
}

Tensor stack_to_tensor(const TextureStack& stack) {
    if (stack.channels.empty()) throw std::invalid_argument("empty texture stack");
    const int h = stack.channels.front().height;
    const int w = stack.channels.front().width;
    Tensor t(stack.segment_count(), h, w);
    for (int c = 0; c < stack.segment_count(); ++c) {
        const TextureImage& img = stack.channels[static_cast<std::size_t>(c)];
        if (img.height != h || img.width != w)
            throw std::invalid_argument("texture stack channel dims mismatch");
        std::copy(img.data.begin(), img.data.end(),
                  t.v.begin() + static_cast<std::ptrdiff_t>(c) * h * w);
    }
    return t;
}

std::vector<double> forward(const CnnModel& model, const Tensor& input,
                            ForwardTrace* trace) {
    if (input.c != model.config.input_channels || input.h != model.config.input_size ||
        input.w != model.config.input_size)
        throw std::invalid_argument("input shape mismatch");

    ForwardTrace local;
    ForwardTrace& tr = trace != nullptr ? *trace : local;
    tr.input = input;

    Tensor x = input;
    for (int l = 0; l < 4; ++l) {
        const std::size_t li = static_cast<std::size_t>(l);
        tr.conv_pre[li] = conv_forward(x, model.convs[li]);
        tr.conv_post[li] = relu(tr.conv_pre[li]);
        tr.norm_out[li] = l < 2 ? lrn(tr.conv_post[li], model.config.lrn) : tr.conv_post[li];
        const PoolSpec& pool = model.config.pool[li];
        tr.pool_out[li] = max_pool(tr.norm_out[li], pool.window, pool.stride, &tr.pool_argmax[li]);
        x = tr.pool_out[li];
    }

    tr.flat = x.v;
    std::vector<double> h = tr.flat;
    for (int l = 0; l < 3; ++l) {
        const std::size_t li = static_cast<std::size_t>(l);
        tr.fc_pre[li] = fc_forward(h, model.fcs[li]);
        tr.fc_post[li] = l < 2 ? relu(tr.fc_pre[li]) : tr.fc_pre[li];
        h = tr.fc_post[li];
    }
    tr.logits = tr.fc_pre[2];
    return tr.logits;
}

Gradients zero_gradients(const CnnModel& model) {
    Gradients g;
    for (int l = 0; l < 4; ++l) {
        const std::size_t li = static_cast<std::size_t>(l);
        g.convs[li] = model.convs[li];
        std::fill(g.convs[li].weights.begin(), g.convs[li].weights.end(), 0.0);
        std::fill(g.convs[li].bias.begin(), g.convs[li].bias.end(), 0.0);
    }
    for (int l = 0; l < 3; ++l) {
        const std::size_t li = static_cast<std::size_t>(l);
        g.fcs[li] = model.fcs[li];
        std::fill(g.fcs[li].weights.begin(), g.fcs[li].weights.end(), 0.0);
        std::fill(g.fcs[li].bias.begin(), g.fcs[li].bias.end(), 0.0);
    }
    return g;
}

void Gradients::add_scaled(const Gradients& other, double scale) {
    for (int l = 0; l < 4; ++l) {
        const std::size_t li = static_cast<std::size_t>(l);
        for (std::size_t i = 0; i < convs[li].weights.size(); ++i)
            convs[li].weights[i] += scale * other.convs[li].weights[i];
        for (std::size_t i = 0; i < convs[li].bias.size(); ++i)
            convs[li].bias[i] += scale * other.convs[li].bias[i];
    }
    for (int l = 0; l < 3; ++l) {
        const std::size_t li = static_cast<std::size_t>(l);
        for (std::size_t i = 0; i < fcs[li].weights.size(); ++i)
            fcs[li].weights[i] += scale * other.fcs[li].weights[i];
        for (std::size_t i = 0; i < fcs[li].bias.size(); ++i)
            fcs[li].bias[i] += scale * other.fcs[li].bias[i];
    }
}

namespace {

// dL/d(input) and parameter gradients of a valid cross-correlation.
void conv_backward(const Tensor& input, const ConvLayer& layer, const Tensor& grad_out,
                   ConvLayer& grad_layer, Tensor& grad_in) {
    const int k = layer.kernel, s = layer.stride;
    grad_in = Tensor(input.c, input.h, input.w, 0.0);

#pragma omp parallel for schedule(static)
    for (int o = 0; o < layer.out_channels; ++o) {
        double bias_acc = 0.0;
        for (int y = 0; y < grad_out.h; ++y) {
            for (int x = 0; x < grad_out.w; ++x) {
                const double g = grad_out.at(o, y, x);
                bias_acc += g;
                for (int i = 0; i < layer.in_channels; ++i) {
                    for (int ky = 0; ky < k; ++ky) {
                        const double* in_row = &input.v[(static_cast<std::size_t>(i) * input.h +
                                                         (y * s + ky)) * input.w + x * s];
                        double* gw_row =
                            &grad_layer.weights[((static_cast<std::size_t>(o) * layer.in_channels + i) * k +
                                                 ky) * k];
                        for (int kx = 0; kx < k; ++kx) gw_row[kx] += g * in_row[kx];
                    }
                }
            }
        }
        grad_layer.bias[static_cast<std::size_t>(o)] = bias_acc;
    }

#pragma omp parallel for schedule(static)
    for (int i = 0; i < layer.in_channels; ++i) {
        for (int o = 0; o < layer.out_channels; ++o) {
            for (int y = 0; y < grad_out.h; ++y) {
                for (int x = 0; x < grad_out.w; ++x) {
                    const double g = grad_out.at(o, y, x);
                    const double* w_base =
                        &layer.weights[(static_cast<std::size_t>(o) * layer.in_channels + i) *
                                       k * k];
                    for (int ky = 0; ky < k; ++ky) {
                        double* gi_row = &grad_in.v[(static_cast<std::size_t>(i) * input.h +
                                                     (y * s + ky)) * input.w + x * s];
                        const double* w_row = w_base + static_cast<std::ptrdiff_t>(ky) * k;
                        for (int kx = 0; kx < k; ++kx) gi_row[kx] += g * w_row[kx];
                    }
                }
            }
        }
    }
}

Tensor relu_backward(const Tensor& pre, const Tensor& grad_out) {
    Tensor grad_in = grad_out;
    for (std::size_t i = 0; i < grad_in.v.size(); ++i) {
        if (pre.v[i] <= 0.0) grad_in.v[i] = 0.0;
    }
    return grad_in;
}

Tensor pool_backward(const Tensor& input, const Tensor& grad_out,
                     const std::vector<int>& argmax) {
    Tensor grad_in(input.c, input.h, input.w, 0.0);
    for (std::size_t i = 0; i < grad_out.v.size(); ++i) {
        grad_in.v[static_cast<std::size_t>(argmax[i])] += grad_out.v[i];
    }
    return grad_in;
}

Tensor lrn_backward(const Tensor& input, const LrnSpec& spec, const Tensor& grad_out) {
    const int half = spec.depth / 2;
    Tensor grad_in(input.c, input.h, input.w, 0.0);
#pragma omp parallel for schedule(static)
    for (int y = 0; y < input.h; ++y) {
        for (int x = 0; x < input.w; ++x) {
            // denominators d_c = k + alpha * sum of squares over the window
            for (int c = 0; c < input.c; ++c) {
                const int lo = std::max(0, c - half);
                const int hi = std::min(input.c - 1, c + half);
                double sum_sq = 0.0;
                for (int j = lo; j <= hi; ++j) {
                    const double a = input.at(j, y, x);
                    sum_sq += a * a;
                }
                const double d = spec.k + spec.alpha * sum_sq;
                const double d_beta = std::pow(d, spec.beta);
                const double g = grad_out.at(c, y, x);
                // direct term
                grad_in.at(c, y, x) += g / d_beta;
                // cross terms: every a_j inside c's window
                const double factor =
                    -2.0 * spec.alpha * spec.beta * input.at(c, y, x) * g / (d_beta * d);
                for (int j = lo; j <= hi; ++j) {
                    grad_in.at(j, y, x) += factor * input.at(j, y, x);
                }
            }
        }
    }
    return grad_in;
}

void fc_backward(const std::vector<double>& input, const FcLayer& layer,
                 const std::vector<double>& grad_out, FcLayer& grad_layer,
                 std::vector<double>& grad_in) {
    grad_in.assign(input.size(), 0.0);
#pragma omp parallel for schedule(static)
    for (int o = 0; o < layer.out_size; ++o) {
        const double g = grad_out[static_cast<std::size_t>(o)];
        grad_layer.bias[static_cast<std::size_t>(o)] = g;
        double* gw_row = &grad_layer.weights[static_cast<std::size_t>(o) * layer.in_size];
        for (int i = 0; i < layer.in_size; ++i) gw_row[i] = g * input[static_cast<std::size_t>(i)];
    }
    for (int o = 0; o < layer.out_size; ++o) {
        const double g = grad_out[static_cast<std::size_t>(o)];
        const double* w_row = &layer.weights[static_cast<std::size_t>(o) * layer.in_size];
        for (int i = 0; i < layer.in_size; ++i) grad_in[static_cast<std::size_t>(i)] += g * w_row[i];
    }
}

std::vector<double> relu_backward(const std::vector<double>& pre,
                                  const std::vector<double>& grad_out) {
    std::vector<double> grad_in = grad_out;
    for (std::size_t i = 0; i < grad_in.size(); ++i) {
        if (pre[i] <= 0.0) grad_in[i] = 0.0;
    }
    return grad_in;
}

}  // namespace

Gradients backward(const CnnModel& model, const TextureStack& input, int label,
                   double* loss_out) {
    const Tensor x = stack_to_tensor(input);
    ForwardTrace tr;
    const std::vector<double> logits = forward(model, x, &tr);
    const SoftmaxResult sm = softmax_cross_entropy(logits, label);
    if (loss_out != nullptr) *loss_out = sm.loss;

    Gradients grads = zero_gradients(model);

    // dL/dlogits = probs - onehot
    std::vector<double> grad_vec = sm.probs;
    grad_vec[static_cast<std::size_t>(label)] -= 1.0;

    for (int l = 2; l >= 0; --l) {
        const std::size_t li = static_cast<std::size_t>(l);
        const std::vector<double>& layer_in = l == 0 ? tr.flat : tr.fc_post[li - 1];
        std::vector<double> grad_in;
        fc_backward(layer_in, model.fcs[li], grad_vec, grads.fcs[li], grad_in);
        if (l > 0) grad_in = relu_backward(tr.fc_pre[li - 1], grad_in);
        grad_vec = std::move(grad_in);
    }

    const Tensor& last_pool = tr.pool_out[3];
    Tensor grad_tensor(last_pool.c, last_pool.h, last_pool.w);
    grad_tensor.v = grad_vec;

    for (int l = 3; l >= 0; --l) {
        const std::size_t li = static_cast<std::size_t>(l);
        grad_tensor = pool_backward(tr.norm_out[li], grad_tensor, tr.pool_argmax[li]);
        if (l < 2) grad_tensor = lrn_backward(tr.conv_post[li], model.config.lrn, grad_tensor);
        grad_tensor = relu_backward(tr.conv_pre[li], grad_tensor);
        const Tensor& layer_in = l == 0 ? tr.input : tr.pool_out[li - 1];
        Tensor grad_in;
        conv_backward(layer_in, model.convs[li], grad_tensor, grads.convs[li], grad_in);
        grad_tensor = std::move(grad_in);
    }
    return grads;
}

namespace {

void apply_update(CnnModel& model, const Gradients& grads, double lr) {
    for (int l = 0; l < 4; ++l) {
        const std::size_t li = static_cast<std::size_t>(l);
        ConvLayer& layer = model.convs[li];
        const ConvLayer& g = grads.convs[li];
        for (std::size_t i = 0; i < layer.weights.size(); ++i) layer.weights[i] -= lr * g.weights[i];
        for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= lr * g.bias[i];
    }
    for (int l = 0; l < 3; ++l) {
        const std::size_t li = static_cast<std::size_t>(l);
        FcLayer& layer = model.fcs[li];
        const FcLayer& g = grads.fcs[li];
        for (std::size_t i = 0; i < layer.weights.size(); ++i) layer.weights[i] -= lr * g.weights[i];
        for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= lr * g.bias[i];
    }
}

}  // namespace

TrainResult train(const std::vector<std::pair<TextureStack, int>>& dataset,
                  const NetworkConfig& cfg) {
    if (dataset.empty()) throw std::invalid_argument("empty dataset");
    for (const auto& [stack, label] : dataset) {
        if (label < 0 || label >= cfg.class_count)
            throw std::invalid_argument("label out of range");
    }

    TrainResult result;
    result.model = init_model(cfg);
    DetRng shuffle_rng(mix_seed(cfg.seed, 0x5u));

    std::vector<int> order(dataset.size());
    std::iota(order.begin(), order.end(), 0);

    const int n = static_cast<int>(dataset.size());
    std::vector<Gradients> example_grads(static_cast<std::size_t>(std::min(n, cfg.batch_size)));
    std::vector<double> example_loss(example_grads.size(), 0.0);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        for (int start = 0; start < n; start += cfg.batch_size) {
            const int batch = std::min(cfg.batch_size, n - start);
            // per-example gradients in parallel, reduced in index order below
#pragma omp parallel for schedule(dynamic)
            for (int b = 0; b < batch; ++b) {
                const auto& [stack, label] =
                    dataset[static_cast<std::size_t>(order[static_cast<std::size_t>(start + b)])];
                example_grads[static_cast<std::size_t>(b)] =
                    backward(result.model, stack, label, &example_loss[static_cast<std::size_t>(b)]);
            }
            Gradients total = zero_gradients(result.model);
            for (int b = 0; b < batch; ++b) {
                total.add_scaled(example_grads[static_cast<std::size_t>(b)], 1.0);
                loss_sum += example_loss[static_cast<std::size_t>(b)];
            }
            apply_update(result.model, total, cfg.learning_rate);
        }
        result.epoch_loss.push_back(loss_sum / n);
    }
    return result;
}

Prediction predict(const CnnModel& model, const TextureStack& input) {
    const Tensor x = stack_to_tensor(input);
    const std::vector<double> logits = forward(model, x, nullptr);
    const SoftmaxResult sm = softmax_cross_entropy(logits, 0);
    Prediction pred;
    pred.probs = sm.probs;
    pred.label = 0;
    for (std::size_t i = 1; i < pred.probs.size(); ++i) {
        if (pred.probs[i] > pred.probs[static_cast<std::size_t>(pred.label)])
            pred.label = static_cast<int>(i);
    }
    return pred;
}

std::vector<double> extract_features(const CnnModel& model, const TextureStack& input) {
    const Tensor x = stack_to_tensor(input);
    ForwardTrace tr;
    forward(model, x, &tr);
    return tr.conv_post[3].v;
}

namespace {

void put_bytes(std::ofstream& out, const void* data, std::size_t size) {
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
}

void put_i32(std::ofstream& out, std::int32_t value) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
    put_bytes(out, b, 4);
}

void put_u64(std::ofstream& out, std::uint64_t value) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xff);
    put_bytes(out, b, 8);
}

void put_f64(std::ofstream& out, double value) {
    std::uint64_t bits;
    std::memcpy(&bits, &value, 8);
    put_u64(out, bits);
}

void get_bytes(std::ifstream& in, void* data, std::size_t size) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
    if (!in) throw std::runtime_error("truncated model file");
}

std::int32_t get_i32(std::ifstream& in) {
    unsigned char b[4];
    get_bytes(in, b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return static_cast<std::int32_t>(v);
}

std::uint64_t get_u64(std::ifstream& in) {
    unsigned char b[8];
    get_bytes(in, b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::ifstream& in) {
    const std::uint64_t bits = get_u64(in);
    double value;
    std::memcpy(&value, &bits, 8);
    return value;
}

constexpr char kModelMagic[4] = {'D', 'T', 'R', 'J'};
constexpr unsigned char kModelVersion = 1;

}  // namespace

void save_model(const CnnModel& model, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    put_bytes(out, kModelMagic, 4);
    put_bytes(out, &kModelVersion, 1);

    const NetworkConfig& cfg = model.config;
    put_i32(out, cfg.input_channels);
    put_i32(out, cfg.input_size);
    for (const ConvSpec& c : cfg.conv) {
        put_i32(out, c.filters);
        put_i32(out, c.kernel);
        put_i32(out, c.stride);
    }
    for (const PoolSpec& p : cfg.pool) {
        put_i32(out, p.window);
        put_i32(out, p.stride);
    }
    put_i32(out, cfg.lrn.depth);
    put_f64(out, cfg.lrn.k);
    put_f64(out, cfg.lrn.alpha);
    put_f64(out, cfg.lrn.beta);
    for (int width : cfg.fc) put_i32(out, width);
    put_i32(out, cfg.class_count);
    put_f64(out, cfg.learning_rate);
    put_i32(out, cfg.epochs);
    put_i32(out, cfg.batch_size);
    put_u64(out, cfg.seed);

    for (const ConvLayer& layer : model.convs) {
        for (double w : layer.weights) put_f64(out, w);
        for (double b : layer.bias) put_f64(out, b);
    }
    for (const FcLayer& layer : model.fcs) {
        for (double w : layer.weights) put_f64(out, w);
        for (double b : layer.bias) put_f64(out, b);
    }
    if (!out) throw std::runtime_error("write failed: " + file.string());
}

CnnModel load_model(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + file.string());
    char magic[4];
    get_bytes(in, magic, 4);
    if (std::memcmp(magic, kModelMagic, 4) != 0)
        throw std::runtime_error("not a model file: " + file.string());
    unsigned char version;
    get_bytes(in, &version, 1);
    if (version != kModelVersion)
        throw std::runtime_error("unsupported model version in " + file.string());

    NetworkConfig cfg;
    cfg.input_channels = get_i32(in);
    cfg.input_size = get_i32(in);
    for (ConvSpec& c : cfg.conv) {
        c.filters = get_i32(in);
        c.kernel = get_i32(in);
        c.stride = get_i32(in);
    }
    for (PoolSpec& p : cfg.pool) {
        p.window = get_i32(in);
        p.stride = get_i32(in);
    }
    cfg.lrn.depth = get_i32(in);
    cfg.lrn.k = get_f64(in);
    cfg.lrn.alpha = get_f64(in);
    cfg.lrn.beta = get_f64(in);
    for (int& width : cfg.fc) width = get_i32(in);
    cfg.class_count = get_i32(in);
    cfg.learning_rate = get_f64(in);
    cfg.epochs = get_i32(in);
    cfg.batch_size = get_i32(in);
    cfg.seed = get_u64(in);

    CnnModel model = init_model(cfg);
    for (ConvLayer& layer : model.convs) {
        for (double& w : layer.weights) w = get_f64(in);
        for (double& b : layer.bias) b = get_f64(in);
    }
    for (FcLayer& layer : model.fcs) {
        for (double& w : layer.weights) w = get_f64(in);
        for (double& b : layer.bias) b = get_f64(in);
    }
    return model;
}

}  // namespace dtraj
