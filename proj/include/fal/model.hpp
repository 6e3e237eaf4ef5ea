#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "fal/data.hpp"
#include "fal/errors.hpp"
#include "fal/rng.hpp"

#include "json.hpp"

namespace fal {

constexpr double kProbFloor = 1e-12;

struct Architecture {
    int input_dim = 8;
    std::vector<int> hidden = {64, 64};  // empty = linear model, embedding = raw features
    int num_classes = 5;

    // Embedding dimension d feeding the final layer.
    int embedding_dim() const { return hidden.empty() ? input_dim : hidden.back(); }

    std::vector<int> layer_sizes() const {
        std::vector<int> sizes = {input_dim};
        sizes.insert(sizes.end(), hidden.begin(), hidden.end());
        sizes.push_back(num_classes);
        return sizes;
    }

    void validate() const {
        require(input_dim >= 1, "arch: input_dim must be >= 1");
        require(num_classes >= 2, "arch: need at least 2 classes");
        for (int h : hidden) require(h >= 1, "arch: hidden sizes must be >= 1");
    }
};

struct Layer {
    std::vector<double> weights;  // out x in, row-major
    std::vector<double> biases;   // out
};

struct ModelParams {
    Architecture arch;
    std::vector<Layer> layers;  // hidden layers then the final linear layer

    const Layer& final_layer() const { return layers.back(); }
    Layer& final_layer() { return layers.back(); }
};

struct TrainConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    int epochs = 5;
    int batch_size = 64;
    // Multiplier applied at 1/2 and 3/4 of the epochs; 1.0 disables the decay.
    // Federated training disables it here and decays across FL rounds instead.
    double lr_decay = 0.1;
    std::optional<double> early_stop_train_acc;
    uint64_t seed = 0;

    void validate() const {
        require(learning_rate >= 0.0, "train: learning_rate must be >= 0");
        require(momentum >= 0.0 && momentum < 1.0, "train: momentum must be in [0,1)");
        require(epochs >= 1, "train: epochs must be >= 1");
        require(batch_size >= 1, "train: batch_size must be >= 1");
    }
};

struct Prediction {
    std::vector<double> logits;
    std::vector<double> probs;
    std::vector<double> embedding;  // penultimate activation z
};

inline ModelParams init_params(const Architecture& arch, uint64_t seed) {
    arch.validate();
    ModelParams params;
    params.arch = arch;
    auto sizes = arch.layer_sizes();
    Rng rng(derive_seed(seed, "init"));
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
        Layer layer;
        int fan_in = sizes[l], fan_out = sizes[l + 1];
        double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        layer.weights.resize(static_cast<size_t>(fan_out) * fan_in);
        for (double& w : layer.weights) w = rng.uniform_real(-bound, bound);
        layer.biases.assign(fan_out, 0.0);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

namespace detail {

inline void affine(const Layer& layer, const std::vector<double>& in, std::vector<double>& out) {
    size_t fan_in = in.size();
    size_t fan_out = layer.biases.size();
    out.assign(fan_out, 0.0);
    for (size_t o = 0; o < fan_out; ++o) {
        double acc = layer.biases[o];
        const double* w = layer.weights.data() + o * fan_in;
        for (size_t i = 0; i < fan_in; ++i) acc += w[i] * in[i];
        out[o] = acc;
    }
}

}  // namespace detail

inline std::vector<double> softmax(const std::vector<double>& logits) {
    double max_logit = *std::max_element(logits.begin(), logits.end());
    std::vector<double> probs(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        probs[i] = std::exp(logits[i] - max_logit);
        sum += probs[i];
    }
    for (double& p : probs) p /= sum;
    return probs;
}

inline Prediction forward(const ModelParams& params, const std::vector<double>& features) {
    if (static_cast<int>(features.size()) != params.arch.input_dim)
        throw ShapeMismatchError("forward: feature dim " + std::to_string(features.size()) +
                                 " != " + std::to_string(params.arch.input_dim));
    Prediction pred;
    std::vector<double> act = features;
    std::vector<double> next;
    for (size_t l = 0; l + 1 < params.layers.size(); ++l) {
        detail::affine(params.layers[l], act, next);
        for (double& v : next) v = std::max(v, 0.0);
        act.swap(next);
    }
    pred.embedding = act;
    detail::affine(params.layers.back(), act, pred.logits);
    pred.probs = softmax(pred.logits);
    return pred;
}

// Shannon entropy in nats; 0*ln(0) taken as 0, probabilities floored at 1e-12
// inside the log.
inline double entropy(const std::vector<double>& probs) {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(std::max(p, kProbFloor));
    return std::max(h, 0.0);
}

inline int argmax_class(const std::vector<double>& values) {
    int best = 0;
    for (int c = 1; c < static_cast<int>(values.size()); ++c)
        if (values[c] > values[best]) best = c;  // ties keep the lowest index
    return best;
}

struct GradientEmbedding {
    int pseudo_label = 0;
    std::vector<double> gradient;  // length d
};

// Gradient of the negative cross-entropy loss under the model's own pseudo
// label, restricted to the pseudo label's row of the final layer:
// g = z * (1 - p_yhat).
inline GradientEmbedding gradient_embedding(const ModelParams& params,
                                            const std::vector<double>& features) {
    Prediction pred = forward(params, features);
    GradientEmbedding out;
    out.pseudo_label = argmax_class(pred.probs);
    double scale = 1.0 - pred.probs[out.pseudo_label];
    out.gradient.resize(pred.embedding.size());
    for (size_t i = 0; i < pred.embedding.size(); ++i) out.gradient[i] = pred.embedding[i] * scale;
    return out;
}

// All C rows concatenated: row c equals z * (1[yhat = c] - p_c). Length C*d.
inline std::vector<double> full_gradient_embedding(const ModelParams& params,
                                                   const std::vector<double>& features) {
    Prediction pred = forward(params, features);
    int yhat = argmax_class(pred.probs);
    size_t d = pred.embedding.size();
    std::vector<double> out(static_cast<size_t>(params.arch.num_classes) * d);
    for (int c = 0; c < params.arch.num_classes; ++c) {
        double scale = (c == yhat ? 1.0 : 0.0) - pred.probs[c];
        for (size_t i = 0; i < d; ++i) out[c * d + i] = pred.embedding[i] * scale;
    }
    return out;
}

struct Gradients {
    std::vector<Layer> layers;  // same shapes as the parameters

    static Gradients zeros_like(const ModelParams& params) {
        Gradients g;
        for (const auto& layer : params.layers) {
            Layer zero;
            zero.weights.assign(layer.weights.size(), 0.0);
            zero.biases.assign(layer.biases.size(), 0.0);
            g.layers.push_back(std::move(zero));
        }
        return g;
    }
};

// Mean cross-entropy over the batch and its gradient for every parameter
// tensor, by explicit backpropagation through the ReLU stack.
inline std::pair<double, Gradients> backward(const ModelParams& params, const Dataset& data,
                                             const std::vector<int>& batch) {
    require(!batch.empty(), "backward: empty batch");
    Gradients grads = Gradients::zeros_like(params);
    const size_t L = params.layers.size();
    double loss = 0.0;
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    std::vector<std::vector<double>> acts(L + 1);
    for (int idx : batch) {
        const Example& ex = data.examples[idx];
        acts[0] = ex.features;
        for (size_t l = 0; l + 1 < L; ++l) {
            detail::affine(params.layers[l], acts[l], acts[l + 1]);
            for (double& v : acts[l + 1]) v = std::max(v, 0.0);
        }
        std::vector<double> logits;
        detail::affine(params.layers[L - 1], acts[L - 1], logits);
        std::vector<double> probs = softmax(logits);
        loss -= std::log(std::max(probs[ex.label], kProbFloor)) * inv_n;

        // delta at the logits: (p - onehot(y)) / n
        std::vector<double> delta(probs.size());
        for (size_t c = 0; c < probs.size(); ++c)
            delta[c] = (probs[c] - (static_cast<int>(c) == ex.label ? 1.0 : 0.0)) * inv_n;

        for (size_t l = L; l-- > 0;) {
            const std::vector<double>& input = acts[l];
            Layer& g = grads.layers[l];
            const Layer& p = params.layers[l];
            size_t fan_in = input.size(), fan_out = delta.size();
            for (size_t o = 0; o < fan_out; ++o) {
                g.biases[o] += delta[o];
                double* gw = g.weights.data() + o * fan_in;
                for (size_t i = 0; i < fan_in; ++i) gw[i] += delta[o] * input[i];
            }
            if (l == 0) break;
            std::vector<double> prev_delta(fan_in, 0.0);
            for (size_t i = 0; i < fan_in; ++i) {
                if (input[i] <= 0.0) continue;  // ReLU gate
                double acc = 0.0;
                for (size_t o = 0; o < fan_out; ++o) acc += p.weights[o * fan_in + i] * delta[o];
                prev_delta[i] = acc;
            }
            delta.swap(prev_delta);
        }
    }
    return {loss, grads};
}

inline double evaluate(const ModelParams& params, const Dataset& data,
                       const std::vector<int>& indices) {
    require(!indices.empty(), "evaluate: empty index set");
    int correct = 0;
    for (int idx : indices) {
        Prediction pred = forward(params, data.examples[idx].features);
        if (argmax_class(pred.logits) == data.examples[idx].label) correct++;
    }
    return static_cast<double>(correct) / static_cast<double>(indices.size());
}

inline double evaluate(const ModelParams& params, const Dataset& data) {
    std::vector<int> all(data.size());
    std::iota(all.begin(), all.end(), 0);
    return evaluate(params, data, all);
}

inline double mean_loss(const ModelParams& params, const Dataset& data,
                        const std::vector<int>& indices) {
    require(!indices.empty(), "mean_loss: empty index set");
    double loss = 0.0;
    for (int idx : indices) {
        Prediction pred = forward(params, data.examples[idx].features);
        loss -= std::log(std::max(pred.probs[data.examples[idx].label], kProbFloor));
    }
    return loss / static_cast<double>(indices.size());
}

// Mini-batch SGD with momentum over a seeded shuffle. Returns new parameters;
// the input is untouched.
inline ModelParams sgd_train(const ModelParams& params, const Dataset& data,
                             const std::vector<int>& labeled, const TrainConfig& config) {
    require(!labeled.empty(), "sgd_train: empty labeled set");
    config.validate();

    ModelParams out = params;
    Gradients velocity = Gradients::zeros_like(params);
    std::vector<int> order = labeled;
    double lr = config.learning_rate;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        if (config.lr_decay != 1.0 && epoch > 0) {
            if (epoch == config.epochs / 2) lr *= config.lr_decay;
            if (epoch == (3 * config.epochs) / 4) lr *= config.lr_decay;
        }
        Rng rng(derive_seed(config.seed, "shuffle", static_cast<uint64_t>(epoch)));
        rng.shuffle(order);
        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            size_t end = std::min(order.size(), start + config.batch_size);
            std::vector<int> batch(order.begin() + start, order.begin() + end);
            auto [loss, grads] = backward(out, data, batch);
            (void)loss;
            for (size_t l = 0; l < out.layers.size(); ++l) {
                auto& v = velocity.layers[l];
                auto& g = grads.layers[l];
                auto& p = out.layers[l];
                for (size_t i = 0; i < p.weights.size(); ++i) {
                    v.weights[i] = config.momentum * v.weights[i] + g.weights[i];
                    p.weights[i] -= lr * v.weights[i];
                }
                for (size_t i = 0; i < p.biases.size(); ++i) {
                    v.biases[i] = config.momentum * v.biases[i] + g.biases[i];
                    p.biases[i] -= lr * v.biases[i];
                }
            }
        }
        if (config.early_stop_train_acc &&
            evaluate(out, data, labeled) >= *config.early_stop_train_acc)
            break;
    }
    return out;
}

inline nlohmann::ordered_json model_to_json(const ModelParams& params) {
    nlohmann::ordered_json j;
    j["arch"] = {{"input_dim", params.arch.input_dim},
                 {"hidden", params.arch.hidden},
                 {"num_classes", params.arch.num_classes}};
    j["layers"] = nlohmann::ordered_json::array();
    for (const auto& layer : params.layers)
        j["layers"].push_back({{"weights", layer.weights}, {"biases", layer.biases}});
    return j;
}

inline ModelParams model_from_json(const nlohmann::json& j) {
    ModelParams params;
    params.arch.input_dim = j.at("arch").at("input_dim").get<int>();
    params.arch.hidden = j.at("arch").at("hidden").get<std::vector<int>>();
    params.arch.num_classes = j.at("arch").at("num_classes").get<int>();
    for (const auto& lj : j.at("layers")) {
        Layer layer;
        layer.weights = lj.at("weights").get<std::vector<double>>();
        layer.biases = lj.at("biases").get<std::vector<double>>();
        params.layers.push_back(std::move(layer));
    }
    auto sizes = params.arch.layer_sizes();
    require(params.layers.size() + 1 == sizes.size(), "checkpoint: layer count mismatch");
    for (size_t l = 0; l < params.layers.size(); ++l) {
        require(params.layers[l].weights.size() ==
                    static_cast<size_t>(sizes[l]) * static_cast<size_t>(sizes[l + 1]),
                "checkpoint: weight shape mismatch");
        require(params.layers[l].biases.size() == static_cast<size_t>(sizes[l + 1]),
                "checkpoint: bias shape mismatch");
    }
    return params;
}

inline void save_model(const ModelParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << model_to_json(params).dump(2) << "\n";
}

inline ModelParams load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return model_from_json(j);
}

}  // namespace fal
