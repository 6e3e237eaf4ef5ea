#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fal/data.hpp"
#include "fal/errors.hpp"
#include "fal/model.hpp"
#include "fal/rng.hpp"

namespace fal {

enum class InitMode { Random, Continue };

struct FedConfig {
    int fl_rounds = 30;
    int local_epochs = 5;
    TrainConfig train;  // train.lr_decay is ignored here; decay happens per FL round
    InitMode init_mode = InitMode::Random;

    void validate() const {
        require(fl_rounds >= 1, "fed: fl_rounds must be >= 1");
        require(local_epochs >= 1, "fed: local_epochs must be >= 1");
        train.validate();
    }
};

// Per-client labeled pool D_k and unlabeled pool U_k. Selectors only ever see
// features of U_k; labels are revealed by moving indices into D_k.
struct LabelState {
    std::vector<std::vector<int>> labeled;
    std::vector<std::vector<int>> unlabeled;

    int num_clients() const { return static_cast<int>(labeled.size()); }

    // Moves the queried indices from U_k to D_k.
    void reveal(int client, const std::vector<int>& indices) {
        require(client >= 0 && client < num_clients(), "reveal: bad client");
        auto& u = unlabeled[client];
        auto& d = labeled[client];
        for (int idx : indices) {
            auto it = std::find(u.begin(), u.end(), idx);
            require(it != u.end(), "reveal: index not in unlabeled pool");
            u.erase(it);
            d.push_back(idx);
        }
        std::sort(d.begin(), d.end());
    }

    // Disjointness and conservation against the originating split.
    void validate(const ClientSplit& origin) const {
        require(num_clients() == origin.num_clients(), "label state: client count mismatch");
        for (int k = 0; k < num_clients(); ++k) {
            std::vector<int> combined = labeled[k];
            combined.insert(combined.end(), unlabeled[k].begin(), unlabeled[k].end());
            std::sort(combined.begin(), combined.end());
            require(std::adjacent_find(combined.begin(), combined.end()) == combined.end(),
                    "label state: labeled and unlabeled overlap");
            std::vector<int> expected = origin.client_indices[k];
            std::sort(expected.begin(), expected.end());
            require(combined == expected, "label state: pool does not match the client split");
        }
    }
};

// Round 1: each client labels a uniform random sample of size budget.
inline LabelState make_initial_labels(const ClientSplit& split, int budget, uint64_t seed) {
    require(budget >= 1, "initial labels: budget must be >= 1");
    LabelState state;
    const int K = split.num_clients();
    state.labeled.resize(K);
    state.unlabeled.resize(K);
    for (int k = 0; k < K; ++k) {
        const auto& pool = split.client_indices[k];
        require(budget <= static_cast<int>(pool.size()), "initial labels: budget exceeds pool");
        Rng rng(derive_seed(seed, "initial", static_cast<uint64_t>(k)));
        std::vector<int> picks = rng.sample_without_replacement(static_cast<int>(pool.size()), budget);
        std::vector<char> is_picked(pool.size(), 0);
        for (int p : picks) is_picked[p] = 1;
        for (size_t i = 0; i < pool.size(); ++i)
            (is_picked[i] ? state.labeled[k] : state.unlabeled[k]).push_back(pool[i]);
    }
    return state;
}

struct TrainLogRow {
    int fl_round = 0;
    int client = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
};

namespace detail {

inline void accumulate_scaled(ModelParams& acc, const ModelParams& src, double weight) {
    for (size_t l = 0; l < acc.layers.size(); ++l) {
        for (size_t i = 0; i < acc.layers[l].weights.size(); ++i)
            acc.layers[l].weights[i] += weight * src.layers[l].weights[i];
        for (size_t i = 0; i < acc.layers[l].biases.size(); ++i)
            acc.layers[l].biases[i] += weight * src.layers[l].biases[i];
    }
}

inline void zero_params(ModelParams& p) {
    for (auto& layer : p.layers) {
        std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
        std::fill(layer.biases.begin(), layer.biases.end(), 0.0);
    }
}

}  // namespace detail

// FedAvg: per FL round, broadcast the global parameters, run local_epochs of
// SGD on every client's labeled set, then aggregate size-weighted. The
// learning rate decays x0.1 past 1/2 and 3/4 of the FL rounds. Client updates
// are independent; aggregation runs in fixed client order, so results do not
// depend on scheduling. on_round, when set, sees the aggregated parameters
// after every FL round (checkpointing, tail-round accuracy averaging).
inline ModelParams fedavg(const ModelParams& init, const Dataset& data, const LabelState& state,
                          const FedConfig& config, std::vector<TrainLogRow>* log = nullptr,
                          const std::function<void(int, const ModelParams&)>& on_round = {}) {
    config.validate();
    const int K = state.num_clients();
    require(K >= 1, "fedavg: no clients");
    size_t total = 0;
    for (int k = 0; k < K; ++k) {
        require(!state.labeled[k].empty(), "fedavg: client " + std::to_string(k) + " has no labels");
        total += state.labeled[k].size();
    }

    ModelParams global = init;
    const int half = config.fl_rounds / 2;
    const int three_quarters = (3 * config.fl_rounds) / 4;
    for (int round = 1; round <= config.fl_rounds; ++round) {
        double lr = config.train.learning_rate;
        if (half >= 1 && round > half) lr *= 0.1;
        if (three_quarters >= 1 && round > three_quarters) lr *= 0.1;

        ModelParams aggregate = global;
        detail::zero_params(aggregate);
        double weight_sum = 0.0;
        for (int k = 0; k < K; ++k) {
            TrainConfig local = config.train;
            local.learning_rate = lr;
            local.lr_decay = 1.0;
            local.epochs = config.local_epochs;
            local.early_stop_train_acc.reset();
            local.seed = derive_seed(config.train.seed, "fed", static_cast<uint64_t>(round),
                                     static_cast<uint64_t>(k));
            ModelParams updated = sgd_train(global, data, state.labeled[k], local);
            double weight = static_cast<double>(state.labeled[k].size()) / static_cast<double>(total);
            weight_sum += weight;
            detail::accumulate_scaled(aggregate, updated, weight);
            if (log) {
                TrainLogRow row;
                row.fl_round = round;
                row.client = k;
                row.train_loss = mean_loss(updated, data, state.labeled[k]);
                row.train_acc = evaluate(updated, data, state.labeled[k]);
                log->push_back(row);
            }
        }
        require(std::abs(weight_sum - 1.0) <= 1e-12, "fedavg: aggregation weights do not sum to 1");
        global = std::move(aggregate);
        if (on_round) on_round(round, global);
    }
    return global;
}

// Local-only model: fresh random init, up to config.epochs of SGD on D_k with
// early stopping at the train-accuracy threshold. The caller provides a seed
// stream unique to (AL round, client).
inline ModelParams train_local_only(const Dataset& data, const LabelState& state, int client,
                                    const Architecture& arch, const TrainConfig& config) {
    require(client >= 0 && client < state.num_clients(), "local-only: bad client");
    require(!state.labeled[client].empty(), "local-only: client has no labels");
    ModelParams params = init_params(arch, derive_seed(config.seed, "local-init"));
    return sgd_train(params, data, state.labeled[client], config);
}

}  // namespace fal
