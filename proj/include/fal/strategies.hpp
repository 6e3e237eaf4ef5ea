#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "fal/clustering.hpp"
#include "fal/data.hpp"
#include "fal/errors.hpp"
#include "fal/model.hpp"
#include "fal/rng.hpp"

namespace fal {

enum class Selector { Global, LocalOnly };

enum class Strategy { Random, Entropy, CoreSet, Badge, LoGo, EnsLogit, EnsRank, FineTune };

inline std::string to_string(Selector s) { return s == Selector::Global ? "global" : "local"; }

inline std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Random: return "random";
        case Strategy::Entropy: return "entropy";
        case Strategy::CoreSet: return "coreset";
        case Strategy::Badge: return "badge";
        case Strategy::LoGo: return "logo";
        case Strategy::EnsLogit: return "ens_logit";
        case Strategy::EnsRank: return "ens_rank";
        case Strategy::FineTune: return "finetune";
    }
    return "?";
}

inline Selector selector_from_string(const std::string& s) {
    if (s == "global") return Selector::Global;
    if (s == "local") return Selector::LocalOnly;
    throw std::invalid_argument("unknown selector: " + s);
}

inline Strategy strategy_from_string(const std::string& s) {
    for (Strategy k : {Strategy::Random, Strategy::Entropy, Strategy::CoreSet, Strategy::Badge,
                       Strategy::LoGo, Strategy::EnsLogit, Strategy::EnsRank, Strategy::FineTune})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown strategy: " + s);
}

// Everything one client's query selection may look at. Selectors never read
// labels of the unlabeled pool.
struct QueryContext {
    const Dataset* dataset = nullptr;
    int client = 0;
    std::vector<int> unlabeled;  // dataset indices, ascending
    std::vector<int> labeled;
    const ModelParams* global_model = nullptr;
    const ModelParams* local_model = nullptr;
    int budget = 1;
    uint64_t seed = 0;

    void validate() const {
        require(dataset != nullptr, "query: dataset missing");
        require(budget >= 1, "query: budget must be >= 1");
        require(budget <= static_cast<int>(unlabeled.size()), "query: budget exceeds pool");
    }

    const ModelParams& model(Selector sel) const {
        const ModelParams* m = sel == Selector::Global ? global_model : local_model;
        require(m != nullptr, "query: " + to_string(sel) + " model missing");
        return *m;
    }
};

namespace detail {

// Top-B dataset indices by descending score; ties go to the lower index.
inline std::vector<int> top_by_score(const std::vector<int>& pool, const std::vector<double>& scores,
                                     int budget) {
    std::vector<size_t> order(pool.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return pool[a] < pool[b];
    });
    std::vector<int> out;
    out.reserve(budget);
    for (int i = 0; i < budget; ++i) out.push_back(pool[order[i]]);
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<double> entropy_scores(const QueryContext& ctx, const ModelParams& model) {
    std::vector<double> scores(ctx.unlabeled.size());
    for (size_t i = 0; i < ctx.unlabeled.size(); ++i)
        scores[i] = entropy(forward(model, ctx.dataset->examples[ctx.unlabeled[i]].features).probs);
    return scores;
}

inline std::vector<Point> embed_all(const QueryContext& ctx, const ModelParams& model,
                                    const std::vector<int>& indices) {
    std::vector<Point> out(indices.size());
    for (size_t i = 0; i < indices.size(); ++i)
        out[i] = forward(model, ctx.dataset->examples[indices[i]].features).embedding;
    return out;
}

inline std::vector<Point> full_gradients_all(const QueryContext& ctx, const ModelParams& model) {
    std::vector<Point> out(ctx.unlabeled.size());
    for (size_t i = 0; i < ctx.unlabeled.size(); ++i)
        out[i] = full_gradient_embedding(model, ctx.dataset->examples[ctx.unlabeled[i]].features);
    return out;
}

// k-means++ style seeding over arbitrary feature vectors, tolerant of
// duplicate points; returns selected dataset indices.
inline std::vector<int> seed_select(const QueryContext& ctx, const std::vector<Point>& points) {
    Rng rng(derive_seed(ctx.seed, "badge-seed"));
    std::vector<int> picked = kmeans_pp_indices(points, ctx.budget, rng, /*tolerate_duplicates=*/true);
    std::vector<int> out;
    out.reserve(picked.size());
    for (int p : picked) out.push_back(ctx.unlabeled[p]);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

inline std::vector<int> random_query(const QueryContext& ctx) {
    ctx.validate();
    Rng rng(derive_seed(ctx.seed, "random-query"));
    std::vector<int> picks =
        rng.sample_without_replacement(static_cast<int>(ctx.unlabeled.size()), ctx.budget);
    std::vector<int> out;
    out.reserve(picks.size());
    for (int p : picks) out.push_back(ctx.unlabeled[p]);
    std::sort(out.begin(), out.end());
    return out;
}

// Highest predictive entropy under the selector's model.
inline std::vector<int> entropy_query(const QueryContext& ctx, Selector sel) {
    ctx.validate();
    return detail::top_by_score(ctx.unlabeled, detail::entropy_scores(ctx, ctx.model(sel)),
                                ctx.budget);
}

// k-center greedy on penultimate embeddings: repeatedly take the unlabeled
// point farthest from the labeled set plus the picks so far. With no labeled
// points the first pick is the point farthest from the embedding mean.
inline std::vector<int> coreset_query(const QueryContext& ctx, Selector sel) {
    ctx.validate();
    const ModelParams& model = ctx.model(sel);
    std::vector<Point> pool = detail::embed_all(ctx, model, ctx.unlabeled);
    std::vector<Point> centers = detail::embed_all(ctx, model, ctx.labeled);

    const size_t n = pool.size();
    std::vector<double> min_d2(n, std::numeric_limits<double>::infinity());
    for (const Point& c : centers)
        for (size_t i = 0; i < n; ++i) min_d2[i] = std::min(min_d2[i], squared_distance(pool[i], c));

    if (centers.empty()) {
        Point mean(pool[0].size(), 0.0);
        for (const Point& p : pool)
            for (size_t j = 0; j < mean.size(); ++j) mean[j] += p[j];
        for (double& v : mean) v /= static_cast<double>(n);
        for (size_t i = 0; i < n; ++i) min_d2[i] = squared_distance(pool[i], mean);
    }

    std::vector<char> taken(n, 0);
    std::vector<int> out;
    out.reserve(ctx.budget);
    for (int pick = 0; pick < ctx.budget; ++pick) {
        size_t best = n;
        for (size_t i = 0; i < n; ++i) {
            if (taken[i]) continue;
            if (best == n || min_d2[i] > min_d2[best] ||
                (min_d2[i] == min_d2[best] && ctx.unlabeled[i] < ctx.unlabeled[best]))
                best = i;
        }
        taken[best] = 1;
        out.push_back(ctx.unlabeled[best]);
        for (size_t i = 0; i < n; ++i)
            min_d2[i] = std::min(min_d2[i], squared_distance(pool[i], pool[best]));
    }
    std::sort(out.begin(), out.end());
    return out;
}

// BADGE: k-means++ seeding over the full C*d gradient embeddings.
inline std::vector<int> badge_query(const QueryContext& ctx, Selector sel) {
    ctx.validate();
    return detail::seed_select(ctx, detail::full_gradients_all(ctx, ctx.model(sel)));
}

// Macro step: k-means over the pseudo-label gradient embeddings produced by
// the local-only model. Cluster b of the result indexes into ctx.unlabeled.
inline Clustering logo_macro(const QueryContext& ctx) {
    ctx.validate();
    const ModelParams& local = ctx.model(Selector::LocalOnly);
    std::vector<Point> grads(ctx.unlabeled.size());
    for (size_t i = 0; i < ctx.unlabeled.size(); ++i)
        grads[i] = gradient_embedding(local, ctx.dataset->examples[ctx.unlabeled[i]].features).gradient;
    return lloyd(grads, ctx.budget, derive_seed(ctx.seed, "logo-macro"));
}

// Micro step: within each macro cluster, the single most uncertain instance
// under the global model.
inline std::vector<int> logo_micro(const Clustering& clustering, const QueryContext& ctx) {
    ctx.validate();
    require(clustering.num_clusters() == ctx.budget, "logo: cluster count != budget");
    const ModelParams& global = ctx.model(Selector::Global);
    auto members = clustering.members();
    std::vector<int> out;
    out.reserve(ctx.budget);
    for (const auto& cluster : members) {
        require(!cluster.empty(), "logo: empty cluster");
        int best_idx = -1;
        double best_h = -1.0;
        for (int pos : cluster) {
            int ds_idx = ctx.unlabeled[pos];
            double h = entropy(forward(global, ctx.dataset->examples[ds_idx].features).probs);
            if (h > best_h || (h == best_h && ds_idx < best_idx)) {
                best_h = h;
                best_idx = ds_idx;
            }
        }
        out.push_back(best_idx);
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::vector<int> logo_query(const QueryContext& ctx) {
    return logo_micro(logo_macro(ctx), ctx);
}

// Logit-average ensemble: Entropy runs on softmax of the mean logits, BADGE
// on the mean of the two gradient embeddings.
inline std::vector<int> ens_logit_query(const QueryContext& ctx, Strategy base) {
    ctx.validate();
    const ModelParams& g = ctx.model(Selector::Global);
    const ModelParams& l = ctx.model(Selector::LocalOnly);
    if (base == Strategy::Entropy) {
        std::vector<double> scores(ctx.unlabeled.size());
        for (size_t i = 0; i < ctx.unlabeled.size(); ++i) {
            const auto& x = ctx.dataset->examples[ctx.unlabeled[i]].features;
            std::vector<double> lg = forward(g, x).logits;
            std::vector<double> ll = forward(l, x).logits;
            for (size_t c = 0; c < lg.size(); ++c) lg[c] = 0.5 * (lg[c] + ll[c]);
            scores[i] = entropy(softmax(lg));
        }
        return detail::top_by_score(ctx.unlabeled, scores, ctx.budget);
    }
    require(base == Strategy::Badge, "ens_logit: base must be entropy or badge");
    std::vector<Point> ga = detail::full_gradients_all(ctx, g);
    std::vector<Point> la = detail::full_gradients_all(ctx, l);
    for (size_t i = 0; i < ga.size(); ++i)
        for (size_t j = 0; j < ga[i].size(); ++j) ga[i][j] = 0.5 * (ga[i][j] + la[i][j]);
    return detail::seed_select(ctx, ga);
}

namespace detail {

// Scalar score the rank ensemble sorts by: entropy for Entropy, gradient
// embedding norm for BADGE.
inline std::vector<double> rank_scores(const QueryContext& ctx, const ModelParams& model,
                                       Strategy base) {
    if (base == Strategy::Entropy) return entropy_scores(ctx, model);
    require(base == Strategy::Badge, "ens_rank: base must be entropy or badge");
    std::vector<double> scores(ctx.unlabeled.size());
    for (size_t i = 0; i < ctx.unlabeled.size(); ++i) {
        Point gr = full_gradient_embedding(model, ctx.dataset->examples[ctx.unlabeled[i]].features);
        double norm2 = 0.0;
        for (double v : gr) norm2 += v * v;
        scores[i] = std::sqrt(norm2);
    }
    return scores;
}

// Dense ranks: best score gets rank 1, equal scores share a rank.
inline std::vector<int> dense_ranks(const std::vector<double>& scores) {
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return scores[a] > scores[b]; });
    std::vector<int> ranks(scores.size(), 0);
    int rank = 0;
    for (size_t i = 0; i < order.size(); ++i) {
        if (i == 0 || scores[order[i]] != scores[order[i - 1]]) rank++;
        ranks[order[i]] = rank;
    }
    return ranks;
}

}  // namespace detail

// Rank-sum ensemble: each model ranks the pool by the base strategy's score;
// the B lowest combined ranks win, ties to the lower index.
inline std::vector<int> ens_rank_query(const QueryContext& ctx, Strategy base) {
    ctx.validate();
    std::vector<int> rg = detail::dense_ranks(detail::rank_scores(ctx, ctx.model(Selector::Global), base));
    std::vector<int> rl =
        detail::dense_ranks(detail::rank_scores(ctx, ctx.model(Selector::LocalOnly), base));
    std::vector<double> combined(rg.size());
    for (size_t i = 0; i < rg.size(); ++i) combined[i] = -static_cast<double>(rg[i] + rl[i]);
    return detail::top_by_score(ctx.unlabeled, combined, ctx.budget);
}

// Fine-tune the global model on the client's labeled set, then run the base
// strategy with the tuned model as a single-model selector.
inline std::vector<int> fine_tune_query(const QueryContext& ctx, Strategy base, int ft_epochs,
                                        const TrainConfig& train) {
    ctx.validate();
    require(!ctx.labeled.empty(), "finetune: empty labeled set");
    const ModelParams& global = ctx.model(Selector::Global);
    ModelParams tuned = global;
    if (ft_epochs > 0 && train.learning_rate > 0.0) {
        TrainConfig cfg = train;
        cfg.epochs = ft_epochs;
        cfg.lr_decay = 1.0;
        cfg.early_stop_train_acc.reset();
        cfg.seed = derive_seed(ctx.seed, "finetune");
        tuned = sgd_train(global, *ctx.dataset, ctx.labeled, cfg);
    }
    QueryContext sub = ctx;
    sub.global_model = &tuned;
    sub.local_model = nullptr;
    switch (base) {
        case Strategy::Entropy: return entropy_query(sub, Selector::Global);
        case Strategy::Badge: return badge_query(sub, Selector::Global);
        case Strategy::CoreSet: return coreset_query(sub, Selector::Global);
        case Strategy::Random: return random_query(sub);
        default: throw std::invalid_argument("finetune: unsupported base strategy");
    }
}

struct StrategyOptions {
    Strategy ens_base = Strategy::Entropy;  // base for ens_logit / ens_rank / finetune
    int ft_epochs = 5;
    TrainConfig ft_train;
};

inline bool strategy_needs_local_model(Strategy s, Selector sel) {
    switch (s) {
        case Strategy::Random:
        case Strategy::FineTune: return false;
        case Strategy::LoGo:
        case Strategy::EnsLogit:
        case Strategy::EnsRank: return true;
        default: return sel == Selector::LocalOnly;
    }
}

inline std::vector<int> select_queries(Strategy s, const QueryContext& ctx, Selector sel,
                                       const StrategyOptions& opts = {}) {
    std::vector<int> picks;
    switch (s) {
        case Strategy::Random: picks = random_query(ctx); break;
        case Strategy::Entropy: picks = entropy_query(ctx, sel); break;
        case Strategy::CoreSet: picks = coreset_query(ctx, sel); break;
        case Strategy::Badge: picks = badge_query(ctx, sel); break;
        case Strategy::LoGo: picks = logo_query(ctx); break;
        case Strategy::EnsLogit: picks = ens_logit_query(ctx, opts.ens_base); break;
        case Strategy::EnsRank: picks = ens_rank_query(ctx, opts.ens_base); break;
        case Strategy::FineTune:
            picks = fine_tune_query(ctx, opts.ens_base, opts.ft_epochs, opts.ft_train);
            break;
        default: throw std::invalid_argument("unknown strategy");
    }
    // Contract checked on every call: exactly B distinct pool indices.
    require(static_cast<int>(picks.size()) == ctx.budget, "strategy returned wrong count");
    require(std::adjacent_find(picks.begin(), picks.end()) == picks.end(),
            "strategy returned duplicates");
    for (int idx : picks)
        require(std::binary_search(ctx.unlabeled.begin(), ctx.unlabeled.end(), idx),
                "strategy picked outside the pool");
    return picks;
}

}  // namespace fal
