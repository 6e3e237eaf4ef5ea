#pragma once

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fal/data.hpp"
#include "fal/errors.hpp"
#include "fal/federation.hpp"
#include "fal/metrics.hpp"
#include "fal/model.hpp"
#include "fal/rng.hpp"
#include "fal/strategies.hpp"

#include "json.hpp"

namespace fal {

using json = nlohmann::ordered_json;

struct DataSpec {
    enum class Kind { Synthetic, SyntheticMix, Idx, Csv };
    Kind kind = Kind::Synthetic;
    // synthetic
    int classes = 5;
    int per_class = 400;
    int dim = 8;
    double separation = 3.0;
    int test_per_class = 100;
    int modes_per_class = 3;  // synthetic_mix only
    // idx
    std::string train_images, train_labels, test_images, test_labels;
    // csv
    std::string train_csv, test_csv;
    // imbalance profile: seeded permutation of which class becomes a minority
    bool permute_imbalance = false;
};

struct ALConfig {
    Strategy strategy = Strategy::Random;
    Selector selector = Selector::Global;
    Strategy ens_base = Strategy::Entropy;
    int ft_epochs = 5;
    int rounds = 5;  // R
    double budget_fraction = 0.05;
    int budget_count = 0;  // > 0 overrides the fraction
};

struct ExperimentConfig {
    std::string name = "exp";
    DataSpec data;
    PartitionConfig partition;
    FedConfig fed;
    TrainConfig local_train;  // local-only models: 50 epochs, early stop at 99%
    ALConfig al;
    std::vector<int> arch_hidden = {64, 64};
    std::vector<uint64_t> seeds = {0, 1, 2, 3};
    std::string output_dir = "out";
    double emd_factor = 0.5;
    bool save_checkpoints = false;
    bool log_training = false;
    // 1 reports the final FL round's test accuracy; larger values average the
    // last N rounds.
    int eval_last_fl_rounds = 1;

    ExperimentConfig() {
        local_train.epochs = 50;
        local_train.early_stop_train_acc = 0.99;
    }

    void validate() const {
        partition.validate();
        fed.validate();
        local_train.validate();
        require(al.rounds >= 1, "config: al.rounds must be >= 1");
        require(al.budget_count > 0 || al.budget_fraction > 0.0,
                "config: budget must be positive");
        require(!seeds.empty(), "config: need at least one seed");
    }
};

// Strategy label used in CSV rows and penalty matrices. The selector suffix
// appears only for single-model strategies; ensembles and logo always use
// both models, finetune always starts from the global one.
inline std::string strategy_label(const ALConfig& al) {
    std::string s = to_string(al.strategy);
    if (al.strategy == Strategy::EnsLogit || al.strategy == Strategy::EnsRank ||
        al.strategy == Strategy::FineTune)
        s += "+" + to_string(al.ens_base);
    if (al.strategy == Strategy::Entropy || al.strategy == Strategy::CoreSet ||
        al.strategy == Strategy::Badge)
        s += ":" + to_string(al.selector);
    return s;
}

struct RoundRecord {
    int al_round = 0;
    double test_acc = 0.0;
    double local_emd = 0.0;
    double global_emd = 0.0;
    int labeled_per_client = 0;
    std::vector<std::vector<int>> queries;  // per client, this round's reveals
};

struct SeedRun {
    uint64_t seed = 0;
    bool failed = false;
    std::string error;
    std::vector<RoundRecord> rounds;
    std::vector<TrainLogRow> train_log;  // flattened, row.fl_round spans AL rounds
    std::vector<int> train_log_al_round;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::string config_hash;
    int budget_per_round = 0;
    int pool_per_client = 0;
    std::vector<SeedRun> runs;
};

// ---------------------------------------------------------------------------
// config <-> json

inline json config_to_json(const ExperimentConfig& c) {
    json j;
    j["name"] = c.name;
    json d;
    d["kind"] = c.data.kind == DataSpec::Kind::Synthetic      ? "synthetic"
                : c.data.kind == DataSpec::Kind::SyntheticMix ? "synthetic_mix"
                : c.data.kind == DataSpec::Kind::Idx          ? "idx"
                                                              : "csv";
    d["classes"] = c.data.classes;
    d["per_class"] = c.data.per_class;
    d["dim"] = c.data.dim;
    d["separation"] = c.data.separation;
    d["test_per_class"] = c.data.test_per_class;
    d["modes_per_class"] = c.data.modes_per_class;
    d["train_images"] = c.data.train_images;
    d["train_labels"] = c.data.train_labels;
    d["test_images"] = c.data.test_images;
    d["test_labels"] = c.data.test_labels;
    d["train_csv"] = c.data.train_csv;
    d["test_csv"] = c.data.test_csv;
    d["permute_imbalance"] = c.data.permute_imbalance;
    j["data"] = d;
    json p;
    p["clients"] = c.partition.num_clients;
    if (c.partition.alpha_is_inf())
        p["alpha"] = "inf";
    else
        p["alpha"] = c.partition.alpha;
    p["rho"] = c.partition.rho;
    j["partition"] = p;
    json f;
    f["fl_rounds"] = c.fed.fl_rounds;
    f["local_epochs"] = c.fed.local_epochs;
    f["init_mode"] = c.fed.init_mode == InitMode::Random ? "random" : "continue";
    j["federation"] = f;
    json t;
    t["learning_rate"] = c.fed.train.learning_rate;
    t["momentum"] = c.fed.train.momentum;
    t["batch_size"] = c.fed.train.batch_size;
    j["train"] = t;
    json lt;
    lt["epochs"] = c.local_train.epochs;
    lt["early_stop_train_acc"] =
        c.local_train.early_stop_train_acc ? json(*c.local_train.early_stop_train_acc) : json();
    j["local_train"] = lt;
    json a;
    a["strategy"] = to_string(c.al.strategy);
    a["selector"] = to_string(c.al.selector);
    a["base"] = to_string(c.al.ens_base);
    a["ft_epochs"] = c.al.ft_epochs;
    a["rounds"] = c.al.rounds;
    a["budget_fraction"] = c.al.budget_fraction;
    a["budget_count"] = c.al.budget_count;
    j["al"] = a;
    j["arch_hidden"] = c.arch_hidden;
    j["seeds"] = c.seeds;
    j["output_dir"] = c.output_dir;
    j["emd_factor"] = c.emd_factor;
    j["save_checkpoints"] = c.save_checkpoints;
    j["log_training"] = c.log_training;
    j["eval_last_fl_rounds"] = c.eval_last_fl_rounds;
    return j;
}

inline double alpha_from_json(const json& j) {
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        if (s == "inf" || s == "infinity" || s == "Inf") return std::numeric_limits<double>::infinity();
        throw std::invalid_argument("config: alpha must be a number or \"inf\"");
    }
    return j.get<double>();
}

// Fields absent from the document keep their defaults.
inline ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    if (j.contains("name")) c.name = j["name"].get<std::string>();
    if (j.contains("data")) {
        const json& d = j["data"];
        if (d.contains("kind")) {
            std::string k = d["kind"].get<std::string>();
            if (k == "synthetic")
                c.data.kind = DataSpec::Kind::Synthetic;
            else if (k == "synthetic_mix")
                c.data.kind = DataSpec::Kind::SyntheticMix;
            else if (k == "idx")
                c.data.kind = DataSpec::Kind::Idx;
            else if (k == "csv")
                c.data.kind = DataSpec::Kind::Csv;
            else
                throw std::invalid_argument("config: unknown data.kind " + k);
        }
        if (d.contains("modes_per_class")) c.data.modes_per_class = d["modes_per_class"].get<int>();
        if (d.contains("classes")) c.data.classes = d["classes"].get<int>();
        if (d.contains("per_class")) c.data.per_class = d["per_class"].get<int>();
        if (d.contains("dim")) c.data.dim = d["dim"].get<int>();
        if (d.contains("separation")) c.data.separation = d["separation"].get<double>();
        if (d.contains("test_per_class")) c.data.test_per_class = d["test_per_class"].get<int>();
        if (d.contains("train_images")) c.data.train_images = d["train_images"].get<std::string>();
        if (d.contains("train_labels")) c.data.train_labels = d["train_labels"].get<std::string>();
        if (d.contains("test_images")) c.data.test_images = d["test_images"].get<std::string>();
        if (d.contains("test_labels")) c.data.test_labels = d["test_labels"].get<std::string>();
        if (d.contains("train_csv")) c.data.train_csv = d["train_csv"].get<std::string>();
        if (d.contains("test_csv")) c.data.test_csv = d["test_csv"].get<std::string>();
        if (d.contains("permute_imbalance"))
            c.data.permute_imbalance = d["permute_imbalance"].get<bool>();
    }
    if (j.contains("partition")) {
        const json& p = j["partition"];
        if (p.contains("clients")) c.partition.num_clients = p["clients"].get<int>();
        if (p.contains("alpha")) c.partition.alpha = alpha_from_json(p["alpha"]);
        if (p.contains("rho")) c.partition.rho = p["rho"].get<double>();
    }
    if (j.contains("federation")) {
        const json& f = j["federation"];
        if (f.contains("fl_rounds")) c.fed.fl_rounds = f["fl_rounds"].get<int>();
        if (f.contains("local_epochs")) c.fed.local_epochs = f["local_epochs"].get<int>();
        if (f.contains("init_mode")) {
            std::string m = f["init_mode"].get<std::string>();
            if (m == "random")
                c.fed.init_mode = InitMode::Random;
            else if (m == "continue")
                c.fed.init_mode = InitMode::Continue;
            else
                throw std::invalid_argument("config: unknown init_mode " + m);
        }
    }
    if (j.contains("train")) {
        const json& t = j["train"];
        if (t.contains("learning_rate")) c.fed.train.learning_rate = t["learning_rate"].get<double>();
        if (t.contains("momentum")) c.fed.train.momentum = t["momentum"].get<double>();
        if (t.contains("batch_size")) c.fed.train.batch_size = t["batch_size"].get<int>();
    }
    c.local_train.learning_rate = c.fed.train.learning_rate;
    c.local_train.momentum = c.fed.train.momentum;
    c.local_train.batch_size = c.fed.train.batch_size;
    if (j.contains("local_train")) {
        const json& t = j["local_train"];
        if (t.contains("epochs")) c.local_train.epochs = t["epochs"].get<int>();
        if (t.contains("early_stop_train_acc")) {
            if (t["early_stop_train_acc"].is_null())
                c.local_train.early_stop_train_acc.reset();
            else
                c.local_train.early_stop_train_acc = t["early_stop_train_acc"].get<double>();
        }
        if (t.contains("learning_rate")) c.local_train.learning_rate = t["learning_rate"].get<double>();
        if (t.contains("momentum")) c.local_train.momentum = t["momentum"].get<double>();
        if (t.contains("batch_size")) c.local_train.batch_size = t["batch_size"].get<int>();
    }
    if (j.contains("al")) {
        const json& a = j["al"];
        if (a.contains("strategy")) c.al.strategy = strategy_from_string(a["strategy"].get<std::string>());
        if (a.contains("selector")) c.al.selector = selector_from_string(a["selector"].get<std::string>());
        if (a.contains("base")) c.al.ens_base = strategy_from_string(a["base"].get<std::string>());
        if (a.contains("ft_epochs")) c.al.ft_epochs = a["ft_epochs"].get<int>();
        if (a.contains("rounds")) c.al.rounds = a["rounds"].get<int>();
        if (a.contains("budget_fraction")) c.al.budget_fraction = a["budget_fraction"].get<double>();
        if (a.contains("budget_count")) c.al.budget_count = a["budget_count"].get<int>();
    }
    if (j.contains("arch_hidden")) c.arch_hidden = j["arch_hidden"].get<std::vector<int>>();
    if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<uint64_t>>();
    if (j.contains("output_dir")) c.output_dir = j["output_dir"].get<std::string>();
    if (j.contains("emd_factor")) c.emd_factor = j["emd_factor"].get<double>();
    if (j.contains("save_checkpoints")) c.save_checkpoints = j["save_checkpoints"].get<bool>();
    if (j.contains("log_training")) c.log_training = j["log_training"].get<bool>();
    if (j.contains("eval_last_fl_rounds")) c.eval_last_fl_rounds = j["eval_last_fl_rounds"].get<int>();
    return c;
}

// Dotted-path override, value parsed as a JSON literal when possible and kept
// as a string otherwise. "partition.alpha=inf" and "al.strategy=logo" both work.
inline void apply_override(json& doc, const std::string& key, const std::string& value) {
    std::string pointer = "/";
    for (char ch : key) pointer += (ch == '.') ? '/' : ch;
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::parse_error&) {
        parsed = value;
    }
    doc[json::json_pointer(pointer)] = parsed;
}

inline ExperimentConfig load_config_file(const std::string& path,
                                         const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
    json doc;
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open config " + path);
        in >> doc;
    } else {
        doc = json::object();
    }
    for (const auto& [k, v] : overrides) apply_override(doc, k, v);
    return config_from_json(doc);
}

inline uint64_t fnv1a(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string config_hash(const ExperimentConfig& c) {
    return hex64(fnv1a(config_to_json(c).dump()));
}

// Identifies an experimental setting: everything except the strategy choice
// and bookkeeping fields. Results sharing a key are comparable pairwise.
inline std::string setting_key(const ExperimentConfig& c) {
    json j = config_to_json(c);
    j.erase("al");
    j.erase("name");
    j.erase("output_dir");
    j.erase("save_checkpoints");
    j.erase("log_training");
    json al;
    al["rounds"] = c.al.rounds;
    al["budget_fraction"] = c.al.budget_fraction;
    al["budget_count"] = c.al.budget_count;
    j["al"] = al;
    return hex64(fnv1a(j.dump()));
}

// ---------------------------------------------------------------------------
// experiment execution

struct BuiltData {
    Dataset train;
    Dataset test;
};

// Materializes the train/test datasets a config describes, with the imbalance
// profile already applied to the training side.
inline BuiltData build_datasets(const ExperimentConfig& cfg, uint64_t seed) {
    BuiltData out;
    switch (cfg.data.kind) {
        case DataSpec::Kind::Synthetic:
            out.train = generate_synthetic(cfg.data.classes, cfg.data.per_class, cfg.data.dim,
                                           cfg.data.separation, derive_seed(seed, "train-data"));
            out.test = generate_synthetic(cfg.data.classes, cfg.data.test_per_class, cfg.data.dim,
                                          cfg.data.separation, derive_seed(seed, "test-data"));
            break;
        case DataSpec::Kind::SyntheticMix:
            out.train = generate_synthetic_mixture(cfg.data.classes, cfg.data.per_class,
                                                   cfg.data.dim, cfg.data.separation,
                                                   cfg.data.modes_per_class,
                                                   derive_seed(seed, "train-data"));
            // Test draws sample every mode equally, so accuracy measures mode
            // coverage the way balanced test sets measure class coverage.
            out.test = generate_synthetic_mixture(cfg.data.classes, cfg.data.test_per_class,
                                                  cfg.data.dim, cfg.data.separation,
                                                  cfg.data.modes_per_class,
                                                  derive_seed(seed, "test-data"),
                                                  /*uniform_modes=*/true);
            break;
        case DataSpec::Kind::Idx:
            out.train = load_idx(cfg.data.train_images, cfg.data.train_labels);
            out.test = load_idx(cfg.data.test_images, cfg.data.test_labels);
            break;
        case DataSpec::Kind::Csv:
            out.train = load_csv(cfg.data.train_csv);
            out.test = load_csv(cfg.data.test_csv);
            break;
    }
    // Inferred class counts may differ between loaded files; harmonize.
    int classes = std::max(out.train.num_classes, out.test.num_classes);
    out.train.num_classes = classes;
    out.test.num_classes = classes;
    out.train = induce_global_imbalance(out.train, cfg.partition.rho, derive_seed(seed, "imbalance"),
                                        cfg.data.permute_imbalance);
    return out;
}

namespace detail {

inline std::filesystem::path resolve_output_dir(const std::string& dir) {
    std::filesystem::path p(dir);
    const char* root = std::getenv("FAL_OUTPUT_ROOT");
    if (root && *root && p.is_relative()) return std::filesystem::path(root) / p;
    return p;
}

inline SeedRun run_seed(const ExperimentConfig& cfg, uint64_t seed, int* budget_out, int* pool_out) {
    SeedRun run;
    run.seed = seed;

    BuiltData data = build_datasets(cfg, seed);
    PartitionConfig part = cfg.partition;
    part.seed = derive_seed(seed, "partition");
    ClientSplit split = partition_dirichlet(data.train, part);

    int pool = static_cast<int>(split.client_indices[0].size());
    for (const auto& list : split.client_indices) pool = std::min(pool, static_cast<int>(list.size()));
    int budget = cfg.al.budget_count > 0
                     ? cfg.al.budget_count
                     : std::max(1, static_cast<int>(std::floor(cfg.al.budget_fraction * pool)));
    require(budget * cfg.al.rounds <= pool, "config: budget * rounds exceeds client pool");
    if (budget_out) *budget_out = budget;
    if (pool_out) *pool_out = pool;

    Architecture arch;
    arch.input_dim = data.train.dim();
    arch.hidden = cfg.arch_hidden;
    arch.num_classes = data.train.num_classes;

    LabelState state = make_initial_labels(split, budget, derive_seed(seed, "init-labels"));
    state.validate(split);

    ModelParams initial = init_params(arch, derive_seed(seed, "model"));
    ModelParams global = initial;
    const int K = part.num_clients;

    StrategyOptions opts;
    opts.ens_base = cfg.al.ens_base;
    opts.ft_epochs = cfg.al.ft_epochs;
    opts.ft_train = cfg.fed.train;

    std::filesystem::path ckpt_dir;
    if (cfg.save_checkpoints) {
        ckpt_dir = resolve_output_dir(cfg.output_dir) / "checkpoints" / ("seed" + std::to_string(seed));
        std::filesystem::create_directories(ckpt_dir);
    }

    for (int r = 1; r <= cfg.al.rounds; ++r) {
        RoundRecord rec;
        rec.al_round = r;
        rec.queries.resize(K);

        if (r == 1) {
            rec.queries = state.labeled;  // round 1 reveals the initial random picks
        } else {
            bool need_local = strategy_needs_local_model(cfg.al.strategy, cfg.al.selector);
            std::vector<ModelParams> locals;
            if (need_local) {
                locals.reserve(K);
                for (int k = 0; k < K; ++k) {
                    TrainConfig lt = cfg.local_train;
                    lt.seed = derive_seed(seed, "local", static_cast<uint64_t>(r),
                                          static_cast<uint64_t>(k));
                    locals.push_back(train_local_only(data.train, state, k, arch, lt));
                }
            }
            for (int k = 0; k < K; ++k) {
                QueryContext ctx;
                ctx.dataset = &data.train;
                ctx.client = k;
                ctx.unlabeled = state.unlabeled[k];
                ctx.labeled = state.labeled[k];
                ctx.global_model = &global;
                ctx.local_model = need_local ? &locals[k] : nullptr;
                ctx.budget = budget;
                ctx.seed = derive_seed(seed, "query", static_cast<uint64_t>(r),
                                       static_cast<uint64_t>(k));
                std::vector<int> picked = select_queries(cfg.al.strategy, ctx, cfg.al.selector, opts);
                require(static_cast<int>(picked.size()) == budget, "runner: wrong query size");
                state.reveal(k, picked);
                rec.queries[k] = picked;
            }
            state.validate(split);
        }

        FedConfig fed = cfg.fed;
        fed.train.seed = derive_seed(seed, "fed", static_cast<uint64_t>(r));
        const ModelParams& start =
            (r == 1 || cfg.fed.init_mode == InitMode::Random) ? initial : global;
        std::vector<TrainLogRow> round_log;
        int tail = std::min(std::max(cfg.eval_last_fl_rounds, 1), fed.fl_rounds);
        std::vector<double> tail_accs;
        std::function<void(int, const ModelParams&)> on_round;
        if (tail > 1)
            on_round = [&](int fl_round, const ModelParams& params) {
                if (fl_round > fed.fl_rounds - tail) tail_accs.push_back(evaluate(params, data.test));
            };
        global = fedavg(start, data.train, state, fed, cfg.log_training ? &round_log : nullptr,
                        on_round);
        for (const auto& row : round_log) {
            run.train_log.push_back(row);
            run.train_log_al_round.push_back(r);
        }

        rec.test_acc = tail > 1
                           ? std::accumulate(tail_accs.begin(), tail_accs.end(), 0.0) / tail_accs.size()
                           : evaluate(global, data.test);
        rec.local_emd = local_emd(state, data.train, cfg.emd_factor);
        rec.global_emd = global_emd(state, data.train, cfg.emd_factor);
        rec.labeled_per_client = static_cast<int>(state.labeled[0].size());
        run.rounds.push_back(std::move(rec));

        if (cfg.save_checkpoints)
            save_model(global, (ckpt_dir / ("round" + std::to_string(r) + ".json")).string());
    }
    return run;
}

}  // namespace detail

// Full FAL loop: round 1 random labeling + FedAvg, then alternate per-client
// querying and FedAvg retraining. One SeedRun per configured seed; a failing
// seed is recorded and does not abort the others.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentResult result;
    result.config = cfg;
    result.config_hash = config_hash(cfg);
    for (uint64_t seed : cfg.seeds) {
        try {
            result.runs.push_back(
                detail::run_seed(cfg, seed, &result.budget_per_round, &result.pool_per_client));
        } catch (const std::exception& e) {
            SeedRun failed;
            failed.seed = seed;
            failed.failed = true;
            failed.error = e.what();
            result.runs.push_back(std::move(failed));
        }
    }
    return result;
}

// Independent configs, optionally on a small thread pool; output order always
// matches the input order.
inline std::vector<ExperimentResult> run_grid(const std::vector<ExperimentConfig>& configs,
                                              int threads = 1) {
    require(threads >= 1, "grid: threads must be >= 1");
    std::vector<ExperimentResult> results(configs.size());
    if (threads == 1 || configs.size() <= 1) {
        for (size_t i = 0; i < configs.size(); ++i) results[i] = run_experiment(configs[i]);
        return results;
    }
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= configs.size()) return;
            results[i] = run_experiment(configs[i]);
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return results;
}

// ---------------------------------------------------------------------------
// results <-> json / csv

inline std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline json result_to_json(const ExperimentResult& r) {
    json j;
    j["config"] = config_to_json(r.config);
    j["config_hash"] = r.config_hash;
    j["setting_key"] = setting_key(r.config);
    j["strategy_label"] = strategy_label(r.config.al);
    j["budget_per_round"] = r.budget_per_round;
    j["pool_per_client"] = r.pool_per_client;
    j["runs"] = json::array();
    for (const auto& run : r.runs) {
        json rj;
        rj["seed"] = run.seed;
        rj["failed"] = run.failed;
        if (run.failed) rj["error"] = run.error;
        rj["rounds"] = json::array();
        for (const auto& rec : run.rounds) {
            json rr;
            rr["al_round"] = rec.al_round;
            rr["test_acc"] = rec.test_acc;
            rr["local_emd"] = rec.local_emd;
            rr["global_emd"] = rec.global_emd;
            rr["labeled_per_client"] = rec.labeled_per_client;
            rr["queries"] = rec.queries;
            rj["rounds"].push_back(std::move(rr));
        }
        j["runs"].push_back(std::move(rj));
    }
    return j;
}

inline ExperimentResult result_from_json(const json& j) {
    ExperimentResult r;
    r.config = config_from_json(j.at("config"));
    r.config_hash = j.at("config_hash").get<std::string>();
    r.budget_per_round = j.at("budget_per_round").get<int>();
    r.pool_per_client = j.at("pool_per_client").get<int>();
    for (const auto& rj : j.at("runs")) {
        SeedRun run;
        run.seed = rj.at("seed").get<uint64_t>();
        run.failed = rj.at("failed").get<bool>();
        if (run.failed && rj.contains("error")) run.error = rj.at("error").get<std::string>();
        for (const auto& rr : rj.at("rounds")) {
            RoundRecord rec;
            rec.al_round = rr.at("al_round").get<int>();
            rec.test_acc = rr.at("test_acc").get<double>();
            rec.local_emd = rr.at("local_emd").get<double>();
            rec.global_emd = rr.at("global_emd").get<double>();
            rec.labeled_per_client = rr.at("labeled_per_client").get<int>();
            rec.queries = rr.at("queries").get<std::vector<std::vector<int>>>();
            run.rounds.push_back(std::move(rec));
        }
        r.runs.push_back(std::move(run));
    }
    return r;
}

inline void write_accuracy_csv(std::ostream& out, const ExperimentResult& r, bool header = true) {
    if (header) out << "strategy,selector,seed,al_round,budget_frac,test_acc\n";
    std::string label = strategy_label(r.config.al);
    std::string sel = to_string(r.config.al.selector);
    for (const auto& run : r.runs) {
        if (run.failed) continue;
        for (const auto& rec : run.rounds) {
            double frac = r.pool_per_client > 0
                              ? static_cast<double>(rec.labeled_per_client) / r.pool_per_client
                              : 0.0;
            out << label << "," << sel << "," << run.seed << "," << rec.al_round << ","
                << fmt_g(frac) << "," << fmt_g(rec.test_acc) << "\n";
        }
    }
}

inline void write_emd_csv(std::ostream& out, const ExperimentResult& r, bool header = true) {
    if (header) out << "strategy,selector,seed,al_round,local_emd,global_emd\n";
    std::string label = strategy_label(r.config.al);
    std::string sel = to_string(r.config.al.selector);
    for (const auto& run : r.runs) {
        if (run.failed) continue;
        for (const auto& rec : run.rounds)
            out << label << "," << sel << "," << run.seed << "," << rec.al_round << ","
                << fmt_g(rec.local_emd) << "," << fmt_g(rec.global_emd) << "\n";
    }
}

inline void write_train_log_csv(std::ostream& out, const ExperimentResult& r) {
    out << "al_round,fl_round,client,train_loss,train_acc\n";
    for (const auto& run : r.runs) {
        for (size_t i = 0; i < run.train_log.size(); ++i) {
            const auto& row = run.train_log[i];
            out << run.train_log_al_round[i] << "," << row.fl_round << "," << row.client << ","
                << fmt_g(row.train_loss) << "," << fmt_g(row.train_acc) << "\n";
        }
    }
}

// Writes summary.json, accuracy.csv, emd.csv (and train_log.csv when enabled)
// into the configured output directory.
inline std::filesystem::path write_result(const ExperimentResult& r) {
    auto dir = detail::resolve_output_dir(r.config.output_dir);
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "summary.json");
        if (!out) throw IoError("cannot write summary.json in " + dir.string());
        out << result_to_json(r).dump(2) << "\n";
    }
    {
        std::ofstream out(dir / "accuracy.csv");
        write_accuracy_csv(out, r);
    }
    {
        std::ofstream out(dir / "emd.csv");
        write_emd_csv(out, r);
    }
    if (r.config.log_training) {
        std::ofstream out(dir / "train_log.csv");
        write_train_log_csv(out, r);
    }
    return dir;
}

inline ExperimentResult load_result(const std::string& summary_path) {
    std::ifstream in(summary_path);
    if (!in) throw IoError("cannot open " + summary_path);
    json j;
    in >> j;
    return result_from_json(j);
}

// ---------------------------------------------------------------------------
// comparison & reports

// Per-round accuracy sets over the seeds both results completed.
inline AccuracySeries accuracy_series(const ExperimentResult& r) {
    AccuracySeries series;
    series.strategy = strategy_label(r.config.al);
    series.rounds.assign(r.config.al.rounds, {});
    for (const auto& run : r.runs) {
        if (run.failed) continue;
        for (const auto& rec : run.rounds) series.rounds[rec.al_round - 1].push_back(rec.test_acc);
    }
    return series;
}

struct CompareReport {
    std::string strategy_i, strategy_j;
    double threshold = 2.776;
    std::vector<double> t_scores;  // per AL round
    double win_ij = 0.0;
    double win_ji = 0.0;
};

inline CompareReport compare_results(const ExperimentResult& a, const ExperimentResult& b,
                                     std::optional<double> threshold = std::nullopt) {
    require(setting_key(a.config) == setting_key(b.config),
            "compare: results come from different experimental settings");
    std::vector<uint64_t> seeds_a, seeds_b;
    for (const auto& run : a.runs)
        if (!run.failed) seeds_a.push_back(run.seed);
    for (const auto& run : b.runs)
        if (!run.failed) seeds_b.push_back(run.seed);
    require(seeds_a == seeds_b, "compare: surviving seed sets differ");
    require(seeds_a.size() >= 2, "compare: fewer than 2 surviving seeds");

    AccuracySeries sa = accuracy_series(a), sb = accuracy_series(b);
    CompareReport rep;
    rep.strategy_i = sa.strategy;
    rep.strategy_j = sb.strategy;
    rep.threshold = threshold ? *threshold : default_t_threshold(static_cast<int>(seeds_a.size()));
    rep.t_scores = round_t_scores(sa, sb);
    rep.win_ij = winning_rate(rep.t_scores, rep.threshold);
    std::vector<double> neg(rep.t_scores.size());
    for (size_t i = 0; i < neg.size(); ++i) neg[i] = -rep.t_scores[i];
    rep.win_ji = winning_rate(neg, rep.threshold);
    return rep;
}

// Aggregated report across runs: combined accuracy/EMD CSVs, t-score tables
// keyed by (setting, round, pair), penalty matrix over the strategies present
// in every setting, and a plain-text summary.
inline void write_report(const std::vector<ExperimentResult>& results, const std::string& out_dir) {
    require(!results.empty(), "report: no results");
    auto dir = detail::resolve_output_dir(out_dir);
    std::filesystem::create_directories(dir);

    {
        std::ofstream out(dir / "accuracy.csv");
        out << "setting,strategy,selector,seed,al_round,budget_frac,test_acc\n";
        for (const auto& r : results) {
            std::stringstream ss;
            write_accuracy_csv(ss, r, false);
            std::string line;
            while (std::getline(ss, line)) out << setting_key(r.config) << "," << line << "\n";
        }
    }
    {
        std::ofstream out(dir / "emd.csv");
        out << "setting,strategy,selector,seed,al_round,local_emd,global_emd\n";
        for (const auto& r : results) {
            std::stringstream ss;
            write_emd_csv(ss, r, false);
            std::string line;
            while (std::getline(ss, line)) out << setting_key(r.config) << "," << line << "\n";
        }
    }

    // Group by setting, keep strategies common to every setting.
    std::vector<std::string> setting_order;
    std::map<std::string, std::vector<const ExperimentResult*>> by_setting;
    for (const auto& r : results) {
        std::string key = setting_key(r.config);
        if (!by_setting.count(key)) setting_order.push_back(key);
        by_setting[key].push_back(&r);
    }

    std::vector<std::string> common;
    for (size_t s = 0; s < setting_order.size(); ++s) {
        std::vector<std::string> here;
        for (const auto* r : by_setting[setting_order[s]]) here.push_back(strategy_label(r->config.al));
        std::sort(here.begin(), here.end());
        if (s == 0) {
            common = here;
        } else {
            std::vector<std::string> kept;
            std::set_intersection(common.begin(), common.end(), here.begin(), here.end(),
                                  std::back_inserter(kept));
            common = kept;
        }
    }

    json tscores = json::object();
    int num_seeds = static_cast<int>(results[0].config.seeds.size());
    double threshold = default_t_threshold(num_seeds);
    std::vector<std::vector<AccuracySeries>> settings_series;
    for (const auto& key : setting_order) {
        std::vector<AccuracySeries> series_list;
        for (const auto& label : common) {
            for (const auto* r : by_setting[key]) {
                if (strategy_label(r->config.al) != label) continue;
                series_list.push_back(accuracy_series(*r));
                break;
            }
        }
        if (series_list.size() >= 2) {
            json setting_scores = json::object();
            for (size_t i = 0; i < series_list.size(); ++i)
                for (size_t j = 0; j < series_list.size(); ++j) {
                    if (i == j) continue;
                    auto ts = round_t_scores(series_list[i], series_list[j]);
                    json per_round = json::object();
                    for (size_t r = 0; r < ts.size(); ++r) {
                        double t = ts[r];
                        per_round["round" + std::to_string(r + 1)] =
                            std::isinf(t) ? json(t > 0 ? "inf" : "-inf") : json(t);
                    }
                    setting_scores[series_list[i].strategy + " vs " + series_list[j].strategy] =
                        per_round;
                }
            tscores[key] = setting_scores;
        }
        settings_series.push_back(std::move(series_list));
    }
    {
        std::ofstream out(dir / "tscores.json");
        out << tscores.dump(2) << "\n";
    }

    std::ofstream summary(dir / "summary.txt");
    summary << "settings: " << setting_order.size() << ", results: " << results.size()
            << ", t threshold: " << fmt_g(threshold) << "\n";

    if (common.size() >= 2) {
        std::vector<std::vector<AccuracySeries>> usable;
        for (auto& s : settings_series)
            if (s.size() == common.size()) usable.push_back(std::move(s));
        PenaltyMatrix pm = penalty_matrix(usable, threshold);
        std::ofstream out(dir / "penalty_matrix.csv");
        out << "strategy";
        for (const auto& s : pm.strategies) out << "," << s;
        out << "\n";
        for (size_t i = 0; i < pm.strategies.size(); ++i) {
            out << pm.strategies[i];
            for (size_t j = 0; j < pm.strategies.size(); ++j) out << "," << fmt_g(pm.cells[i][j]);
            out << "\n";
        }
        auto defeats = pm.defeat_means();
        out << "avg_defeated";
        for (double d : defeats) out << "," << fmt_g(d);
        out << "\n";

        summary << "penalty matrix over " << usable.size() << " settings (rows beat columns):\n";
        for (size_t i = 0; i < pm.strategies.size(); ++i) {
            summary << "  " << pm.strategies[i] << ":";
            for (size_t j = 0; j < pm.strategies.size(); ++j) summary << " " << fmt_g(pm.cells[i][j]);
            summary << "\n";
        }
        summary << "  avg defeated:";
        for (double d : defeats) summary << " " << fmt_g(d);
        summary << "\n";
    } else {
        summary << "fewer than two strategies shared across settings; no penalty matrix\n";
    }
}

}  // namespace fal
