#include "biocl/experiment.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <thread>

#include <json.hpp>

namespace biocl {

namespace {

std::string fmt_real(real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", static_cast<double>(v));
    return buf;
}

nlohmann::json config_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["run_id"] = c.run_id;
    j["dataset"] = c.dataset;
    j["data_dir"] = c.data_dir;
    j["out_dir"] = c.out_dir;
    j["scenario"] = c.scenario;
    j["n_tasks"] = c.n_tasks;
    j["theta_inc"] = c.theta_inc;
    j["classes_per_task"] = c.classes_per_task;
    j["seeds"] = c.seeds;
    j["parallel_seeds"] = c.parallel_seeds;
    j["train_limit"] = c.train_limit;
    j["test_limit"] = c.test_limit;
    j["mode"] = c.mode;
    j["hidden_sizes"] = c.hidden_sizes;
    j["k_ratio"] = c.k_ratio;
    j["inhibitory_fraction"] = c.inhibitory_fraction;
    j["weight_sparsity"] = c.weight_sparsity;
    j["n_segments"] = c.n_segments;
    j["activation"] = c.activation;
    j["dale"] = c.dale;
    j["dendrites"] = c.dendrites;
    j["hebbian"] = c.hebbian;
    j["dropout"] = c.dropout;
    j["si"] = c.si;
    j["er"] = c.er;
    j["cr"] = c.cr;
    j["joint"] = c.joint;
    j["oracle_context"] = c.oracle_context;
    j["forward_transfer"] = c.forward_transfer;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["eta"] = c.eta;
    j["eta_wie"] = c.eta_wie;
    j["eta_wei"] = c.eta_wei;
    j["eta_h"] = c.eta_h;
    j["clip_mode"] = c.clip_mode;
    j["clip_value"] = c.clip_value;
    j["lambda"] = c.lambda;
    j["lambda_wie"] = c.lambda_wie;
    j["lambda_wei"] = c.lambda_wei;
    j["gamma"] = c.gamma;
    j["buffer_capacity"] = c.buffer_capacity;
    j["alpha"] = c.alpha;
    j["beta"] = c.beta;
    j["rho"] = c.rho;
    return j;
}

}  // namespace

void ExperimentConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
    if (scenario != "rot" && scenario != "perm" && scenario != "seq") {
        fail("scenario must be rot, perm or seq (got '" + scenario + "')");
    }
    if (mode != "bio" && mode != "standard") fail("mode must be bio or standard");
    if (!activation.empty() && activation != "kwta" && activation != "relu") {
        fail("activation must be kwta or relu");
    }
    if (clip_mode != "norm" && clip_mode != "literal") fail("clip_mode must be norm or literal");
    if (n_tasks < 1) fail("n_tasks must be >= 1");
    if (scenario == "seq" && n_tasks * classes_per_task > 10) {
        fail("seq stream needs n_tasks * classes_per_task <= 10");
    }
    if (seeds.empty()) fail("at least one seed required");
    if (hidden_sizes.empty()) fail("at least one hidden layer required");
    for (int h : hidden_sizes) {
        if (h < 2) fail("hidden sizes must be >= 2");
    }
    if (k_ratio <= real(0) || k_ratio > real(1)) fail("k_ratio must be in (0, 1]");
    if (weight_sparsity < real(0) || weight_sparsity >= real(1)) {
        fail("weight_sparsity must be in [0, 1)");
    }
    if (cr && !er) fail("consistency regularization (cr) requires experience replay (er)");
    if (epochs < 1) fail("epochs must be >= 1");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (eta <= real(0)) fail("eta must be > 0");
    if (clip_value <= real(0)) fail("clip_value must be > 0");
    if (buffer_capacity < 0) fail("buffer_capacity must be >= 0");
    if (gamma <= real(0)) fail("gamma must be > 0");
    if (theta_inc < real(0) || theta_inc > real(180)) fail("theta_inc must be in [0, 180]");
    if (parallel_seeds < 1) fail("parallel_seeds must be >= 1");
    for (real r : rho) {
        if (r < real(0)) fail("rho must be >= 0");
    }
}

NetworkConfig make_network_config(const ExperimentConfig& cfg) {
    NetworkConfig nc;
    nc.hidden_sizes = cfg.hidden_sizes;
    nc.k_ratio = cfg.k_ratio;
    nc.inhibitory_fraction = cfg.inhibitory_fraction;
    nc.weight_sparsity = cfg.weight_sparsity;
    nc.n_segments = cfg.n_segments > 0 ? cfg.n_segments : cfg.n_tasks;
    nc.rho = cfg.rho;
    if (cfg.mode == "standard") {
        nc.dale = false;
        nc.dendrites = false;
        nc.activation =
            cfg.activation == "kwta" ? HiddenActivation::KWta : HiddenActivation::Relu;
    } else {
        nc.dale = cfg.dale;
        nc.dendrites = cfg.dendrites;
        nc.activation =
            cfg.activation == "relu" ? HiddenActivation::Relu : HiddenActivation::KWta;
    }
    return nc;
}

TrainerConfig make_trainer_config(const ExperimentConfig& cfg) {
    TrainerConfig tc;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.opt.eta = cfg.eta;
    tc.opt.eta_wie = cfg.eta_wie;
    tc.opt.eta_wei = cfg.eta_wei;
    tc.opt.eta_h = cfg.eta_h;
    tc.opt.clip_mode = cfg.clip_mode == "literal" ? ClipMode::Literal : ClipMode::Norm;
    tc.opt.clip_value = cfg.clip_value;
    tc.si.lambda = cfg.lambda;
    tc.si.lambda_wie = cfg.lambda_wie;
    tc.si.lambda_wei = cfg.lambda_wei;
    tc.si.gamma = cfg.gamma;
    tc.buffer_capacity = static_cast<std::size_t>(cfg.buffer_capacity);
    tc.alpha = cfg.alpha;
    tc.beta = cfg.beta;
    tc.hebbian = cfg.hebbian && cfg.mode == "bio" && cfg.dendrites;
    tc.dropout = cfg.dropout;
    tc.si_enabled = cfg.si;
    tc.er = cfg.er;
    tc.cr = cfg.cr;
    tc.oracle_context = cfg.oracle_context;
    tc.measure_forward_transfer = cfg.forward_transfer;
    return tc;
}

StreamConfig make_stream_config(const ExperimentConfig& cfg, std::uint64_t seed) {
    StreamConfig sc;
    if (cfg.scenario == "rot") sc.scenario = Scenario::Rotate;
    if (cfg.scenario == "perm") sc.scenario = Scenario::Permute;
    if (cfg.scenario == "seq") sc.scenario = Scenario::ClassSplit;
    sc.n_tasks = cfg.n_tasks;
    sc.theta_inc = cfg.theta_inc;
    sc.classes_per_task = cfg.classes_per_task;
    sc.seed = seed;
    sc.train_limit = cfg.train_limit;
    sc.test_limit = cfg.test_limit;
    return sc;
}

std::string resolve_data_dir(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    std::vector<std::string> candidates;
    if (!cfg.data_dir.empty()) {
        candidates.push_back(cfg.data_dir);
    } else {
        if (const char* env = std::getenv("DATA_DIR")) candidates.push_back(env);
        for (const char* base : {"data", "../data", "../../data"}) {
            candidates.push_back(std::string(base) + "/" + cfg.dataset);
            candidates.push_back(base);
        }
    }
    for (const auto& dir : candidates) {
        if (fs::exists(fs::path(dir) / "train-images-idx3-ubyte") ||
            fs::exists(fs::path(dir) / "train-images.idx3-ubyte")) {
            return dir;
        }
    }
    std::string tried;
    for (const auto& c : candidates) tried += (tried.empty() ? "" : ", ") + c;
    throw IdxParseError("dataset directory not found (tried: " + tried +
                        "); pass --data-dir or set DATA_DIR");
}

RunResult run_single_seed(const ExperimentConfig& cfg, const Dataset& train,
                          const Dataset& test, std::uint64_t seed) {
    TaskStream stream(train, test, make_stream_config(cfg, seed));
    NetworkConfig nc = make_network_config(cfg);
    nc.n_inputs = train.dim();
    nc.context_dim = train.dim();
    int n_classes = 0;
    for (int y : train.labels) n_classes = std::max(n_classes, y + 1);
    nc.n_classes = n_classes;

    Rng init_rng = Rng(seed).substream(Rng::kInit);
    Network net(nc, init_rng);
    Trainer trainer(std::move(net), make_trainer_config(cfg), seed);

    RunResult res;
    if (cfg.joint) {
        const auto t0 = std::chrono::steady_clock::now();
        Task pooled;
        pooled.spec.kind = stream.spec(0).kind;
        pooled.spec.task_id = 0;
        pooled.train = stream.pooled_train();
        res.task_stats.push_back(trainer.train_task(pooled, 0));
        res.acc.assign(1, std::vector<real>(stream.n_tasks(), real(-1)));
        for (int j = 0; j < stream.n_tasks(); ++j) {
            res.acc[0][j] = trainer.evaluate(stream.materialize_test(j));
        }
        res.avg_final_accuracy = average_final_accuracy(res.acc);
        res.forgetting = 0;
        res.seed = seed;
        res.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    } else {
        res = trainer.run(stream);
    }

    if (cfg.checkpoint_dir) {
        std::filesystem::create_directories(*cfg.checkpoint_dir);
        trainer.save_checkpoint(*cfg.checkpoint_dir + "/" + cfg.run_id + "_seed" +
                                    std::to_string(seed) + ".ckpt",
                                config_json(cfg).dump());
    }
    return res;
}

std::string metrics_csv(const ExperimentConfig& cfg, const RunResult& result,
                        std::uint64_t seed) {
    std::string out =
        "run_id,seed,after_task,eval_task,accuracy,loss_task,loss_replay,loss_consistency,"
        "loss_si\n";
    for (std::size_t i = 0; i < result.acc.size(); ++i) {
        const auto mean = i < result.task_stats.size() ? result.task_stats[i].mean()
                                                       : StepLossBreakdown{};
        for (std::size_t j = 0; j < result.acc[i].size(); ++j) {
            if (result.acc[i][j] < real(0)) continue;
            out += cfg.run_id + "," + std::to_string(seed) + "," + std::to_string(i) + "," +
                   std::to_string(j) + "," + fmt_real(result.acc[i][j]) + "," +
                   fmt_real(mean.task) + "," + fmt_real(mean.replay_ce) + "," +
                   fmt_real(mean.consistency) + "," + fmt_real(mean.si) + "\n";
        }
    }
    return out;
}

std::string summary_json(const ExperimentConfig& cfg, const ExperimentResult& result) {
    nlohmann::json j;
    j["config"] = config_json(cfg);
    j["per_seed"] = nlohmann::json::array();
    for (std::size_t i = 0; i < result.per_seed.size(); ++i) {
        const auto& r = result.per_seed[i];
        nlohmann::json s;
        s["seed"] = r.seed;
        s["avg_final_accuracy"] = r.avg_final_accuracy;
        s["forgetting"] = r.forgetting;
        if (r.fwd_transfer) s["forward_transfer"] = *r.fwd_transfer;
        s["wall_seconds"] = r.wall_seconds;
        s["accuracy_matrix"] = r.acc;
        j["per_seed"].push_back(std::move(s));
    }
    j["aggregate"] = {
        {"mean_accuracy", result.mean_accuracy},
        {"std_accuracy", result.std_accuracy},
        {"mean_forgetting", result.mean_forgetting},
        {"std_forgetting", result.std_forgetting},
    };
    char stamp[32] = {0};
    std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    j["timestamp"] = stamp;
    return j.dump(2);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::string data_dir = resolve_data_dir(cfg);
    const auto [train, test] = load_idx_dir(data_dir);

    ExperimentResult result;
    result.per_seed.resize(cfg.seeds.size());

    const int workers = std::min<int>(cfg.parallel_seeds, static_cast<int>(cfg.seeds.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
            result.per_seed[i] = run_single_seed(cfg, train, test, cfg.seeds[i]);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (;;) {
                        const std::size_t i = next.fetch_add(1);
                        if (i >= cfg.seeds.size()) break;
                        result.per_seed[i] = run_single_seed(cfg, train, test, cfg.seeds[i]);
                    }
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    const auto n = static_cast<real>(result.per_seed.size());
    for (const auto& r : result.per_seed) {
        result.mean_accuracy += r.avg_final_accuracy / n;
        result.mean_forgetting += r.forgetting / n;
    }
    if (result.per_seed.size() > 1) {
        real va = 0, vf = 0;
        for (const auto& r : result.per_seed) {
            va += (r.avg_final_accuracy - result.mean_accuracy) *
                  (r.avg_final_accuracy - result.mean_accuracy);
            vf += (r.forgetting - result.mean_forgetting) * (r.forgetting - result.mean_forgetting);
        }
        result.std_accuracy = std::sqrt(va / (n - 1));
        result.std_forgetting = std::sqrt(vf / (n - 1));
    }

    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
        const auto path = fs::path(cfg.out_dir) /
                          (cfg.run_id + "_seed" + std::to_string(cfg.seeds[i]) + ".csv");
        std::ofstream f(path, std::ios::trunc);
        f << metrics_csv(cfg, result.per_seed[i], cfg.seeds[i]);
    }
    {
        std::ofstream f(fs::path(cfg.out_dir) / (cfg.run_id + "_summary.json"),
                        std::ios::trunc);
        f << summary_json(cfg, result) << "\n";
    }
    return result;
}

namespace {

struct SettingRow {
    const char* key;
    const char* scenario;
    int n_tasks;
    real eta_wie, eta_wei;   // inhibitory rates after the first task
    real hebb_eta;           // +Hebbian variant
    real sc_lambda;          // +SC variant
    real ercr_beta;          // +ER+CR variant
    real hd_rho;             // +HD variant
    real bio_eta_h, bio_lambda, bio_rho, bio_beta;  // combined variant
};

constexpr SettingRow kSettings[] = {
    {"rot5", "rot", 5, real(3e-2), real(3e-3), real(3e-10), real(0.25), real(0.5), real(1.0),
     real(3e-8), real(0.25), real(0.1), real(0.5)},
    {"rot10", "rot", 10, real(3e-2), real(3e-3), real(3e-8), real(0.25), real(0.5), real(1.0),
     real(3e-8), real(0.1), real(0.3), real(0.5)},
    {"rot20", "rot", 20, real(3e-3), real(3e-4), real(3e-10), real(1.0), real(0.5), real(1.0),
     real(3e-8), real(0.1), real(0.3), real(0.5)},
    {"perm5", "perm", 5, real(3e-2), real(3e-2), real(3e-9), real(0.1), real(0.5), real(0.7),
     real(3e-6), real(0.1), real(0.1), real(0.5)},
    {"perm10", "perm", 10, real(3e-2), real(3e-2), real(3e-6), real(0.25), real(0.5), real(1.0),
     real(3e-8), real(0.1), real(0.3), real(0.5)},
    {"perm20", "perm", 20, real(3e-2), real(3e-3), real(3e-9), real(0.1), real(0.5), real(0.3),
     real(3e-8), real(0.1), real(0.3), real(0.5)},
    {"seq5", "seq", 5, real(3e-2), real(3e-3), real(3e-7), real(0.25), real(0.25), real(1.0),
     real(3e-6), real(0.1), real(0.1), real(0.25)},
};

constexpr const char* kVariants[] = {"sgd",  "joint", "dendrites", "dann", "hebbian",
                                     "hd",   "sc",    "er",        "ercr", "bioann"};

ExperimentConfig build_preset(const SettingRow& row, const std::string& variant) {
    ExperimentConfig c;
    c.run_id = std::string("table1-") + row.key + "-" + variant;
    c.scenario = row.scenario;
    c.n_tasks = row.n_tasks;
    c.eta_wie = row.eta_wie;
    c.eta_wei = row.eta_wei;
    c.hebbian = c.dropout = c.si = c.er = c.cr = false;
    c.dale = c.dendrites = true;
    c.mode = "bio";
    c.eta_h = 0;
    c.beta = 0;

    if (variant == "sgd" || variant == "joint") {
        c.mode = "standard";
        c.dale = c.dendrites = false;
        c.joint = variant == "joint";
    } else if (variant == "dendrites") {
        c.dale = false;
    } else if (variant == "dann") {
        // the bare two-population architecture
    } else if (variant == "hebbian") {
        c.hebbian = true;
        c.eta_h = row.hebb_eta;
    } else if (variant == "hd") {
        c.dropout = true;
        c.rho = {row.hd_rho};
    } else if (variant == "sc") {
        c.si = true;
        c.lambda = row.sc_lambda;
    } else if (variant == "er") {
        c.er = true;
        c.alpha = 1;
        c.beta = 0;
    } else if (variant == "ercr") {
        c.er = c.cr = true;
        c.alpha = 1;
        c.beta = row.ercr_beta;
    } else if (variant == "bioann") {
        c.hebbian = c.dropout = c.si = c.er = c.cr = true;
        c.eta_h = row.bio_eta_h;
        c.lambda = row.bio_lambda;
        c.rho = {row.bio_rho};
        c.alpha = 1;
        c.beta = row.bio_beta;
    } else {
        throw ConfigError("unknown preset variant " + variant);
    }
    return c;
}

}  // namespace

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& row : kSettings) {
        for (const char* v : kVariants) {
            names.push_back(std::string("table1-") + row.key + "-" + v);
        }
    }
    return names;
}

ExperimentConfig preset(const std::string& name) {
    for (const auto& row : kSettings) {
        for (const char* v : kVariants) {
            if (name == std::string("table1-") + row.key + "-" + v) {
                return build_preset(row, v);
            }
        }
    }
    throw ConfigError("unknown preset '" + name + "' (see `presets` for the list)");
}

}  // namespace biocl
