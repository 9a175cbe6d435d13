#pragma once

// Experiment harness: configuration parsing and validation, the
// permuted-MNIST and synthetic benchmarks, the naive fine-tuning baseline,
// memory accounting, and result serialization. One experiment per process;
// files are written atomically (write-temp-then-rename).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "codecl/data.hpp"
#include "codecl/errors.hpp"
#include "codecl/metrics.hpp"
#include "codecl/model_io.hpp"
#include "codecl/trainer.hpp"

namespace codecl {

struct SyntheticConfig {
    Eigen::Index input_dim = 32;
    int samples_per_task = 2000;
    double overlap = 0.0;
};

struct ExperimentConfig {
    std::string benchmark = "permuted_mnist";  // permuted_mnist | synthetic
    std::string method = "codecl";             // codecl | naive
    int tasks = 10;
    std::uint64_t seed = 0;
    std::vector<Eigen::Index> hidden_dims = {100, 100};
    double input_gain = kDefaultInputGain;  // MNIST preprocessing gain
    std::filesystem::path data_dir;
    std::filesystem::path output_dir = "out";
    TrainSchedule schedule;
    SyntheticConfig synthetic;

    void validate() const {
        if (benchmark != "permuted_mnist" && benchmark != "synthetic")
            throw ParameterError("config field 'benchmark': must be permuted_mnist or synthetic");
        if (method != "codecl" && method != "naive")
            throw ParameterError("config field 'method': must be codecl or naive");
        if (tasks < 1) throw ParameterError("config field 'tasks': must be >= 1");
        if (hidden_dims.empty())
            throw ParameterError("config field 'hidden_dims': need at least one hidden layer");
        if (!(input_gain > 0.0))
            throw ParameterError("config field 'input_gain': must be positive");
    }
};

inline nlohmann::json schedule_to_json(const TrainSchedule& s) {
    nlohmann::json j{{"eta0", s.eta0},
                     {"batch_size", s.batch_size},
                     {"epochs", s.epochs},
                     {"conceptor_batch", s.conceptor_batch},
                     {"aperture", s.aperture},
                     {"epsilon", s.epsilon},
                     {"free_dims", s.free_dims},
                     {"gaussian_adapter_init", s.gaussian_adapter_init},
                     {"rank_tol", s.rank_tol}};
    if (s.plateau)
        j["plateau"] = {{"patience", s.plateau->patience},
                        {"decay_factor", s.plateau->decay_factor},
                        {"min_lr", s.plateau->min_lr}};
    return j;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    return nlohmann::json{{"benchmark", c.benchmark},
                          {"method", c.method},
                          {"tasks", c.tasks},
                          {"seed", c.seed},
                          {"hidden_dims", c.hidden_dims},
                          {"input_gain", c.input_gain},
                          {"data_dir", c.data_dir.string()},
                          {"output_dir", c.output_dir.string()},
                          {"schedule", schedule_to_json(c.schedule)},
                          {"synthetic", {{"input_dim", c.synthetic.input_dim},
                                         {"samples_per_task", c.synthetic.samples_per_task},
                                         {"overlap", c.synthetic.overlap}}}};
}

namespace detail {

template <typename T>
T get_field(const nlohmann::json& j, const char* name, T fallback) {
    if (!j.contains(name)) return fallback;
    try {
        return j.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParameterError(std::string("config field '") + name + "': invalid value");
    }
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.benchmark = detail::get_field<std::string>(j, "benchmark", c.benchmark);
    c.method = detail::get_field<std::string>(j, "method", c.method);
    c.tasks = detail::get_field<int>(j, "tasks", c.tasks);
    c.seed = detail::get_field<std::uint64_t>(j, "seed", c.seed);
    c.hidden_dims = detail::get_field<std::vector<Eigen::Index>>(j, "hidden_dims", c.hidden_dims);
    c.input_gain = detail::get_field<double>(j, "input_gain", c.input_gain);
    c.data_dir = detail::get_field<std::string>(j, "data_dir", c.data_dir.string());
    c.output_dir = detail::get_field<std::string>(j, "output_dir", c.output_dir.string());
    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        c.schedule.eta0 = detail::get_field<double>(s, "eta0", c.schedule.eta0);
        c.schedule.batch_size = detail::get_field<int>(s, "batch_size", c.schedule.batch_size);
        c.schedule.epochs = detail::get_field<int>(s, "epochs", c.schedule.epochs);
        c.schedule.conceptor_batch =
            detail::get_field<int>(s, "conceptor_batch", c.schedule.conceptor_batch);
        c.schedule.aperture = detail::get_field<double>(s, "aperture", c.schedule.aperture);
        c.schedule.epsilon = detail::get_field<double>(s, "epsilon", c.schedule.epsilon);
        c.schedule.free_dims = detail::get_field<int>(s, "free_dims", c.schedule.free_dims);
        c.schedule.gaussian_adapter_init = detail::get_field<bool>(
            s, "gaussian_adapter_init", c.schedule.gaussian_adapter_init);
        c.schedule.rank_tol = detail::get_field<double>(s, "rank_tol", c.schedule.rank_tol);
        if (s.contains("plateau")) {
            PlateauConfig p;
            const auto& pj = s.at("plateau");
            p.patience = detail::get_field<int>(pj, "patience", p.patience);
            p.decay_factor = detail::get_field<double>(pj, "decay_factor", p.decay_factor);
            p.min_lr = detail::get_field<double>(pj, "min_lr", p.min_lr);
            c.schedule.plateau = p;
        }
    }
    if (j.contains("synthetic")) {
        const auto& s = j.at("synthetic");
        c.synthetic.input_dim =
            detail::get_field<Eigen::Index>(s, "input_dim", c.synthetic.input_dim);
        c.synthetic.samples_per_task =
            detail::get_field<int>(s, "samples_per_task", c.synthetic.samples_per_task);
        c.synthetic.overlap = detail::get_field<double>(s, "overlap", c.synthetic.overlap);
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open config file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("config file is not valid JSON: ") + e.what());
    }
    return config_from_json(j);
}

/// Exact float counts behind the O(N^2 + TNK + TK^2) accounting: per layer
/// the stored conceptor (n^2 floats) plus every archived adapter
/// (nK + K^2 floats each).
struct LayerMemory {
    int layer = 0;
    Eigen::Index input_dim = 0;
    std::size_t conceptor_floats = 0;
    std::size_t adapter_floats = 0;
};

struct MemoryReport {
    std::vector<LayerMemory> layers;
    std::size_t conceptor_total = 0;
    std::size_t adapter_total = 0;
    std::size_t total = 0;
};

inline MemoryReport memory_report(const ConceptorBank& bank, const MlpModel& model) {
    MemoryReport report;
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        LayerMemory lm;
        lm.layer = static_cast<int>(l);
        lm.input_dim = model.layer(l).in_dim();
        if (l < bank.conceptors.size())
            lm.conceptor_floats = static_cast<std::size_t>(bank.conceptors[l].dim()) *
                                  static_cast<std::size_t>(bank.conceptors[l].dim());
        for (const AdapterRecord& rec : bank.archive) {
            if (rec.layer != static_cast<int>(l)) continue;
            const auto n = static_cast<std::size_t>(rec.u.rows());
            const auto k = static_cast<std::size_t>(rec.u.cols());
            lm.adapter_floats += n * k + k * k;
        }
        report.conceptor_total += lm.conceptor_floats;
        report.adapter_total += lm.adapter_floats;
        report.layers.push_back(lm);
    }
    report.total = report.conceptor_total + report.adapter_total;
    return report;
}

inline nlohmann::json memory_report_to_json(const MemoryReport& r) {
    nlohmann::json layers = nlohmann::json::array();
    for (const LayerMemory& lm : r.layers)
        layers.push_back({{"layer", lm.layer},
                          {"input_dim", lm.input_dim},
                          {"conceptor_floats", lm.conceptor_floats},
                          {"adapter_floats", lm.adapter_floats}});
    return nlohmann::json{{"layers", layers},
                          {"conceptor_total", r.conceptor_total},
                          {"adapter_total", r.adapter_total},
                          {"total", r.total}};
}

/// Naive sequential fine-tuning: the run_sequence loop with projection
/// disabled, no conceptors and no adapters.
inline AccuracyMatrix naive_baseline(MlpModel& model, const TaskSequence& tasks,
                                     const TrainSchedule& schedule,
                                     std::ostream* log = nullptr) {
    return run_naive(model, tasks, schedule, log).matrix;
}

namespace detail {

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot write file: " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace detail

/// Resolves the MNIST data directory: explicit config value first, then the
/// CODECL_DATA_DIR environment variable.
inline std::filesystem::path resolve_data_dir(const ExperimentConfig& config) {
    if (!config.data_dir.empty()) return config.data_dir;
    if (const char* env = std::getenv("CODECL_DATA_DIR")) return env;
    throw DataError("no data directory: set data_dir in the config, pass --data-dir, "
                    "or export CODECL_DATA_DIR");
}

inline TaskSequence build_tasks(const ExperimentConfig& config) {
    if (config.benchmark == "permuted_mnist") {
        auto base = load_mnist_benchmark(resolve_data_dir(config), config.seed,
                                         config.input_gain);
        return permuted_tasks(std::move(base), config.tasks, config.seed);
    }
    return synthetic_subspace_tasks(config.synthetic.input_dim, config.tasks,
                                    config.synthetic.overlap,
                                    config.synthetic.samples_per_task, config.seed);
}

inline MlpModel build_model(const ExperimentConfig& config, Eigen::Index input_dim,
                            int classes) {
    std::vector<Eigen::Index> dims{input_dim};
    dims.insert(dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
    dims.push_back(classes);
    std::mt19937_64 rng(config.seed);
    return MlpModel::glorot_uniform(dims, rng);
}

struct ExperimentResult {
    RunReport report;
    MemoryReport memory;
    double acc_value = 0.0;
    double bwt_value = 0.0;
};

/// Runs the configured experiment and writes accuracy_matrix.csv,
/// metrics.json, config.json, model.json and train_log.jsonl into the
/// output directory.
inline ExperimentResult run_experiment(const ExperimentConfig& config) {
    config.validate();
    TaskSequence tasks = build_tasks(config);
    MlpModel model =
        build_model(config, tasks.task(0).input_dim(), tasks.task(0).dataset().num_classes);
    TrainSchedule schedule = config.schedule;
    schedule.seed = config.seed;
    schedule.validate(model.input_dim());

    std::filesystem::create_directories(config.output_dir);
    std::ostringstream log;

    ExperimentResult result;
    if (config.method == "codecl")
        result.report = run_codecl(model, tasks, schedule, &log);
    else
        result.report = run_naive(model, tasks, schedule, &log);
    result.memory = memory_report(result.report.bank, model);
    result.acc_value = acc(result.report.matrix);
    result.bwt_value = bwt(result.report.matrix);

    nlohmann::json overlap = nlohmann::json::array();
    for (std::size_t t = 0; t < result.report.decisions.size(); ++t)
        for (std::size_t l = 0; l < result.report.decisions[t].layers.size(); ++l) {
            const LayerOverlap& lo = result.report.decisions[t].layers[l];
            overlap.push_back(
                {{"task", t + 1},
                 {"layer", l},
                 {"ratio", lo.ratio},
                 {"case", lo.correlation == OverlapCase::HighCorrelation
                              ? "high_correlation"
                              : "low_correlation"}});
        }
    nlohmann::json metrics{{"acc", result.acc_value},
                           {"bwt", result.bwt_value},
                           {"task_wall_seconds", result.report.task_seconds},
                           {"overlap", overlap},
                           {"memory", memory_report_to_json(result.memory)}};

    detail::write_atomic(config.output_dir / "accuracy_matrix.csv",
                         accuracy_matrix_to_csv(result.report.matrix));
    detail::write_atomic(config.output_dir / "metrics.json", metrics.dump(2) + "\n");
    detail::write_atomic(config.output_dir / "config.json",
                         config_to_json(config).dump(2) + "\n");
    detail::write_atomic(config.output_dir / "train_log.jsonl", log.str());
    save_model(model, config.output_dir / "model.json");
    return result;
}

}  // namespace codecl
