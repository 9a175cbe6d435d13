#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "codecl/experiment.hpp"

using namespace codecl;

namespace {

namespace fs = std::filesystem;

AccuracyMatrix example_matrix() {
    AccuracyMatrix m(2);
    m.set_row(0, {0.9});
    m.set_row(1, {0.88, 0.92});
    return m;
}

fs::path fresh_out_dir(const std::string& tag) {
    const fs::path dir = fs::temp_directory_path() / ("codecl_harness_" + tag);
    fs::remove_all(dir);
    return dir;
}

ExperimentConfig synthetic_config(const std::string& tag) {
    ExperimentConfig config;
    config.benchmark = "synthetic";
    config.method = "codecl";
    config.tasks = 3;
    config.seed = 5;
    config.hidden_dims = {16};
    config.output_dir = fresh_out_dir(tag);
    config.schedule.eta0 = 0.1;
    config.schedule.batch_size = 32;
    config.schedule.epochs = 5;
    config.schedule.conceptor_batch = 200;
    config.schedule.free_dims = 4;
    config.synthetic.input_dim = 32;
    config.synthetic.samples_per_task = 600;
    config.synthetic.overlap = 0.5;
    return config;
}

}  // namespace

TEST_CASE("acc and bwt") {
    SECTION("worked example") {
        const AccuracyMatrix m = example_matrix();
        REQUIRE(acc(m) == Catch::Approx(0.90).margin(1e-12));
        REQUIRE(bwt(m) == Catch::Approx(-0.02).margin(1e-12));
    }
    SECTION("perfect matrix") {
        AccuracyMatrix m(3);
        m.set_row(0, {1.0});
        m.set_row(1, {1.0, 1.0});
        m.set_row(2, {1.0, 1.0, 1.0});
        REQUIRE(acc(m) == 1.0);
        REQUIRE(bwt(m) == 0.0);
    }
    SECTION("incomplete matrix is a state error") {
        AccuracyMatrix m(2);
        m.set_row(0, {0.9});
        REQUIRE_THROWS_AS(acc(m), StateError);
        REQUIRE_THROWS_AS(bwt(m), StateError);
    }
}

TEST_CASE("accuracy matrix CSV round-trip") {
    const AccuracyMatrix m = example_matrix();
    const std::string csv = accuracy_matrix_to_csv(m);
    SECTION("cells above the diagonal are empty") {
        REQUIRE(csv == "0.900000,\n0.880000,0.920000\n");
    }
    SECTION("read-back reproduces the matrix exactly") {
        std::istringstream in(csv);
        const AccuracyMatrix back = accuracy_matrix_from_csv(in);
        REQUIRE(back.task_count() == 2);
        for (int j = 0; j < 2; ++j)
            for (int i = 0; i <= j; ++i) REQUIRE(back.at(j, i) == m.at(j, i));
    }
    SECTION("non-triangular CSV is rejected") {
        std::istringstream bad("0.5,0.5\n0.5,0.5\n");
        REQUIRE_THROWS_AS(accuracy_matrix_from_csv(bad), DataError);
    }
}

TEST_CASE("config parsing and validation") {
    SECTION("field errors name the field") {
        nlohmann::json j{{"benchmark", "cifar"}};
        REQUIRE_THROWS_WITH(config_from_json(j),
                            Catch::Matchers::ContainsSubstring("benchmark"));
        REQUIRE_THROWS_WITH(config_from_json(nlohmann::json{{"tasks", 0}}),
                            Catch::Matchers::ContainsSubstring("tasks"));
        REQUIRE_THROWS_WITH(config_from_json(nlohmann::json{{"input_gain", -1.0}}),
                            Catch::Matchers::ContainsSubstring("input_gain"));
    }
    SECTION("round-trips through JSON") {
        ExperimentConfig config = synthetic_config("cfg");
        const ExperimentConfig back = config_from_json(config_to_json(config));
        REQUIRE(back.benchmark == config.benchmark);
        REQUIRE(back.tasks == config.tasks);
        REQUIRE(back.schedule.free_dims == config.schedule.free_dims);
        REQUIRE(back.synthetic.overlap == config.synthetic.overlap);
    }
}

TEST_CASE("memory report arithmetic") {
    std::mt19937_64 rng(1);
    MlpModel model = MlpModel::glorot_uniform({784, 10}, rng);

    SECTION("one layer n=784, K=80, T=10") {
        ConceptorBank bank;
        bank.conceptors = {Conceptor::zero(784)};
        for (int t = 0; t < 10; ++t)
            bank.archive.push_back(
                AdapterRecord{t, 0, Matrix::Zero(784, 80), Matrix::Zero(80, 80)});
        const MemoryReport report = memory_report(bank, model);
        REQUIRE(report.conceptor_total == 614656);
        REQUIRE(report.adapter_total == 691200);
        REQUIRE(report.total == 614656 + 691200);
    }
    SECTION("no adapters means zero adapter floats") {
        ConceptorBank bank;
        bank.conceptors = {Conceptor::zero(784)};
        const MemoryReport report = memory_report(bank, model);
        REQUIRE(report.adapter_total == 0);
    }
    SECTION("totals equal the sum over layers") {
        std::mt19937_64 rng2(2);
        MlpModel deep = MlpModel::glorot_uniform({8, 6, 4}, rng2);
        ConceptorBank bank;
        bank.conceptors = {Conceptor::zero(8), Conceptor::zero(6)};
        bank.archive.push_back(AdapterRecord{1, 1, Matrix::Zero(6, 2), Matrix::Zero(2, 2)});
        const MemoryReport report = memory_report(bank, deep);
        std::size_t conceptors = 0, adapters = 0;
        for (const LayerMemory& lm : report.layers) {
            conceptors += lm.conceptor_floats;
            adapters += lm.adapter_floats;
        }
        REQUIRE(report.conceptor_total == conceptors);
        REQUIRE(report.adapter_total == adapters);
        REQUIRE(report.conceptor_total == 64 + 36);
        REQUIRE(report.adapter_total == 16);
    }
}

TEST_CASE("run_experiment on the synthetic benchmark") {
    ExperimentConfig config = synthetic_config("smoke");
    const ExperimentResult result = run_experiment(config);

    SECTION("all artifacts exist and parse") {
        for (const char* name :
             {"accuracy_matrix.csv", "metrics.json", "config.json", "model.json",
              "train_log.jsonl"})
            REQUIRE(fs::exists(config.output_dir / name));
        std::ifstream csv(config.output_dir / "accuracy_matrix.csv");
        const AccuracyMatrix m = accuracy_matrix_from_csv(csv);
        REQUIRE(m.task_count() == 3);
        std::ifstream mj(config.output_dir / "metrics.json");
        nlohmann::json metrics;
        mj >> metrics;
        REQUIRE(metrics.at("acc").get<double>() == Catch::Approx(result.acc_value));
        REQUIRE(metrics.at("task_wall_seconds").size() == 3);
    }
    SECTION("overlap audit covers every layer of every task t >= 2") {
        std::ifstream mj(config.output_dir / "metrics.json");
        nlohmann::json metrics;
        mj >> metrics;
        // 2 layers x tasks {2, 3}.
        REQUIRE(metrics.at("overlap").size() == 4);
        for (const auto& rec : metrics.at("overlap")) {
            REQUIRE(rec.contains("ratio"));
            REQUIRE((rec.at("case") == "high_correlation" ||
                     rec.at("case") == "low_correlation"));
        }
    }
    SECTION("same seed reproduces metrics.json up to wall time") {
        ExperimentConfig again = config;
        again.output_dir = fresh_out_dir("smoke_repeat");
        run_experiment(again);
        auto stripped = [](const fs::path& p) {
            std::ifstream in(p / "metrics.json");
            nlohmann::json j;
            in >> j;
            j.erase("task_wall_seconds");
            return j.dump();
        };
        REQUIRE(stripped(config.output_dir) == stripped(again.output_dir));
        std::ifstream a(config.output_dir / "accuracy_matrix.csv");
        std::ifstream b(again.output_dir / "accuracy_matrix.csv");
        REQUIRE(std::string(std::istreambuf_iterator<char>(a), {}) ==
                std::string(std::istreambuf_iterator<char>(b), {}));
    }
    SECTION("missing data directory is a data error") {
        ExperimentConfig mnist = synthetic_config("nodata");
        mnist.benchmark = "permuted_mnist";
        mnist.data_dir = "/nonexistent/mnist";
        mnist.schedule.free_dims = 80;
        REQUIRE_THROWS_AS(run_experiment(mnist), DataError);
    }
}

TEST_CASE("naive baseline equals CODE-CL on a single task") {
    const TaskSequence seq = synthetic_subspace_tasks(16, 2, 0.0, 400, 9);
    TaskSequence single;
    single.tasks.push_back(seq.task(0));
    TrainSchedule schedule;
    schedule.eta0 = 0.1;
    schedule.batch_size = 32;
    schedule.epochs = 4;
    schedule.conceptor_batch = 100;
    schedule.free_dims = 4;
    schedule.seed = 3;
    std::mt19937_64 rng(4);
    MlpModel a = MlpModel::glorot_uniform({16, 8, 2}, rng);
    MlpModel b = a;
    const AccuracyMatrix ma = run_sequence(a, single, schedule);
    const AccuracyMatrix mb = naive_baseline(b, single, schedule);
    REQUIRE(ma.at(0, 0) == mb.at(0, 0));
}

TEST_CASE("model checkpoint round-trip") {
    std::mt19937_64 rng(6);
    MlpModel model = MlpModel::glorot_uniform({5, 4, 3}, rng);
    const Matrix g = Matrix::Identity(5, 2);
    attach_adapter(model.layer(0), g, 2);
    model.layer(0).adapter->m << 0.25, -0.5, 0.75, 1.0;

    const fs::path path = fs::temp_directory_path() / "codecl_model_roundtrip.json";
    save_model(model, path);
    const MlpModel back = load_model(path);

    REQUIRE(back.num_layers() == 2);
    for (std::size_t l = 0; l < 2; ++l)
        REQUIRE((back.layer(l).w - model.layer(l).w).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(back.layer(0).adapter.has_value());
    REQUIRE((back.layer(0).adapter->m - model.layer(0).adapter->m).cwiseAbs().maxCoeff() ==
            0.0);
    REQUIRE_FALSE(back.layer(1).adapter.has_value());

    SECTION("unrecognized format tag is rejected") {
        nlohmann::json j = model_to_json(model);
        j["format"] = "other";
        REQUIRE_THROWS_AS(model_from_json(j), DataError);
    }
}
