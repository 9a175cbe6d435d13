// Command-line entry point.
//
//   codecl run --config <file> [--data-dir <dir>] [--seed N] [--out <dir>]
//   codecl algebra-check [--pairs N] [--seed N]
//   codecl report --out <dir>
//
// Exit codes: 0 success, 1 data/config error, 2 internal invariant violation.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "codecl/algebra_check.hpp"
#include "codecl/experiment.hpp"

namespace {

int cmd_run(const std::string& config_path, const std::string& data_dir,
            const std::string& out_dir, long long seed) {
    codecl::ExperimentConfig config = codecl::load_config(config_path);
    if (!data_dir.empty()) config.data_dir = data_dir;
    if (!out_dir.empty()) config.output_dir = out_dir;
    if (seed >= 0) config.seed = static_cast<std::uint64_t>(seed);
    const codecl::ExperimentResult result = codecl::run_experiment(config);
    std::printf("benchmark=%s method=%s tasks=%d seed=%llu\n", config.benchmark.c_str(),
                config.method.c_str(), config.tasks,
                static_cast<unsigned long long>(config.seed));
    std::printf("ACC=%.4f BWT=%.4f (artifacts in %s)\n", result.acc_value,
                result.bwt_value, config.output_dir.string().c_str());
    return 0;
}

int cmd_algebra_check(int pairs, long long seed) {
    const codecl::AlgebraCheckReport report =
        codecl::run_algebra_check(pairs, seed >= 0 ? static_cast<std::uint64_t>(seed) : 0);
    for (const auto& p : report.properties)
        std::printf("[%s] %-42s worst=%.3e tol=%.0e\n", p.pass() ? "PASS" : "FAIL",
                    p.name.c_str(), p.worst, p.tolerance);
    std::printf("%s: %d property checks on %d random pairs\n",
                report.all_pass() ? "PASS" : "FAIL",
                static_cast<int>(report.properties.size()), report.pairs);
    return report.all_pass() ? 0 : 2;
}

int cmd_report(const std::string& out_dir) {
    std::ifstream in(std::filesystem::path(out_dir) / "accuracy_matrix.csv");
    if (!in) throw codecl::DataError("cannot open accuracy_matrix.csv in " + out_dir);
    const codecl::AccuracyMatrix matrix = codecl::accuracy_matrix_from_csv(in);
    std::printf("tasks=%d ACC=%.4f BWT=%.4f\n", matrix.task_count(), codecl::acc(matrix),
                codecl::bwt(matrix));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conceptor-based continual learning experiments"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, report_dir;
    long long seed = -1;
    int pairs = 1000;

    CLI::App* run = app.add_subcommand("run", "Run a configured experiment");
    run->add_option("--config", config_path, "JSON experiment config")->required();
    run->add_option("--data-dir", data_dir, "MNIST IDX data directory");
    run->add_option("--seed", seed, "Override the config seed");
    run->add_option("--out", out_dir, "Override the output directory");

    CLI::App* check = app.add_subcommand("algebra-check",
                                         "Run the conceptor property suite on random matrices");
    check->add_option("--pairs", pairs, "Number of random conceptor pairs");
    check->add_option("--seed", seed, "RNG seed");

    CLI::App* rep = app.add_subcommand("report", "Recompute ACC/BWT from a run's CSV");
    rep->add_option("--out", report_dir, "Run output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, data_dir, out_dir, seed);
        if (check->parsed()) return cmd_algebra_check(pairs, seed);
        return cmd_report(report_dir);
    } catch (const codecl::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 1;
    } catch (const codecl::ParameterError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 2;
    }
}
