#pragma once

// Orchestrates the conceptor-based continual-learning sequence: per-task
// overlap analysis, projected training with optional intersection-subspace
// adapters, and conceptor consolidation. The task loop is sequential by
// contract; the bank is updated only between tasks.

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "codecl/conceptor.hpp"
#include "codecl/data.hpp"
#include "codecl/errors.hpp"
#include "codecl/metrics.hpp"
#include "codecl/network.hpp"

namespace codecl {

/// LR-on-plateau settings. Absent on benchmarks that train at a fixed rate.
struct PlateauConfig {
    int patience = 6;
    double decay_factor = 0.5;
    double min_lr = 1e-5;
};

struct TrainSchedule {
    double eta0 = 0.01;           // initial learning rate
    int batch_size = 100;         // b
    int epochs = 5;               // E
    std::optional<PlateauConfig> plateau;
    int conceptor_batch = 300;    // b_s
    double aperture = 3.0;        // alpha
    double epsilon = 0.5;         // overlap threshold
    int free_dims = 80;           // K
    std::uint64_t seed = 0;
    bool gaussian_adapter_init = false;
    double rank_tol = kDefaultRankTol;

    void validate(Eigen::Index smallest_input_dim) const {
        if (eta0 <= 0.0) throw ParameterError("schedule: eta0 must be positive");
        if (batch_size < 1) throw ParameterError("schedule: batch_size must be positive");
        if (epochs < 1) throw ParameterError("schedule: epochs must be positive");
        if (conceptor_batch < 1) throw ParameterError("schedule: conceptor_batch must be positive");
        if (aperture <= 0.0) throw ParameterError("schedule: aperture must be positive");
        if (epsilon <= 0.0 || epsilon >= 1.0) throw ParameterError("schedule: epsilon must lie in (0,1)");
        if (free_dims < 0) throw ParameterError("schedule: free_dims must be non-negative");
        if (free_dims > smallest_input_dim)
            throw ParameterError("schedule: free_dims exceeds smallest layer input dim");
        if (plateau) {
            if (plateau->patience < 1) throw ParameterError("schedule: patience must be positive");
            if (plateau->decay_factor <= 0.0 || plateau->decay_factor >= 1.0)
                throw ParameterError("schedule: decay_factor must lie in (0,1)");
            if (plateau->min_lr <= 0.0) throw ParameterError("schedule: min_lr must be positive");
        }
    }
};

/// Learning-rate schedule driven by a per-epoch validation metric: after
/// `patience` epochs without an absolute improvement above 1e-4 the rate is
/// multiplied by decay_factor; training stops once it falls below min_lr.
/// Without a plateau config the rate stays fixed.
class PlateauScheduler {
  public:
    PlateauScheduler(double eta0, std::optional<PlateauConfig> cfg)
        : eta_(eta0), cfg_(cfg) {}

    double eta() const { return eta_; }

    /// Feeds one epoch's validation accuracy; returns false when training
    /// should stop (rate fell below the minimum).
    bool observe(double val_accuracy) {
        if (!cfg_) return true;
        if (val_accuracy > best_ + 1e-4) {
            best_ = val_accuracy;
            stale_ = 0;
        } else if (++stale_ >= cfg_->patience) {
            eta_ *= cfg_->decay_factor;
            stale_ = 0;
        }
        return eta_ > cfg_->min_lr;
    }

  private:
    double eta_;
    std::optional<PlateauConfig> cfg_;
    double best_ = -std::numeric_limits<double>::infinity();
    int stale_ = 0;
};

/// Per-layer merged conceptors plus the per-task adapter archive. Archived
/// adapters are re-attached when a task is evaluated: the base weights only
/// ever move through projected gradients, while each task's M stays private
/// to that task.
struct AdapterRecord {
    int task = 0;
    int layer = 0;
    Matrix u;
    Matrix m;
};

struct ConceptorBank {
    std::vector<Conceptor> conceptors;
    std::vector<AdapterRecord> archive;

    bool initialized() const { return !conceptors.empty(); }
};

enum class OverlapCase { HighCorrelation, LowCorrelation };

struct LayerOverlap {
    double ratio = 0.0;
    OverlapCase correlation = OverlapCase::LowCorrelation;
    std::optional<OrthonormalBasis> basis;  // present iff HighCorrelation
};

struct OverlapDecision {
    std::vector<LayerOverlap> layers;
};

struct TaskResult {
    int epochs_run = 0;
    double final_train_loss = 0.0;
    double final_val_accuracy = 0.0;
};

inline double evaluate_accuracy(const MlpModel& model, const TaskView& task, Split split,
                                int chunk = 2000) {
    const std::vector<int>& idx = task.dataset().split(split);
    if (idx.empty()) throw DataError("evaluate_accuracy: empty split");
    std::size_t correct = 0;
    for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(chunk)) {
        const std::size_t end = std::min(idx.size(), start + static_cast<std::size_t>(chunk));
        std::vector<int> rows(idx.begin() + static_cast<long>(start),
                              idx.begin() + static_cast<long>(end));
        const ForwardTrace trace = forward(model, task.gather(rows));
        const std::vector<int> labels = task.labels_for(rows);
        for (Eigen::Index r = 0; r < trace.logits.rows(); ++r) {
            Eigen::Index pred;
            trace.logits.row(r).maxCoeff(&pred);
            if (static_cast<int>(pred) == labels[static_cast<std::size_t>(r)]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(idx.size());
}

namespace detail {

inline void log_epoch(std::ostream* log, int task, int epoch, double train_loss,
                      double val_acc, double eta) {
    if (!log) return;
    nlohmann::json rec{{"event", "epoch"}, {"task", task},      {"epoch", epoch},
                       {"train_loss", train_loss}, {"val_accuracy", val_acc}, {"eta", eta}};
    *log << rec.dump() << '\n';
}

inline void log_overlap(std::ostream* log, int task, const OverlapDecision& decision) {
    if (!log) return;
    for (std::size_t l = 0; l < decision.layers.size(); ++l) {
        nlohmann::json rec{
            {"event", "overlap"},
            {"task", task},
            {"layer", l},
            {"ratio", decision.layers[l].ratio},
            {"case", decision.layers[l].correlation == OverlapCase::HighCorrelation
                         ? "high_correlation"
                         : "low_correlation"}};
        *log << rec.dump() << '\n';
    }
}

/// Shared epoch loop for plain and projected training. `projectors`, when
/// given, holds per-layer I - C matrices applied to every weight gradient.
inline TaskResult train_loop(MlpModel& model, const TaskView& task,
                             const TrainSchedule& schedule,
                             const std::vector<Matrix>* projectors, std::mt19937_64& rng,
                             std::ostream* log, int task_id) {
    if (task.dataset().train_idx.empty()) throw DataError("training split is empty");
    EpochSampler sampler(task, Split::Train, schedule.batch_size, rng);
    const std::size_t steps = std::max<std::size_t>(1, sampler.batches_per_epoch());
    PlateauScheduler lr(schedule.eta0, schedule.plateau);
    TaskResult result;
    for (int epoch = 0; epoch < schedule.epochs; ++epoch) {
        double loss_sum = 0.0;
        for (std::size_t s = 0; s < steps; ++s) {
            auto [batch, labels] = sampler.next();
            const ForwardTrace trace = forward(model, batch);
            auto [loss, grads] = loss_and_backward(model, trace, labels);
            if (projectors)
                for (std::size_t l = 0; l < projectors->size(); ++l)
                    grads.d_w[l] = grads.d_w[l] * (*projectors)[l];
            sgd_step(model, grads, lr.eta());
            loss_sum += loss;
        }
        result.final_train_loss = loss_sum / static_cast<double>(steps);
        result.final_val_accuracy = evaluate_accuracy(model, task, Split::Validation);
        result.epochs_run = epoch + 1;
        log_epoch(log, task_id, epoch, result.final_train_loss, result.final_val_accuracy,
                  lr.eta());
        if (!lr.observe(result.final_val_accuracy)) break;
    }
    return result;
}

/// Conceptor of each layer's input batch from a fresh b_s-sample forward
/// trace through the current weights.
inline std::vector<Conceptor> layer_conceptors(const MlpModel& model, const TaskView& task,
                                               const TrainSchedule& schedule,
                                               std::mt19937_64& rng) {
    const int bs = std::min<int>(schedule.conceptor_batch,
                                 static_cast<int>(task.dataset().train_idx.size()));
    auto [batch, labels] = sample_batch(task, Split::Train, bs, rng);
    const ForwardTrace trace = forward(model, batch);
    std::vector<Conceptor> out;
    out.reserve(model.num_layers());
    for (std::size_t l = 0; l < model.num_layers(); ++l)
        out.push_back(conceptor_from_batch(trace.inputs[l], schedule.aperture));
    return out;
}

}  // namespace detail

/// Unconstrained minibatch SGD on the first task, then the bank is seeded
/// with per-layer conceptors from a b_s-sample forward trace.
inline ConceptorBank train_first_task(MlpModel& model, const TaskView& task,
                                      const TrainSchedule& schedule, std::mt19937_64& rng,
                                      std::ostream* log = nullptr) {
    schedule.validate(model.input_dim());
    detail::train_loop(model, task, schedule, nullptr, rng, log, 0);
    ConceptorBank bank;
    bank.conceptors = detail::layer_conceptors(model, task, schedule, rng);
    return bank;
}

/// Per-layer overlap between the new task's pre-training input space and
/// the bank: C_pre from a forward pass with inherited weights,
/// C_and = C_pre AND C_prev, ratio = capacity(C_and) / capacity(C_prev).
/// Ratio above epsilon marks high correlation and carries the top-K
/// directions of C_and; an empty bank conceptor yields ratio 0.
inline OverlapDecision analyze_overlap(const MlpModel& model, const ConceptorBank& bank,
                                       const TaskView& task, const TrainSchedule& schedule,
                                       std::mt19937_64& rng) {
    if (!bank.initialized()) throw StateError("analyze_overlap: bank is empty");
    const std::vector<Conceptor> pre = detail::layer_conceptors(model, task, schedule, rng);
    OverlapDecision decision;
    for (std::size_t l = 0; l < pre.size(); ++l) {
        LayerOverlap layer;
        const double prev_cap = capacity(bank.conceptors[l]);
        if (prev_cap > 0.0) {
            const Conceptor both = intersect(pre[l], bank.conceptors[l], schedule.rank_tol);
            layer.ratio = capacity(both) / prev_cap;
            if (layer.ratio > schedule.epsilon) {
                layer.correlation = OverlapCase::HighCorrelation;
                const Eigen::Index k =
                    std::min<Eigen::Index>(schedule.free_dims, both.dim());
                if (k > 0) layer.basis = top_k_directions(both, k);
                else layer.correlation = OverlapCase::LowCorrelation;
            }
        }
        decision.layers.push_back(std::move(layer));
    }
    return decision;
}

/// Trains one task with per-layer gradient projection by (I - C_prev).
/// High-correlation layers get an intersection-subspace adapter whose M is
/// optimized without constraint. Adapters stay attached on return so the
/// post-task conceptors can be traced through the effective weights; call
/// archive_adapters afterwards to store and detach them.
inline TaskResult train_task(MlpModel& model, ConceptorBank& bank,
                             const OverlapDecision& decision, const TaskView& task,
                             const TrainSchedule& schedule, std::mt19937_64& rng,
                             std::ostream* log = nullptr, int task_id = 0) {
    if (decision.layers.size() != model.num_layers())
        throw ParameterError("train_task: decision does not match model");
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        const LayerOverlap& layer = decision.layers[l];
        if (layer.correlation == OverlapCase::HighCorrelation && layer.basis)
            attach_adapter(model.layer(l), *layer.basis, layer.basis->cols(),
                           schedule.gaussian_adapter_init ? &rng : nullptr);
    }
    std::vector<Matrix> projectors;
    projectors.reserve(bank.conceptors.size());
    for (const Conceptor& c : bank.conceptors)
        projectors.push_back(Matrix::Identity(c.dim(), c.dim()) - c.matrix);

    TaskResult result =
        detail::train_loop(model, task, schedule, &projectors, rng, log, task_id);

    return result;
}

/// Moves any attached adapters into the bank archive under task_id and
/// detaches them, leaving the base weights untouched.
inline void archive_adapters(MlpModel& model, ConceptorBank& bank, int task_id) {
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        if (model.layer(l).adapter) {
            bank.archive.push_back(AdapterRecord{task_id, static_cast<int>(l),
                                                 model.layer(l).adapter->u,
                                                 model.layer(l).adapter->m});
            model.layer(l).adapter.reset();
        }
    }
}

/// Copy of the model with task_id's archived adapters re-attached: the
/// effective weights under which that task was learned.
inline MlpModel effective_model_for_task(const MlpModel& model, const ConceptorBank& bank,
                                         int task_id) {
    MlpModel eff = model;
    for (const AdapterRecord& rec : bank.archive) {
        if (rec.task != task_id) continue;
        LinearLayer& layer = eff.layer(static_cast<std::size_t>(rec.layer));
        attach_adapter(layer, rec.u, rec.u.cols());
        layer.adapter->m = rec.m;
    }
    return eff;
}

/// Post-task consolidation: C_post from a fresh forward trace with the
/// final weights, then per-layer C <- C_post OR C_prev.
inline void consolidate(const MlpModel& model, ConceptorBank& bank, const TaskView& task,
                        const TrainSchedule& schedule, std::mt19937_64& rng) {
    const std::vector<Conceptor> post = detail::layer_conceptors(model, task, schedule, rng);
    for (std::size_t l = 0; l < post.size(); ++l)
        bank.conceptors[l] = unite(post[l], bank.conceptors[l], schedule.rank_tol);
}

struct RunReport {
    AccuracyMatrix matrix;
    std::vector<OverlapDecision> decisions;  // decisions[t-1] belongs to task t, t >= 1
    std::vector<double> task_seconds;
    ConceptorBank bank;
};

/// Full continual-learning sequence: first-task path, then per task the
/// overlap analysis / projected training / consolidation steps. After each
/// task t the model is evaluated on the test splits of tasks 0..t.
inline RunReport run_codecl(MlpModel& model, const TaskSequence& tasks,
                            const TrainSchedule& schedule, std::ostream* log = nullptr) {
    if (tasks.size() < 1) throw ParameterError("run_codecl: need at least one task");
    schedule.validate(model.input_dim());
    std::mt19937_64 rng(schedule.seed);
    RunReport report;
    report.matrix = AccuracyMatrix(static_cast<int>(tasks.size()));

    ConceptorBank bank;
    // Each task is evaluated under its own effective weights: the shared
    // base plus that task's archived adapters, if any.
    auto fill_row = [&](int t) {
        std::vector<double> row;
        for (int i = 0; i <= t; ++i) {
            const MlpModel eff = effective_model_for_task(model, bank, i);
            row.push_back(evaluate_accuracy(eff, tasks.task(static_cast<std::size_t>(i)),
                                            Split::Test));
        }
        report.matrix.set_row(t, std::move(row));
    };

    using clock = std::chrono::steady_clock;
    auto t0 = clock::now();
    bank = train_first_task(model, tasks.task(0), schedule, rng, log);
    fill_row(0);
    report.task_seconds.push_back(std::chrono::duration<double>(clock::now() - t0).count());

    for (std::size_t t = 1; t < tasks.size(); ++t) {
        t0 = clock::now();
        OverlapDecision decision =
            analyze_overlap(model, bank, tasks.task(t), schedule, rng);
        detail::log_overlap(log, static_cast<int>(t), decision);
        train_task(model, bank, decision, tasks.task(t), schedule, rng, log,
                   static_cast<int>(t));
        consolidate(model, bank, tasks.task(t), schedule, rng);
        archive_adapters(model, bank, static_cast<int>(t));
        fill_row(static_cast<int>(t));
        report.task_seconds.push_back(
            std::chrono::duration<double>(clock::now() - t0).count());
        report.decisions.push_back(std::move(decision));
    }
    report.bank = std::move(bank);
    return report;
}

inline AccuracyMatrix run_sequence(MlpModel& model, const TaskSequence& tasks,
                                   const TrainSchedule& schedule,
                                   std::ostream* log = nullptr) {
    return run_codecl(model, tasks, schedule, log).matrix;
}

/// Control arm: the identical task loop with projection disabled, no
/// conceptors and no adapters.
inline RunReport run_naive(MlpModel& model, const TaskSequence& tasks,
                           const TrainSchedule& schedule, std::ostream* log = nullptr) {
    if (tasks.size() < 1) throw ParameterError("run_naive: need at least one task");
    schedule.validate(model.input_dim());
    std::mt19937_64 rng(schedule.seed);
    RunReport report;
    report.matrix = AccuracyMatrix(static_cast<int>(tasks.size()));
    using clock = std::chrono::steady_clock;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        auto t0 = clock::now();
        detail::train_loop(model, tasks.task(t), schedule, nullptr, rng, log,
                           static_cast<int>(t));
        std::vector<double> row;
        for (std::size_t i = 0; i <= t; ++i)
            row.push_back(evaluate_accuracy(model, tasks.task(i), Split::Test));
        report.matrix.set_row(static_cast<int>(t), std::move(row));
        report.task_seconds.push_back(
            std::chrono::duration<double>(clock::now() - t0).count());
    }
    return report;
}

}  // namespace codecl
