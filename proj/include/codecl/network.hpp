#pragma once

// Bias-free multilayer perceptron with manual backpropagation. Layers hold
// base weights W (out x in) and an optional low-rank adapter (U, M) giving
// effective weights W_eff = W + W U M U^T confined to the task-intersection
// subspace. Forward computes y = W x per sample; conceptors act on the input
// (column) side, so gradient projection right-multiplies.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "codecl/conceptor.hpp"
#include "codecl/errors.hpp"

namespace codecl {

struct Adapter {
    Matrix u;  // in x K, orthonormal columns
    Matrix m;  // K x K
};

struct LinearLayer {
    Matrix w;  // out x in
    std::optional<Adapter> adapter;

    Eigen::Index in_dim() const { return w.cols(); }
    Eigen::Index out_dim() const { return w.rows(); }

    Matrix effective_weight() const {
        if (!adapter) return w;
        return w + w * adapter->u * adapter->m * adapter->u.transpose();
    }
};

class MlpModel {
  public:
    MlpModel() = default;
    explicit MlpModel(std::vector<LinearLayer> layers) : layers_(std::move(layers)) {
        for (std::size_t l = 1; l < layers_.size(); ++l)
            if (layers_[l].in_dim() != layers_[l - 1].out_dim())
                throw ParameterError("layer dimensions do not chain");
    }

    /// Builds a model from a dimension chain, e.g. {784, 100, 100, 10}, with
    /// weights drawn uniformly in +-sqrt(6 / (fan_in + fan_out)).
    static MlpModel glorot_uniform(const std::vector<Eigen::Index>& dims,
                                   std::mt19937_64& rng) {
        if (dims.size() < 2) throw ParameterError("model needs at least one layer");
        std::vector<LinearLayer> layers;
        for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
            const Eigen::Index in = dims[i], out = dims[i + 1];
            const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
            std::uniform_real_distribution<double> dist(-bound, bound);
            Matrix w(out, in);
            for (Eigen::Index r = 0; r < out; ++r)
                for (Eigen::Index c = 0; c < in; ++c) w(r, c) = dist(rng);
            layers.push_back({std::move(w), std::nullopt});
        }
        return MlpModel(std::move(layers));
    }

    std::size_t num_layers() const { return layers_.size(); }
    LinearLayer& layer(std::size_t l) { return layers_.at(l); }
    const LinearLayer& layer(std::size_t l) const { return layers_.at(l); }
    Eigen::Index input_dim() const { return layers_.front().in_dim(); }
    Eigen::Index output_dim() const { return layers_.back().out_dim(); }

  private:
    std::vector<LinearLayer> layers_;
};

/// Per-layer inputs and pre-activations recorded during a forward pass.
/// inputs[l] is the batch seen by layer l (b x in_l); preacts[l] is the
/// batch's pre-activation output of layer l; logits alias the last
/// pre-activation (softmax is applied in the loss).
struct ForwardTrace {
    std::vector<Matrix> inputs;
    std::vector<Matrix> preacts;
    Matrix logits;
};

struct GradientSet {
    std::vector<Matrix> d_w;
    std::vector<std::optional<Matrix>> d_m;
};

inline ForwardTrace forward(const MlpModel& model, const FeatureBatch& batch) {
    if (batch.cols() != model.input_dim())
        throw ParameterError("batch feature dimension does not match first layer");
    ForwardTrace trace;
    Matrix x = batch;
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        trace.inputs.push_back(x);
        Matrix z = x * model.layer(l).effective_weight().transpose();
        if (l + 1 < model.num_layers()) x = z.cwiseMax(0.0);
        trace.preacts.push_back(std::move(z));
    }
    trace.logits = trace.preacts.back();
    return trace;
}

/// Mean softmax cross-entropy over the batch and its gradients. dW is the
/// gradient through W_eff including the adapter path:
///   dL/dW = G + G U M^T U^T,  dL/dM = U^T W^T G U,  G = dL/dW_eff.
inline std::pair<double, GradientSet> loss_and_backward(const MlpModel& model,
                                                        const ForwardTrace& trace,
                                                        const std::vector<int>& labels) {
    const Eigen::Index b = trace.logits.rows();
    const Eigen::Index classes = trace.logits.cols();
    if (static_cast<Eigen::Index>(labels.size()) != b)
        throw ParameterError("label count does not match batch size");
    for (int y : labels)
        if (y < 0 || y >= classes) throw DataError("label out of range");

    // Softmax with the usual max-shift; delta = (softmax - onehot) / b.
    Matrix probs = trace.logits;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        const double mx = probs.row(i).maxCoeff();
        probs.row(i) = (probs.row(i).array() - mx).exp();
        const double z = probs.row(i).sum();
        probs.row(i) /= z;
        loss -= std::log(std::max(probs(i, labels[static_cast<std::size_t>(i)]), 1e-300));
    }
    loss /= static_cast<double>(b);
    Matrix delta = probs;
    for (Eigen::Index i = 0; i < b; ++i) delta(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
    delta /= static_cast<double>(b);

    GradientSet grads;
    grads.d_w.resize(model.num_layers());
    grads.d_m.resize(model.num_layers());
    for (std::size_t l = model.num_layers(); l-- > 0;) {
        const LinearLayer& layer = model.layer(l);
        const Matrix g = delta.transpose() * trace.inputs[l];  // dL/dW_eff
        if (layer.adapter) {
            const Matrix& u = layer.adapter->u;
            grads.d_w[l] = g + g * u * layer.adapter->m.transpose() * u.transpose();
            grads.d_m[l] = u.transpose() * layer.w.transpose() * g * u;
        } else {
            grads.d_w[l] = g;
        }
        if (l > 0) {
            Matrix dx = delta * layer.effective_weight();
            delta = (trace.preacts[l - 1].array() > 0.0).cast<double>() * dx.array();
        }
    }
    return {loss, std::move(grads)};
}

/// Projects each layer's weight gradient onto the complement of the stored
/// conceptor: dW <- dW (I - C). Adapter gradients are left untouched.
inline void project_gradients(GradientSet& grads, const std::vector<Conceptor>& bank) {
    if (grads.d_w.size() != bank.size())
        throw ParameterError("project_gradients: layer count mismatch");
    for (std::size_t l = 0; l < bank.size(); ++l) {
        if (grads.d_w[l].cols() != bank[l].dim())
            throw ParameterError("project_gradients: conceptor dimension mismatch");
        grads.d_w[l] -= grads.d_w[l] * bank[l].matrix;
    }
}

inline void sgd_step(MlpModel& model, const GradientSet& grads, double eta) {
    if (eta <= 0.0) throw ParameterError("learning rate must be positive");
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        model.layer(l).w -= eta * grads.d_w[l];
        if (grads.d_m[l]) {
            if (!model.layer(l).adapter) throw ParameterError("dM present without adapter");
            model.layer(l).adapter->m -= eta * *grads.d_m[l];
        }
    }
}

/// Installs a (U, M) adapter on a layer. M starts at zero so the effective
/// weights equal the base weights at task start; an optional small Gaussian
/// init is available instead.
inline void attach_adapter(LinearLayer& layer, const OrthonormalBasis& u, Eigen::Index k,
                           std::mt19937_64* gaussian_init_rng = nullptr) {
    if (u.cols() != k || u.rows() != layer.in_dim())
        throw ParameterError("attach_adapter: basis shape does not match layer");
    const double ortho_err =
        (u.transpose() * u - Matrix::Identity(k, k)).cwiseAbs().maxCoeff();
    if (ortho_err > 1e-8) throw ParameterError("attach_adapter: columns not orthonormal");
    Matrix m = Matrix::Zero(k, k);
    if (gaussian_init_rng) {
        std::normal_distribution<double> dist(0.0, 1e-3);
        for (Eigen::Index r = 0; r < k; ++r)
            for (Eigen::Index c = 0; c < k; ++c) m(r, c) = dist(*gaussian_init_rng);
    }
    layer.adapter = Adapter{u, std::move(m)};
}

/// Absorbs the adapter into the base weights, W <- W + W U M U^T, and
/// removes it. The layer computes the identical function afterwards.
/// No-op when no adapter is present.
inline void fold_adapter(LinearLayer& layer) {
    if (!layer.adapter) return;
    layer.w = layer.effective_weight();
    layer.adapter.reset();
}

}  // namespace codecl
