#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sapr/dataset.hpp"
#include "sapr/parallel.hpp"
#include "sapr/rng.hpp"
#include "sapr/tensor.hpp"
#include "sapr/vit.hpp"

namespace sapr {

struct TrainOptions {
    std::size_t epochs = 20;
    std::size_t batch_size = 16;
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::uint64_t seed = 0;
    std::size_t workers = 0; // 0 = hardware concurrency
};

struct EpochStats {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> curve;
};

/// Accuracy of `model.predict` over a dataset; deterministic inference.
template <typename Model>
double classification_accuracy(const Model& model, const Dataset& data, std::size_t workers = 0) {
    if (data.count() == 0) throw ContractError("classification_accuracy: empty dataset");
    std::vector<unsigned char> hit(data.count(), 0);
    parallel_for(data.count(), workers, [&](std::size_t i) {
        hit[i] = model.predict(data.image(i)) == data.label(i) ? 1 : 0;
    });
    std::size_t correct = 0;
    for (unsigned char h : hit) correct += h;
    return static_cast<double>(correct) / static_cast<double>(data.count());
}

/// Mini-batch SGD with momentum on the cross-entropy loss.
///
/// Per-sample forward/backward passes run in parallel with gradients captured
/// in per-sample maps (weights are shared read-only); the reduction then sums
/// sample gradients in index order, so the result is bit-identical for any
/// worker count. Restructuring never runs here: training uses the plain
/// inference forward.
template <typename Model>
TrainResult train_model(Model& model, const Dataset& data, const TrainOptions& opts) {
    if (data.count() == 0) throw ContractError("train_model: empty dataset");
    if (opts.batch_size == 0) throw ConfigError("train_model: batch_size must be positive");

    model.set_requires_grad(true);
    auto named = model.named_parameters();
    std::vector<Tensor> params;
    params.reserve(named.size());
    for (auto& [name, t] : named) params.push_back(t);
    std::vector<std::vector<double>> velocity(params.size());
    for (std::size_t p = 0; p < params.size(); ++p) velocity[p].assign(params[p].size(), 0.0);

    TrainResult result;
    RngStream shuffle_rng(opts.seed, {0x7368756666ull}); // "shuff"
    const std::size_t count = data.count();

    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        std::vector<std::size_t> order = shuffle_rng.permutation(count);
        double loss_sum = 0.0;
        std::size_t correct = 0;

        for (std::size_t start = 0; start < count; start += opts.batch_size) {
            const std::size_t batch = std::min(opts.batch_size, count - start);
            std::vector<GradMap> grads(batch);
            std::vector<double> losses(batch, 0.0);
            std::vector<unsigned char> hits(batch, 0);

            parallel_for(batch, opts.workers, [&](std::size_t b) {
                const std::size_t idx = order[start + b];
                Tensor logits = model.forward(data.image(idx));
                Tensor loss = cross_entropy_loss(logits, data.label(idx));
                losses[b] = loss.item();
                hits[b] = argmax_index(logits) == data.label(idx) ? 1 : 0;
                backward_into(loss, grads[b]);
            });

            for (std::size_t b = 0; b < batch; ++b) {
                if (!std::isfinite(losses[b]))
                    throw NumericError("training diverged: non-finite loss at epoch " +
                                       std::to_string(epoch));
                loss_sum += losses[b];
                correct += hits[b];
            }

            const double inv_batch = 1.0 / static_cast<double>(batch);
            for (std::size_t p = 0; p < params.size(); ++p) {
                auto w = params[p].values_mut();
                auto& vel = velocity[p];
                std::vector<double> gsum(w.size(), 0.0);
                for (std::size_t b = 0; b < batch; ++b) {
                    auto g = grads[b].grad(params[p]);
                    for (std::size_t i = 0; i < g.size(); ++i) gsum[i] += g[i];
                }
                for (std::size_t i = 0; i < w.size(); ++i) {
                    vel[i] = opts.momentum * vel[i] + gsum[i] * inv_batch;
                    w[i] -= opts.learning_rate * vel[i];
                }
            }
        }

        result.curve.push_back({epoch, loss_sum / static_cast<double>(count),
                                static_cast<double>(correct) / static_cast<double>(count)});
    }
    model.set_requires_grad(false);
    return result;
}

} // namespace sapr
