#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "network.hpp"

namespace stdrive::train {

enum class Optimizer { Adam, Sgd };
enum class LossKind { CrossEntropy, SquaredError };

Optimizer optimizer_from(const std::string& s);
const char* optimizer_name(Optimizer o);
LossKind loss_for_head(net::Head h);

struct TrainConfig {
    int epochs = 10;
    int batch_size = 8;
    double lr = 1e-3;
    Optimizer optimizer = Optimizer::Adam;
    std::uint64_t seed = 1;
    double salient_ratio = 0.10;  // phase-2 map coverage; ignored by the loop itself
    LossKind loss = LossKind::CrossEntropy;

    bool track_train_metric = true;       // per-epoch sweep over the training set
    double stop_at_train_accuracy = 0.0;  // early stop once reached (0 = run all epochs)
    int log_every = 0;                    // progress line every k epochs (0 = quiet)
};

struct EpochStats {
    int epoch = 0;         // 1-based
    double loss = 0.0;     // mean per-sequence training loss
    double train_metric = -1.0;  // accuracy, or MAE in degrees; -1 when not tracked
    double val_metric = -1.0;
    double seconds = 0.0;
};

struct TrainingHistory {
    std::vector<EpochStats> epochs;
    int epochs_to_95 = -1;  // first epoch reaching 95% train accuracy, -1 if never
};

struct EvalResult {
    double metric = 0.0;  // accuracy in [0,1], or MAE in degrees
    int total = 0;
    int correct = 0;                            // classification only
    std::array<std::array<int, 2>, 2> confusion{};  // [true label][predicted]
};

// Forward-only sweep. Ties classify as safe (class 0).
EvalResult evaluate(const net::NetworkConfig& cfg, net::Parameters<run_scalar>& params,
                    const net::HiddenState<run_scalar>& h0, const data::Dataset& ds);

// Minibatch training loop shared by both pipeline phases. Updates params in
// place; h0 is the fixed start state for every sequence. val may be null.
TrainingHistory train(const net::NetworkConfig& cfg, net::Parameters<run_scalar>& params,
                      const net::HiddenState<run_scalar>& h0, const data::Dataset& ds,
                      const data::Dataset* val, const TrainConfig& tc);

}  // namespace stdrive::train
