#pragma once

#include <string>
#include <utility>

#include "checkpoint.hpp"
#include "dataset.hpp"
#include "trainer.hpp"

namespace stdrive::xfer {

using ckpt::AblationFlags;
using ckpt::TransferBundle;

struct TrainOutput {
    net::Parameters<run_scalar> params;
    net::HiddenState<run_scalar> h0;
    train::TrainingHistory history;
};

// true for the frame-encoder weight set (conv, inception, bridge); the rest
// (lstm stacks, fc head) belongs to the sequence side
bool is_cnn_param(const std::string& name);

// From-scratch source training: fresh Xavier weights and a random start
// state, both derived from train_cfg.seed.
TrainOutput train_phase1(const net::NetworkConfig& cfg, const data::Dataset& ds,
                         const data::Dataset* val, const train::TrainConfig& tc);

// Mean final (h,c) over all sequences, each rolled out from a zero start
// state, plus a by-value copy of the weights.
TransferBundle harvest_bundle(const net::NetworkConfig& cfg, net::Parameters<run_scalar>& params,
                              const data::Dataset& ds, AblationFlags flags);

// Fresh init from seed, then overwrite per the bundle's ablation flags.
// Target config may widen input_channels 3 -> 6; the added kernels start at
// zero so unaugmented forwards match the source network. A config digest
// mismatch is reported through *warning, never an error.
std::pair<net::Parameters<run_scalar>, net::HiddenState<run_scalar>> init_phase2(
    const TransferBundle& bundle, const net::NetworkConfig& target_cfg, std::uint64_t seed,
    std::string* warning = nullptr);

// Target-domain training from a bundle. Requires the dataset's attached
// salient maps to cover exactly floor(salient_ratio * n) sequences.
TrainOutput train_phase2(const TransferBundle& bundle, const net::NetworkConfig& target_cfg,
                         const data::Dataset& ds, const data::Dataset* val,
                         const train::TrainConfig& tc, std::string* warning = nullptr);

}  // namespace stdrive::xfer
