#pragma once

#include <cstdint>
#include <string>

#include "container.hpp"
#include "network.hpp"

namespace stdrive::ckpt {

// canonical key=value text used for digests and container manifests
std::string config_to_text(const net::NetworkConfig& cfg);
net::NetworkConfig config_from_text(const std::string& text);
std::uint64_t config_digest(const net::NetworkConfig& cfg);

struct Checkpoint {
    net::NetworkConfig cfg;
    net::Parameters<run_scalar> params;
    net::HiddenState<run_scalar> h0;
};

void save_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::string& path);

struct AblationFlags {
    bool cnn = true;     // conv, inception, and bridge weights
    bool lstm = true;    // lstm stacks and fc head
    bool hidden = true;  // harvested hidden-state initialization
};

struct TransferBundle {
    net::NetworkConfig source_cfg;
    net::Parameters<run_scalar> params;
    net::HiddenState<run_scalar> harvested;  // mean final state over the source set
    AblationFlags flags;
    std::uint64_t source_digest = 0;
};

void save_bundle(const std::string& path, const TransferBundle& b);
TransferBundle load_bundle(const std::string& path);

}  // namespace stdrive::ckpt
