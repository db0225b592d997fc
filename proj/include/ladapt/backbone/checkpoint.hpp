#pragma once

#include <filesystem>

#include "ladapt/autodiff/parameters.hpp"
#include "ladapt/backbone/config.hpp"

namespace ladapt {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  BackboneConfig config;
  ParameterValues parameters;
};

/// JSON document:
///   {"format": "ladapt-checkpoint", "version": 1, "config": {...},
///    "parameters": {"layers.3.ffn.fc1.weight": {"shape": [..], "values": [..]}, ...}}
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// Throws ConfigError on missing/unsupported version, malformed entries or
/// shape/value length mismatch; std::runtime_error on IO failure.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ladapt
