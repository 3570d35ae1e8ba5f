#pragma once

#include <optional>
#include <string>

#include "rlbf/network.hpp"

namespace rlbf {

/// Binary model file: magic, format version, shape signature, then the raw
/// little-endian doubles of both networks.
void save_model(const AgentParams& params, const std::string& path);

/// Throws Error("model_error") on a truncated or foreign file, and on a shape
/// that differs from `expected` when one is given.
AgentParams load_model(const std::string& path,
                       const std::optional<NetworkShape>& expected = std::nullopt);

}  // namespace rlbf
