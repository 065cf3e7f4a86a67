#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mimic/ssm/layer.hpp"

namespace mimic::ssm {

// Single-file checkpoint: magic line, u64 LE manifest length, JSON manifest,
// then raw little-endian f32 tensor payloads in registry order. The manifest
// pins tensor names and sizes so a loader can reject a mismatched model.
struct CheckpointMeta {
    nlohmann::json config;  // model + training configuration, stored verbatim
    std::string vocab_hash; // hex digest of the token vocabulary layout
    int trained_epochs = 0;
};

void save_checkpoint(const std::string& path,
                     const std::vector<ParamRef<float>>& params,
                     const CheckpointMeta& meta);

// Fills the registered parameter tensors in place. Throws std::runtime_error
// on bad magic, manifest mismatch, or truncated payload.
CheckpointMeta load_checkpoint(const std::string& path,
                               std::vector<ParamRef<float>>& params);

// Reads just the manifest (cheap; no tensor payloads).
nlohmann::json read_checkpoint_manifest(const std::string& path);

} // namespace mimic::ssm
