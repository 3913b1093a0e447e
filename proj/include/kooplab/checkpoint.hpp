#pragma once

#include <filesystem>

#include "kooplab/autodiff.hpp"

namespace kooplab {

// Binary checkpoint: magic "KTLCKPT1", then a manifest of (name, shape,
// offset) entries, then one little-endian f64 blob holding all tensors.
void save_checkpoint(const ParamStore& params, const std::filesystem::path& path);
ParamStore load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const ParamStore& params);
ParamStore deserialize_checkpoint(const std::string& bytes);

}  // namespace kooplab
