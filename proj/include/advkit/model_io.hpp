#pragma once

#include <string>

#include "advkit/model.hpp"

namespace advkit {

// Versioned little-endian binary weight file:
//   magic "ADVF" | u32 version (=1) | u32 layer count L | u32 dims[L+1]
//   | f32 logit_scale | per layer: f32 weights (rows x cols, row-major), f32 bias (rows)
// Round trips are bit-exact.
void save_weights(const Classifier& m, const std::string& path);
Classifier load_weights(const std::string& path);

} // namespace advkit
