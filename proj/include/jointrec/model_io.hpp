#pragma once

#include <string>

#include "jointrec/trainer.hpp"

namespace jointrec {

/// Writes a self-describing JSON document: format version, model kind, all
/// dimension constants, and each parameter block as a named array of
/// decimal floats. The round trip is lossless.
void save_model(const ModelParams& params, const std::string& path);

ModelParams load_model(const std::string& path);

}  // namespace jointrec
