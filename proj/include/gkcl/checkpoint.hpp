#pragma once

#include <string>

#include "gkcl/cltrain.hpp"

namespace gkcl {

// Binary checkpoint: magic + format version, run seed, scenario, full
// configuration, every parameter matrix (raw little-endian real64), prior
// and gate tables, and the task registry. Round trips are bit-exact.
// Optimizer moments are not part of the format; resumed training restarts
// them at zero.
void save_checkpoint(const ContinualLearner& learner, const std::string& path);
ContinualLearner load_checkpoint(const std::string& path);

}  // namespace gkcl
