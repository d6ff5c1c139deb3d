#pragma once

// SPDX-License-Identifier: Apache-2.0

/// \file riskpath.hpp
/// Main interface: hierarchical risk taxonomy, structured-transcript
/// parsing, soft-margin rewards, the toy two-stage policy, group-relative
/// policy training, synthetic corpora, the cascade pipeline, and metrics.

#include <string>

namespace riskpath {
inline std::string version() { return "0.1.0"; }
}  // namespace riskpath

#include "riskpath/corpus.hpp"
#include "riskpath/demo_taxonomy.hpp"
#include "riskpath/metrics.hpp"
#include "riskpath/pipeline.hpp"
#include "riskpath/policy.hpp"
#include "riskpath/reward.hpp"
#include "riskpath/rng.hpp"
#include "riskpath/taxonomy.hpp"
#include "riskpath/trainer.hpp"
#include "riskpath/transcript.hpp"
#include "riskpath/util.hpp"
