// SPDX-License-Identifier: Apache-2.0
//
// Self-check suite run by `dfrc validate`: model identities on small random
// scenes, filter optimality, the surrogate bound and solver sanity cases.

#pragma once

#include "dfrc/scenario.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace dfrc {

struct CheckResult {
  std::string name;
  double worst = 0.0;      // largest observed error
  double threshold = 0.0;  // pass iff worst <= threshold
  int cases = 0;
  bool pass = false;
};

struct RandomSceneLimits {
  int max_subcarriers = 4;
  int max_frame = 4;
  int max_samples = 3;
  int max_tx = 4;
  int max_rx = 4;
  int max_users = 3;
  int max_offset = 1;
  int max_patches = 3;
};

/// Small random scene with random beamformers as the design variable. Clutter
/// uses per-patch powers drawn around 1 so that every term is well scaled.
struct RandomScene {
  ProblemInstance instance;
  InnerCcmFactors factors;
  VectorXcd target_signature;
  VectorXcd w;
};

RandomScene random_scene(std::mt19937_64& rng, const RandomSceneLimits& limits = {});

std::vector<CheckResult> run_validation_suite(std::uint64_t seed, int cases);

}  // namespace dfrc
