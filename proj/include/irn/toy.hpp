// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

// Small fixed problems used by the gradient-check command and tests.

#pragma once

#include <cstdint>

#include "irn/grad_check.hpp"
#include "irn/kbchead.hpp"
#include "irn/pathsynth.hpp"

namespace irn::toy {

// 5 entities, 2 relations, |M| = 4, T_max = 3, embedding dims 8, memory and
// state dims 16.
kbc::KbcConfig gradcheck_kbc_config();

// Summed objective of three fixed queries with fixed candidate sets, checked
// against central differences over every parameter.
num::GradCheckReport kbc_gradient_check(std::uint64_t seed, double tolerance = 1e-4,
                                        double step = 1e-5);

// Six-node path model at T_max = 2 on a single three-token target.
num::GradCheckReport path_gradient_check(std::uint64_t seed, paths::PathObjective objective,
                                         double tolerance = 1e-4, double step = 1e-5);

}  // namespace irn::toy
