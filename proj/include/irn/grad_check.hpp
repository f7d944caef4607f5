// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "irn/numcore.hpp"

namespace irn::num {

struct GradCheckEntry {
  std::string name;
  std::size_t elements = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  double tolerance = 0.0;
  double step = 0.0;
  std::vector<GradCheckEntry> entries;

  bool passed() const;
  double max_error() const;
  std::vector<std::string> failing() const;
  // One line per parameter: name, element count, max relative error, verdict.
  std::string to_text() const;
};

// Builds the scalar loss on the supplied (empty) tape.
using LossClosure = std::function<Var(Tape&)>;

// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor);
// the floor keeps entries whose true gradient is ~0 from reporting pure
// finite-difference noise as relative error.
inline constexpr double kGradCheckFloor = 1e-6;

// Compares tape gradients with central differences of step `step` for every
// element of every parameter. Throws NumericError naming the perturbed
// parameter if the loss is non-finite.
GradCheckReport grad_check(const LossClosure& closure, std::span<Parameter* const> params,
                           double tolerance, double step = 1e-5);

}  // namespace irn::num
