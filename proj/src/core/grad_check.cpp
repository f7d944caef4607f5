// Copyright 2026 The IRN Authors
// SPDX-License-Identifier: Apache-2.0

#include "irn/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "irn/error.hpp"

namespace irn::num {

namespace {

double evaluate(const LossClosure& closure, const char* context, const std::string& name,
                std::size_t index) {
  Tape tape;
  const double loss = closure(tape).scalar();
  if (!std::isfinite(loss)) {
    throw NumericError(std::string("grad_check: non-finite loss ") + context + " '" + name +
                       "' element " + std::to_string(index));
  }
  return loss;
}

}  // namespace

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

double GradCheckReport::max_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

std::vector<std::string> GradCheckReport::failing() const {
  std::vector<std::string> names;
  for (const auto& e : entries) {
    if (!e.passed) names.push_back(e.name);
  }
  return names;
}

std::string GradCheckReport::to_text() const {
  std::ostringstream out;
  char line[256];
  for (const auto& e : entries) {
    std::snprintf(line, sizeof line, "%-28s %8zu  max_rel_err=%.3e  %s\n", e.name.c_str(),
                  e.elements, e.max_rel_error, e.passed ? "ok" : "FAIL");
    out << line;
  }
  std::snprintf(line, sizeof line, "overall max_rel_err=%.3e tolerance=%.1e %s\n", max_error(),
                tolerance, passed() ? "PASS" : "FAIL");
  out << line;
  return out.str();
}

GradCheckReport grad_check(const LossClosure& closure, std::span<Parameter* const> params,
                           double tolerance, double step) {
  IRN_EXPECTS(step > 0.0, "grad_check: step must be positive");
  for (Parameter* p : params) p->zero_grad();
  {
    Tape tape;
    const Var loss = closure(tape);
    if (!std::isfinite(loss.scalar())) {
      throw NumericError("grad_check: non-finite loss at the evaluation point");
    }
    tape.backward(loss);
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  report.step = step;
  for (Parameter* p : params) {
    const Tensor analytic = p->grad;
    GradCheckEntry entry;
    entry.name = p->name;
    entry.elements = p->value.size();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double original = p->value[i];
      p->value[i] = original + step;
      const double up = evaluate(closure, "perturbing", p->name, i);
      p->value[i] = original - step;
      const double down = evaluate(closure, "perturbing", p->name, i);
      p->value[i] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
      const double rel = std::abs(a - numeric) / denom;
      if (i == 0 || rel > entry.max_rel_error) {
        entry.max_rel_error = rel;
        entry.worst_index = i;
        entry.analytic = a;
        entry.numeric = numeric;
      }
    }
    entry.passed = entry.max_rel_error <= tolerance;
    report.entries.push_back(std::move(entry));
  }
  for (Parameter* p : params) p->zero_grad();
  return report;
}

}  // namespace irn::num
