#pragma once

#include "gdid/errors.hpp"
#include "gdid/learners.hpp"
#include "gdid/panel.hpp"

#include <optional>

namespace gdid::test {

// Error code raised by f, or nullopt when it returns normally.
template <class F>
std::optional<ErrorCode> code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// Two treated and two control units over periods 0 and 1.
inline PanelDataset four_units() {
  PanelDataset d;
  d.unit_ids = {"a", "b", "c", "d"};
  d.times = {0, 1};
  d.outcomes.resize(4, 2);
  d.outcomes << 2.0, 5.0, 1.0, 3.0, 1.5, 2.5, 0.5, 1.0;
  d.covariates.resize(4, 0);
  d.treatment = {1, 1, 0, 0};
  return d;
}

// Fixed nuisance predictions for four_units().
inline NuisanceFits four_unit_fits() {
  NuisanceFits f;
  f.pi.resize(4);
  f.pi << 0.5, 0.6, 0.3, 0.25;
  f.pi0.resize(4);
  f.pi0 << 0.4, 0.5, 0.2, 0.3;
  f.mu1.resize(4);
  f.mu1 << 3.0, 2.0, 2.2, 1.1;
  f.mu0.resize(4);
  f.mu0 << 1.5, 1.0, 1.2, 0.4;
  f.mu1_treated.resize(4);
  f.mu1_treated << 4.8, 3.1, 2.9, 2.0;
  f.mu0_treated.resize(4);
  f.mu0_treated << 1.9, 1.1, 1.4, 0.8;
  f.plan = CrossFitPlan::none();
  return f;
}

}  // namespace gdid::test
