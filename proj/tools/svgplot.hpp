#pragma once
// Minimal deterministic SVG charts for the report tables. Output depends only on
// the input rows, so re-plotting the same table rewrites identical files.

#include "motion6d/ctrlloop.hpp"
#include "motion6d/tracker.hpp"

#include <string>
#include <vector>

namespace motion6d::plot {

/// One line chart per metric (mean with a +-1 stderr band, one line per config).
/// Returns the written file paths.
std::vector<std::string> error_curves(const std::vector<track::CurveRow>& rows, const std::string& out_dir);

/// Grouped bars of open-loop and corrected success rates per (setting, T).
std::vector<std::string> convergence_bars(const std::vector<ctrl::ConvergenceRow>& rows, const std::string& out_dir);

}  // namespace motion6d::plot
