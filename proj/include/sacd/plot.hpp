#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sacd/runner.hpp"

namespace sacd {

// Single-panel SVG learning curve: eval_return vs. step, one polyline
// per named series.
std::string render_learning_curve_svg(const std::vector<std::pair<std::string, RunMetrics>>& series);

}  // namespace sacd
