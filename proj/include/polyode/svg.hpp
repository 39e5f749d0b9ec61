#pragma once

// Bare-bones SVG output: line plots and quiver plots with fixed margins.

#include "polyode/dynamics.hpp"

#include <string>
#include <vector>

namespace polyode {

struct Series {
  std::string label;
  std::vector<double> x, y;
  bool dashed = false;
};

std::string svg_line_plot(const std::vector<Series>& series, const std::string& title, const std::string& x_label);

/// One line per state against time; `reference`, when non-empty, is drawn dashed.
std::string svg_trajectory_plot(const Trajectory& traj, const std::string& title,
                                const Trajectory* reference = nullptr);

/// Arrows scaled so the longest spans one grid cell.
std::string svg_quiver(const VectorField& field, const std::string& title);

}  // namespace polyode
