#pragma once

// CSV export of trajectories. Numbers carry 17 significant digits and rows
// are time-major, then by point index.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>

#include "eviflow/flow.hpp"
#include "eviflow/space.hpp"

namespace eviflow {

/// "t,point_index,coord,V"
void write_point_trajectory_csv(std::ostream& out, const MetricMeasureSpace& space,
                                const FlowTrajectory& traj);

/// "t,point_index,mass", positive masses only.
void write_measure_trajectory_csv(std::ostream& out, const MeasureTrajectory& traj);

/// "t,energy,variance"
void write_measure_summary_csv(std::ostream& out, const MeasureTrajectory& traj);

/// Shortest round-trip decimal form with at most 17 significant digits;
/// "inf" and "-inf" for infinities.
std::string format_real(double x);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never see a partial file. Creates parent directories.
void write_file_atomically(const std::filesystem::path& path,
                           const std::function<void(std::ostream&)>& writer);

}  // namespace eviflow
