#include "eviflow/io.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <system_error>

#include <fmt/format.h>
#include <unistd.h>

namespace eviflow {

std::string format_real(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return fmt::format("{:.17g}", x);
}

void write_point_trajectory_csv(std::ostream& out, const MetricMeasureSpace& space,
                                const FlowTrajectory& traj) {
  out << "t,point_index,coord,V\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const PointIndex p = traj.points[k];
    out << format_real(traj.times[k]) << ',' << p << ',' << format_real(space.coord(p)) << ','
        << format_real(traj.potential_values[k]) << '\n';
  }
}

void write_measure_trajectory_csv(std::ostream& out, const MeasureTrajectory& traj) {
  out << "t,point_index,mass\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const auto& mu = traj.measures[k];
    for (PointIndex p = 0; p < mu.size(); ++p) {
      if (mu[p] > 0.0) out << format_real(traj.times[k]) << ',' << p << ',' << format_real(mu[p]) << '\n';
    }
  }
}

void write_measure_summary_csv(std::ostream& out, const MeasureTrajectory& traj) {
  out << "t,energy,variance\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << format_real(traj.times[k]) << ',' << format_real(traj.energies[k]) << ','
        << format_real(traj.variances[k]) << '\n';
  }
}

void write_file_atomically(const std::filesystem::path& path,
                           const std::function<void(std::ostream&)>& writer) {
  static std::atomic<unsigned long> counter{0};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += fmt::format(".tmp.{}.{}", static_cast<long>(::getpid()), counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    writer(out);
    out.flush();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw std::runtime_error("write failed for " + path.string());
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace eviflow
