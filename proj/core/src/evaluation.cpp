#include "mvo/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace mvo {

namespace {
constexpr double kRadToDeg = 180.0 / M_PI;

void check_pair(const TrajectoryPair& pair) {
  if (pair.estimate.size() != pair.truth.size() || pair.estimate.empty()) {
    throw Error("TrajectoryPair: estimate and truth must cover the same frames");
  }
}
}  // namespace

std::vector<Pose> relative_from_world(const std::vector<Pose>& world) {
  std::vector<Pose> rel;
  rel.reserve(world.size());
  for (const auto& w : world) {
    rel.push_back(w.inverse() * world.front());
  }
  return rel;
}

std::vector<Pose> calibrate(const TrajectoryPair& pair) {
  check_pair(pair);
  Pose initial = pair.truth_from_apparatus * pair.apparatus_from_camera *
                 pair.estimate_anchor.inverse();
  std::vector<Pose> out;
  out.reserve(pair.estimate.size());
  for (std::size_t j = 0; j < pair.estimate.size(); ++j) {
    out.push_back(pair.truth[j] * initial * pair.estimate[j].inverse());
  }
  return out;
}

Pose pose_error(const TrajectoryPair& pair, const std::vector<Pose>& calib,
                int j, int k) {
  Pose est_kj = pair.estimate[k] * pair.estimate[j].inverse();
  Pose truth_kj = pair.truth[k] * pair.truth[j].inverse();
  return calib[j] * est_kj * calib[j].inverse() * truth_kj.inverse();
}

Vec3 rotation_to_rpy(const Mat3& r) {
  double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  double roll, yaw;
  if (std::abs(std::abs(r(2, 0)) - 1.0) < 1e-12) {
    // Gimbal lock: fold everything into yaw.
    roll = 0.0;
    yaw = std::atan2(-r(0, 1), r(1, 1));
  } else {
    roll = std::atan2(r(2, 1), r(2, 2));
    yaw = std::atan2(r(1, 0), r(0, 0));
  }
  return Vec3(roll, pitch, yaw);
}

void unwrap_rpy_in_place(std::vector<Vec3>& rpy) {
  for (std::size_t i = 1; i < rpy.size(); ++i) {
    for (int axis = 0; axis < 3; ++axis) {
      double delta = rpy[i](axis) - rpy[i - 1](axis);
      rpy[i](axis) -= 2.0 * M_PI * std::round(delta / (2.0 * M_PI));
    }
  }
}

std::vector<GlobalErrorRow> global_error(const TrajectoryPair& pair) {
  check_pair(pair);
  auto cal = calibrate(pair);
  std::vector<Vec3> rpy;
  std::vector<GlobalErrorRow> rows(pair.estimate.size());
  for (std::size_t k = 0; k < pair.estimate.size(); ++k) {
    Pose err = pose_error(pair, cal, 0, static_cast<int>(k));
    rows[k].xyz = err.translation();
    rpy.push_back(rotation_to_rpy(err.rotation()));
  }
  unwrap_rpy_in_place(rpy);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    rows[k].rpy_deg = rpy[k] * kRadToDeg;
  }
  return rows;
}

GlobalErrorSummary summarize_global_error(
    const std::vector<GlobalErrorRow>& rows) {
  GlobalErrorSummary s;
  for (const auto& row : rows) {
    s.max_xyz = std::max(s.max_xyz, row.xyz.norm());
    for (int axis = 0; axis < 3; ++axis) {
      if (std::abs(row.rpy_deg(axis)) > std::abs(s.max_rpy_deg(axis))) {
        s.max_rpy_deg(axis) = row.rpy_deg(axis);
      }
    }
  }
  return s;
}

Rmsre rmsre(const TrajectoryPair& pair) {
  check_pair(pair);
  auto cal = calibrate(pair);
  const std::size_t n = pair.estimate.size();
  double sum_xyz = 0.0;
  double sum_angle = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    Pose err = pose_error(pair, cal, static_cast<int>(k - 1),
                          static_cast<int>(k));
    Twist xi = err.log();
    // The translational element converted to the Euclidean translation of
    // the error transform.
    sum_xyz += err.translation().squaredNorm();
    sum_angle += xi.tail<3>().squaredNorm();
  }
  Rmsre out;
  out.xyz = std::sqrt(sum_xyz / static_cast<double>(n));
  out.angle_deg = std::sqrt(sum_angle / static_cast<double>(n)) * kRadToDeg;
  return out;
}

PathStats path_stats(const std::vector<Pose>& relative_trajectory) {
  PathStats stats;
  if (relative_trajectory.empty()) return stats;

  std::vector<Vec3> rpy;
  rpy.reserve(relative_trajectory.size());
  for (const auto& pose : relative_trajectory) {
    rpy.push_back(rotation_to_rpy(pose.rotation()));
  }
  unwrap_rpy_in_place(rpy);

  for (std::size_t k = 1; k < relative_trajectory.size(); ++k) {
    Pose step = relative_trajectory[k] * relative_trajectory[k - 1].inverse();
    stats.total_translation += step.translation().norm();
    stats.total_rpy_deg += (rpy[k] - rpy[k - 1]).cwiseAbs() * kRadToDeg;
  }
  for (std::size_t k = 0; k < relative_trajectory.size(); ++k) {
    Vec3 displacement =
        relative_trajectory[k].translation() -
        relative_trajectory.front().translation();
    stats.max_displacement =
        std::max(stats.max_displacement, displacement.norm());
    Vec3 angles = (rpy[k] - rpy.front()) * kRadToDeg;
    for (int axis = 0; axis < 3; ++axis) {
      if (std::abs(angles(axis)) > std::abs(stats.max_rpy_deg(axis))) {
        stats.max_rpy_deg(axis) = angles(axis);
      }
    }
  }
  return stats;
}

void write_error_report_csv(const std::vector<ErrorReportRow>& rows,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_error_report_csv: cannot open " + path);
  out << "label,max_ge_xyz,max_ge_roll,max_ge_pitch,max_ge_yaw,rmsre_xyz,"
         "rmsre_angle,truth_total_path,truth_max_displacement\n";
  char buf[512];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", row.label,
                  row.global.max_xyz, row.global.max_rpy_deg.x(),
                  row.global.max_rpy_deg.y(), row.global.max_rpy_deg.z(),
                  row.relative.xyz, row.relative.angle_deg,
                  row.truth_path.total_translation,
                  row.truth_path.max_displacement);
    out << buf;
  }
}

void write_plot_csv(
    const std::vector<std::pair<int, std::vector<GlobalErrorRow>>>&
        per_label_rows,
    int first_frame, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_plot_csv: cannot open " + path);
  out << "frame,label,ex,ey,ez,eroll,epitch,eyaw\n";
  char buf[512];
  for (const auto& [label, rows] : per_label_rows) {
    for (std::size_t k = 0; k < rows.size(); ++k) {
      std::snprintf(buf, sizeof(buf), "%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                    first_frame + static_cast<int>(k), label, rows[k].xyz.x(),
                    rows[k].xyz.y(), rows[k].xyz.z(), rows[k].rpy_deg.x(),
                    rows[k].rpy_deg.y(), rows[k].rpy_deg.z());
      out << buf;
    }
  }
}

}  // namespace mvo
