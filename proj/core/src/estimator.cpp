#include "mvo/estimator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "mvo/runtime.hpp"

namespace mvo {

void PriorConfig::validate() const {
  if ((qc_diagonal.array() <= 0).any() || (r_diagonal.array() <= 0).any()) {
    throw EstimationError("PriorConfig: covariances must be positive definite");
  }
  if (max_iterations < 1) {
    throw EstimationError("PriorConfig: max_iterations must be >= 1");
  }
}

GpState TrajectoryState::state_at(int frame) const {
  if (!covers(frame)) {
    throw EstimationError("TrajectoryState: frame outside estimated range");
  }
  int i = frame - first_frame;
  GpState s;
  s.pose = poses[i];
  if (!velocities.empty()) s.velocity = velocities[i];
  if (!accelerations.empty()) s.acceleration = accelerations[i];
  return s;
}

GeoFrameAnchor make_centroid_anchor(const TrackletStore& store,
                                    const std::set<int>& support,
                                    const MotionLabel& hypothesis) {
  Vec3 sum = Vec3::Zero();
  int count = 0;
  for (int id : support) {
    const Tracklet* t = store.by_id(id);
    if (!t) continue;
    for (const auto& obs : t->observations) {
      if (hypothesis.covers(obs.frame)) {
        // First observation, carried back to the hypothesis start frame.
        sum += hypothesis.at(obs.frame).inverse() * obs.point;
        ++count;
        break;
      }
    }
  }
  if (count == 0) {
    throw EstimationError("make_centroid_anchor: no support observations");
  }
  Vec3 centroid = sum / static_cast<double>(count);
  GeoFrameAnchor anchor;
  anchor.object_from_camera = Pose::from_parts(Mat3::Identity(), -centroid);
  anchor.frame = hypothesis.first_frame;
  return anchor;
}

std::vector<Pose> to_geocentric_pose_only(const std::vector<Pose>& hypothesis,
                                          const std::vector<Pose>& egomotion,
                                          const GeoFrameAnchor& anchor) {
  if (hypothesis.size() != egomotion.size()) {
    throw EstimationError("to_geocentric_pose_only: frame-range mismatch");
  }
  std::vector<Pose> geo;
  geo.reserve(hypothesis.size());
  Pose inv_anchor = anchor.object_from_camera.inverse();
  for (std::size_t i = 0; i < hypothesis.size(); ++i) {
    geo.push_back(anchor.object_from_camera * hypothesis[i].inverse() *
                  egomotion[i] * inv_anchor);
  }
  return geo;
}

Pose hypothesis_from_geocentric(const Pose& geocentric, const Pose& egomotion,
                                const GeoFrameAnchor& anchor) {
  return egomotion * anchor.object_from_camera.inverse() *
         geocentric.inverse() * anchor.object_from_camera;
}

int select_egomotion(const Segmentation& seg, const EgomotionHook& hook) {
  if (seg.labels.empty()) {
    throw EstimationError("select_egomotion: empty label set");
  }
  if (hook) {
    auto choice = hook(seg);
    if (choice) return *choice;
  }
  int best = seg.labels.front().id;
  std::size_t best_size = seg.labels.front().support.size();
  for (const auto& l : seg.labels) {
    if (l.support.size() > best_size) {
      best = l.id;
      best_size = l.support.size();
    }
  }
  return best;
}

namespace {

enum class MeasurementMode { kEgo, kGeo };

struct Measurement {
  int landmark;  // index into landmark order
  int frame;     // index into the window range (0-based)
  Vec3 pixel;    // observed (u, v, d)
};

struct Problem {
  MeasurementMode mode;
  Flavor flavor;
  int frames = 0;
  double dt_sum = 0;
  std::vector<double> times;
  std::vector<Measurement> measurements;
  std::vector<int> landmark_ids;
  // Geo mode: per-frame prefix A_k = ego_k * anchor^-1 and the anchor B.
  std::vector<Pose> geo_prefix;
  Pose anchor;

  int blocks = 1;         // 6-dof blocks per frame in the state
  int frame_cols = 0;     // total columns for frame states
  int landmark_cols = 0;  // 3 per landmark

  int pose_col(int k) const {
    if (k == 0) return -1;
    return (k - 1) * 6;
  }
  int vel_col(int k) const { return (frames - 1) * 6 + k * 6; }
  int acc_col(int k) const { return (frames - 1) * 6 + frames * 6 + k * 6; }
  int landmark_col(int j) const { return frame_cols + 3 * j; }
};

struct OperatingPoint {
  std::vector<Pose> poses;
  std::vector<Vec6> velocities;
  std::vector<Vec6> accelerations;
  std::vector<Vec3> landmarks;
};

Vec4 homogeneous(const Vec3& p) { return Vec4(p.x(), p.y(), p.z(), 1.0); }

// Model matrix mapping a landmark (first-frame camera coordinates) to the
// camera frame at k.
Pose model_matrix(const Problem& problem, const OperatingPoint& op, int k) {
  if (problem.mode == MeasurementMode::kEgo) return op.poses[k];
  return problem.geo_prefix[k] * op.poses[k].inverse() * problem.anchor;
}

double measurement_cost(const Problem& problem, const OperatingPoint& op,
                        const Mat3& r_inv, const StereoCalib& calib) {
  double cost = 0.0;
  for (const auto& m : problem.measurements) {
    Vec4 z = model_matrix(problem, op, m.frame) *
             homogeneous(op.landmarks[m.landmark]);
    Vec3 e = project_homogeneous(z, calib) - m.pixel;
    cost += 0.5 * e.dot(r_inv * e);
  }
  return cost;
}

double prior_cost(const Problem& problem, const OperatingPoint& op,
                  const PriorConfig& prior) {
  if (problem.blocks < 2) return 0.0;
  double cost = 0.0;
  Mat6 qc_inv = problem.blocks >= 2
                    ? Mat6(prior.qc_diagonal.cwiseInverse().asDiagonal())
                    : Mat6::Identity();
  for (int k = 0; k + 1 < problem.frames; ++k) {
    GpState from{op.poses[k], op.velocities[k],
                 problem.blocks >= 3 ? op.accelerations[k] : Vec6::Zero()};
    GpState to{op.poses[k + 1], op.velocities[k + 1],
               problem.blocks >= 3 ? op.accelerations[k + 1] : Vec6::Zero()};
    double dt = problem.times[k + 1] - problem.times[k];
    auto res = gp_prior_residual(from, to, dt, problem.blocks,
                                 prior.jacobian_mode, false);
    MatX qi = gp_covariance_inverse(dt, qc_inv, problem.blocks);
    cost += 0.5 * res.error.dot(qi * res.error);
  }
  return cost;
}

struct NormalEquations {
  MatX h;
  VecX b;
};

NormalEquations assemble(const Problem& problem, const OperatingPoint& op,
                         const PriorConfig& prior, const StereoCalib& calib) {
  const int dim = problem.frame_cols + problem.landmark_cols;
  NormalEquations eq{MatX::Zero(dim, dim), VecX::Zero(dim)};
  Mat3 r_inv = prior.r_inverse();

  for (const auto& m : problem.measurements) {
    Pose model = model_matrix(problem, op, m.frame);
    Vec4 point_h = homogeneous(op.landmarks[m.landmark]);
    Vec4 z = model * point_h;
    Mat34 s = projection_jacobian(z, calib);
    Vec3 e = project_homogeneous(z, calib) - m.pixel;

    // Pose block.
    int pcol = problem.pose_col(m.frame);
    Eigen::Matrix<double, 3, 6> g_pose;
    bool has_pose = pcol >= 0;
    if (has_pose) {
      if (problem.mode == MeasurementMode::kEgo) {
        g_pose = s * odot(z);
      } else {
        Pose prefix = problem.geo_prefix[m.frame] * op.poses[m.frame].inverse();
        g_pose = -s * prefix.matrix() *
                 odot(problem.anchor * point_h);
      }
    }

    // Landmark block: columns of the model matrix.
    Eigen::Matrix<double, 3, 3> g_lm =
        s * model.matrix().template leftCols<3>();

    int lcol = problem.landmark_col(m.landmark);
    if (has_pose) {
      eq.h.block<6, 6>(pcol, pcol) += g_pose.transpose() * r_inv * g_pose;
      eq.h.block<6, 3>(pcol, lcol) += g_pose.transpose() * r_inv * g_lm;
      eq.h.block<3, 6>(lcol, pcol) += g_lm.transpose() * r_inv * g_pose;
      eq.b.segment<6>(pcol) -= g_pose.transpose() * r_inv * e;
    }
    eq.h.block<3, 3>(lcol, lcol) += g_lm.transpose() * r_inv * g_lm;
    eq.b.segment<3>(lcol) -= g_lm.transpose() * r_inv * e;
  }

  if (problem.blocks >= 2) {
    Mat6 qc_inv = prior.qc_diagonal.cwiseInverse().asDiagonal();
    for (int k = 0; k + 1 < problem.frames; ++k) {
      GpState from{op.poses[k], op.velocities[k],
                   problem.blocks >= 3 ? op.accelerations[k] : Vec6::Zero()};
      GpState to{op.poses[k + 1], op.velocities[k + 1],
                 problem.blocks >= 3 ? op.accelerations[k + 1] : Vec6::Zero()};
      double dt = problem.times[k + 1] - problem.times[k];
      auto res = gp_prior_residual(from, to, dt, problem.blocks,
                                   prior.jacobian_mode, true);
      MatX qi = gp_covariance_inverse(dt, qc_inv, problem.blocks);

      // Column map of the residual Jacobian into the global layout.
      std::vector<int> cols;
      for (int side = 0; side < 2; ++side) {
        int frame = k + side;
        cols.push_back(problem.pose_col(frame));
        cols.push_back(problem.vel_col(frame));
        if (problem.blocks >= 3) cols.push_back(problem.acc_col(frame));
      }
      const MatX& jac = res.jacobian;
      for (std::size_t a = 0; a < cols.size(); ++a) {
        if (cols[a] < 0) continue;
        MatX ja = jac.middleCols(6 * a, 6);
        eq.b.segment<6>(cols[a]) -= ja.transpose() * qi * res.error;
        for (std::size_t c = 0; c < cols.size(); ++c) {
          if (cols[c] < 0) continue;
          eq.h.block<6, 6>(cols[a], cols[c]) +=
              ja.transpose() * qi * jac.middleCols(6 * c, 6);
        }
      }
    }
  }

  return eq;
}

VecX solve_normal_equations(const Problem& problem, const NormalEquations& eq,
                            const PriorConfig& prior) {
  const int dim = problem.frame_cols + problem.landmark_cols;
  const int num_landmarks = problem.landmark_cols / 3;
  VecX delta(dim);

  if (num_landmarks > prior.schur_landmark_threshold) {
    // Eliminate the block-diagonal landmark system first.
    const int s = problem.frame_cols;
    MatX hss = eq.h.topLeftCorner(s, s);
    MatX hsl = eq.h.topRightCorner(s, problem.landmark_cols);
    VecX bs = eq.b.head(s);
    VecX bl = eq.b.tail(problem.landmark_cols);

    MatX hll_inv_hls(problem.landmark_cols, s);
    VecX hll_inv_bl(problem.landmark_cols);
    for (int j = 0; j < num_landmarks; ++j) {
      Mat3 hll = eq.h.block<3, 3>(s + 3 * j, s + 3 * j);
      Eigen::LDLT<Mat3> ldlt(hll);
      if (ldlt.info() != Eigen::Success) {
        throw EstimationError("estimator: rank-deficient landmark block");
      }
      hll_inv_hls.middleRows<3>(3 * j) =
          ldlt.solve(hsl.middleCols<3>(3 * j).transpose());
      hll_inv_bl.segment<3>(3 * j) = ldlt.solve(bl.segment<3>(3 * j));
    }
    MatX reduced_h = hss - hsl * hll_inv_hls;
    VecX reduced_b = bs - hsl * hll_inv_bl;
    Eigen::LDLT<MatX> ldlt(reduced_h);
    if (ldlt.info() != Eigen::Success) {
      throw EstimationError("estimator: singular normal equations");
    }
    VecX ds = ldlt.solve(reduced_b);
    delta.head(s) = ds;
    delta.tail(problem.landmark_cols) = hll_inv_bl - hll_inv_hls * ds;
  } else {
    Eigen::LDLT<MatX> ldlt(eq.h);
    if (ldlt.info() != Eigen::Success) {
      throw EstimationError("estimator: singular normal equations");
    }
    delta = ldlt.solve(eq.b);
  }

  if (!delta.allFinite()) {
    throw EstimationError("estimator: singular normal equations");
  }
  return delta;
}

void apply_update(const Problem& problem, OperatingPoint& op,
                  const VecX& delta, double step) {
  for (int k = 0; k < problem.frames; ++k) {
    int pcol = problem.pose_col(k);
    if (pcol >= 0) {
      op.poses[k] = exp_map(step * delta.segment<6>(pcol)) * op.poses[k];
    }
    if (problem.blocks >= 2) {
      op.velocities[k] += step * delta.segment<6>(problem.vel_col(k));
    }
    if (problem.blocks >= 3) {
      op.accelerations[k] += step * delta.segment<6>(problem.acc_col(k));
    }
  }
  for (std::size_t j = 0; j < op.landmarks.size(); ++j) {
    op.landmarks[j] +=
        step * delta.segment<3>(problem.landmark_col(static_cast<int>(j)));
  }
}

TrajectoryState run_gauss_newton(Problem& problem, OperatingPoint op,
                                 Flavor flavor, const StereoCalib& calib,
                                 const PriorConfig& prior, int first_frame) {
  prior.validate();
  Mat3 r_inv = prior.r_inverse();
  auto total_cost = [&](const OperatingPoint& x) {
    return measurement_cost(problem, x, r_inv, calib) +
           prior_cost(problem, x, prior);
  };

  double cost = total_cost(op);
  bool converged = false;
  int iterations = 0;

  for (int iter = 0; iter < prior.max_iterations; ++iter) {
    iterations = iter + 1;
    NormalEquations eq = assemble(problem, op, prior, calib);
    VecX delta = solve_normal_equations(problem, eq, prior);

    // Halving line search on cost increase.
    double step = 1.0;
    OperatingPoint candidate = op;
    apply_update(problem, candidate, delta, step);
    double candidate_cost = total_cost(candidate);
    int halvings = 0;
    while (candidate_cost > cost && halvings < 20) {
      step *= 0.5;
      candidate = op;
      apply_update(problem, candidate, delta, step);
      candidate_cost = total_cost(candidate);
      ++halvings;
    }
    if (candidate_cost > cost) {
      converged = false;  // stuck; keep best-so-far
      log(LogLevel::kWarn, "estimator: line search failed, keeping best state");
      break;
    }

    double improvement = cost - candidate_cost;
    op = std::move(candidate);
    cost = candidate_cost;

    if (improvement <= prior.cost_tolerance * std::max(cost, 1e-12) ||
        (step * delta).norm() < prior.update_tolerance) {
      converged = true;
      break;
    }
    if (iter == prior.max_iterations - 1) {
      converged = false;
      log(LogLevel::kWarn, "estimator: iteration cap reached");
    }
  }

  TrajectoryState out;
  out.flavor = flavor;
  out.first_frame = first_frame;
  out.timestamps = problem.times;
  out.poses = std::move(op.poses);
  if (problem.blocks >= 2) out.velocities = std::move(op.velocities);
  if (problem.blocks >= 3) out.accelerations = std::move(op.accelerations);
  for (std::size_t j = 0; j < problem.landmark_ids.size(); ++j) {
    out.landmarks[problem.landmark_ids[j]] = op.landmarks[j];
  }
  out.converged = converged;
  out.iterations = iterations;
  out.final_cost = cost;
  return out;
}

// Shared setup: collects measurements over the label range and initializes
// landmarks by back-transporting each tracklet's first in-range observation.
void collect_measurements(Problem& problem, OperatingPoint& op,
                          const TrackletStore& store,
                          const std::set<int>& support,
                          const MotionLabel& range) {
  for (int id : support) {
    const Tracklet* t = store.by_id(id);
    if (!t) continue;
    int landmark_index = -1;
    for (const auto& obs : t->observations) {
      if (!range.covers(obs.frame)) continue;
      int k = obs.frame - range.first_frame;
      if (landmark_index < 0) {
        landmark_index = static_cast<int>(problem.landmark_ids.size());
        problem.landmark_ids.push_back(id);
        Pose model = problem.mode == MeasurementMode::kEgo
                         ? op.poses[k]
                         : problem.geo_prefix[k] * op.poses[k].inverse() *
                               problem.anchor;
        op.landmarks.push_back(model.inverse() * obs.point);
      }
      problem.measurements.push_back(
          {landmark_index, k,
           Vec3(obs.pixel.u, obs.pixel.v, obs.pixel.d)});
    }
  }
  problem.landmark_cols = 3 * static_cast<int>(problem.landmark_ids.size());
}

void init_derivatives(const std::vector<Pose>& poses,
                      const std::vector<double>& times, int blocks,
                      std::vector<Vec6>& velocities,
                      std::vector<Vec6>& accelerations) {
  const int n = static_cast<int>(poses.size());
  velocities.assign(n, Vec6::Zero());
  if (blocks < 2) return;
  for (int k = 0; k + 1 < n; ++k) {
    double dt = times[k + 1] - times[k];
    velocities[k] = (poses[k + 1] * poses[k].inverse()).log() / dt;
  }
  if (n >= 2) velocities[n - 1] = velocities[n - 2];
  accelerations.assign(n, Vec6::Zero());
  if (blocks < 3) return;
  for (int k = 0; k + 1 < n; ++k) {
    double dt = times[k + 1] - times[k];
    accelerations[k] = (velocities[k + 1] - velocities[k]) / dt;
  }
  if (n >= 2) accelerations[n - 1] = accelerations[n - 2];
}

void check_preconditions(const std::set<int>& support,
                         const MotionLabel& range,
                         const std::vector<double>& times) {
  if (support.size() < 3) {
    throw EstimationError("estimator: needs at least 3 tracklets");
  }
  if (range.trajectory.size() < 2) {
    throw EstimationError("estimator: needs at least 2 frames");
  }
  if (times.size() != range.trajectory.size()) {
    throw EstimationError("estimator: timestamps do not match frame range");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i] <= times[i - 1]) {
      throw EstimationError("estimator: timestamps must be increasing");
    }
  }
}

}  // namespace

TrajectoryState estimate_ego_trajectory(const TrackletStore& store,
                                        const std::set<int>& support,
                                        const MotionLabel& init, Flavor flavor,
                                        const StereoCalib& calib,
                                        const PriorConfig& prior,
                                        const std::vector<double>& times) {
  check_preconditions(support, init, times);

  Problem problem;
  problem.mode = MeasurementMode::kEgo;
  problem.flavor = flavor;
  problem.frames = static_cast<int>(init.trajectory.size());
  problem.times = times;
  problem.blocks = prior_order(flavor);
  problem.frame_cols =
      (problem.frames - 1) * 6 +
      (problem.blocks >= 2 ? problem.frames * 6 : 0) +
      (problem.blocks >= 3 ? problem.frames * 6 : 0);

  OperatingPoint op;
  op.poses = init.trajectory;
  init_derivatives(op.poses, times, problem.blocks, op.velocities,
                   op.accelerations);
  collect_measurements(problem, op, store, support, init);

  return run_gauss_newton(problem, std::move(op), flavor, calib, prior,
                          init.first_frame);
}

TrajectoryState estimate_geo_trajectory(const TrackletStore& store,
                                        const std::set<int>& support,
                                        const MotionLabel& hypothesis,
                                        const std::vector<Pose>& egomotion,
                                        const GeoFrameAnchor& anchor,
                                        Flavor flavor, const StereoCalib& calib,
                                        const PriorConfig& prior,
                                        const std::vector<double>& times) {
  check_preconditions(support, hypothesis, times);
  if (egomotion.size() != hypothesis.trajectory.size()) {
    throw EstimationError("estimate_geo_trajectory: frame-range mismatch");
  }
  if (flavor == Flavor::kPoseOnly) {
    throw EstimationError(
        "estimate_geo_trajectory: pose-only converts via "
        "to_geocentric_pose_only");
  }

  Problem problem;
  problem.mode = MeasurementMode::kGeo;
  problem.flavor = flavor;
  problem.frames = static_cast<int>(hypothesis.trajectory.size());
  problem.times = times;
  problem.blocks = prior_order(flavor);
  problem.frame_cols = (problem.frames - 1) * 6 + problem.frames * 6 +
                       (problem.blocks >= 3 ? problem.frames * 6 : 0);
  problem.anchor = anchor.object_from_camera;
  Pose anchor_inv = anchor.object_from_camera.inverse();
  problem.geo_prefix.reserve(problem.frames);
  for (int k = 0; k < problem.frames; ++k) {
    problem.geo_prefix.push_back(egomotion[k] * anchor_inv);
  }

  OperatingPoint op;
  op.poses = to_geocentric_pose_only(hypothesis.trajectory, egomotion, anchor);
  init_derivatives(op.poses, times, problem.blocks, op.velocities,
                   op.accelerations);
  collect_measurements(problem, op, store, support, hypothesis);

  return run_gauss_newton(problem, std::move(op), flavor, calib, prior,
                          hypothesis.first_frame);
}

}  // namespace mvo
