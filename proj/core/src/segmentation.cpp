#include "mvo/segmentation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "mvo/runtime.hpp"

namespace mvo {

void EnergyConfig::validate() const {
  if (smoothness_weight <= 0 || label_cost <= 0 || outlier_scale <= 0 ||
      outlier_decay <= 0 || inlier_threshold_px <= 0 ||
      ransac_iterations <= 0 || max_outer_iterations <= 0 ||
      graph_neighbors <= 0 || window_length <= 0 || closure_threshold <= 0 ||
      closure_position_weight <= 0 || min_overlap_frames <= 0) {
    throw Error("EnergyConfig: all parameters must be positive");
  }
  if (min_support < 3) throw Error("EnergyConfig: min_support must be >= 3");
  if (min_lifetime_frames < 2) {
    throw Error("EnergyConfig: min_lifetime_frames must be >= 2");
  }
}

Pose MotionLabel::relative(int to_frame, int from_frame) const {
  return at(to_frame) * at(from_frame).inverse();
}

const MotionLabel* Segmentation::label(int id) const {
  for (const auto& l : labels) {
    if (l.id == id) return &l;
  }
  return nullptr;
}

std::optional<int> Segmentation::label_of(int track_id) const {
  for (const auto& l : labels) {
    if (l.support.count(track_id)) return l.id;
  }
  return std::nullopt;
}

void Segmentation::check_partition(const std::vector<int>& ids) const {
  std::set<int> seen = outliers;
  std::size_t total = outliers.size();
  for (const auto& l : labels) {
    total += l.support.size();
    seen.insert(l.support.begin(), l.support.end());
  }
  if (total != ids.size() || seen != std::set<int>(ids.begin(), ids.end())) {
    throw Error("Segmentation: supports and outliers do not partition window");
  }
}

std::optional<Pose> wahba_svd(
    const std::vector<std::pair<Vec3, Vec3>>& from_to) {
  if (from_to.size() < 3) return std::nullopt;
  Vec3 mean_from = Vec3::Zero();
  Vec3 mean_to = Vec3::Zero();
  for (const auto& [a, b] : from_to) {
    mean_from += a;
    mean_to += b;
  }
  mean_from /= static_cast<double>(from_to.size());
  mean_to /= static_cast<double>(from_to.size());

  Mat3 h = Mat3::Zero();
  for (const auto& [a, b] : from_to) {
    h += (a - mean_from) * (b - mean_to).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vec3 sv = svd.singularValues();
  if (sv(1) <= 1e-12 * std::max(sv(0), 1e-300)) {
    return std::nullopt;  // collinear sample
  }
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  Mat3 d = Mat3::Identity();
  d(2, 2) = u.determinant() * v.determinant() > 0 ? 1.0 : -1.0;
  Mat3 rotation = v * d * u.transpose();
  Vec3 translation = mean_to - rotation * mean_from;
  return Pose::from_parts(rotation, translation);
}

double reprojection_residual(const Tracklet& tracklet, const Pose& T_to_from,
                             int frame_from, int frame_to,
                             const StereoCalib& calib) {
  const TrackletObs* from = tracklet.at_frame(frame_from);
  const TrackletObs* to = tracklet.at_frame(frame_to);
  if (!from || !to) return kResidualCap;
  auto predicted = try_project(T_to_from * from->point, calib);
  if (!predicted) return kResidualCap;
  Vec3 diff(to->pixel.u - predicted->u, to->pixel.v - predicted->v,
            to->pixel.d - predicted->d);
  double e = diff.norm();
  return std::min(e, kResidualCap);
}

std::optional<RansacResult> ransac_frame_pair(const TrackletStore& store,
                                              const std::vector<int>& candidates,
                                              int frame_from, int frame_to,
                                              const EnergyConfig& cfg,
                                              const StereoCalib& calib,
                                              std::mt19937_64& rng) {
  struct Pair {
    int id;
    Vec3 from;
    Vec3 to;
  };
  std::vector<Pair> pairs;
  for (int id : candidates) {
    const Tracklet* t = store.by_id(id);
    if (!t) continue;
    const TrackletObs* a = t->at_frame(frame_from);
    const TrackletObs* b = t->at_frame(frame_to);
    if (a && b) pairs.push_back({id, a->point, b->point});
  }
  if (pairs.size() < 3) return std::nullopt;

  std::vector<std::size_t> indices(pairs.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;

  std::optional<RansacResult> best;
  std::size_t best_count = 0;
  for (int iter = 0; iter < cfg.ransac_iterations; ++iter) {
    // Three distinct samples without replacement.
    for (int s = 0; s < 3; ++s) {
      std::uniform_int_distribution<std::size_t> pick(s, indices.size() - 1);
      std::swap(indices[s], indices[pick(rng)]);
    }
    std::vector<std::pair<Vec3, Vec3>> sample;
    sample.reserve(3);
    for (int s = 0; s < 3; ++s) {
      sample.emplace_back(pairs[indices[s]].from, pairs[indices[s]].to);
    }
    auto transform = wahba_svd(sample);
    if (!transform) continue;

    std::vector<int> inliers;
    for (const auto& p : pairs) {
      auto predicted = try_project(*transform * p.from, calib);
      if (!predicted) continue;
      const Tracklet* t = store.by_id(p.id);
      const TrackletObs* obs = t->at_frame(frame_to);
      Vec3 diff(obs->pixel.u - predicted->u, obs->pixel.v - predicted->v,
                obs->pixel.d - predicted->d);
      if (diff.norm() < cfg.inlier_threshold_px) inliers.push_back(p.id);
    }
    if (inliers.size() > best_count) {
      best_count = inliers.size();
      best = RansacResult{*transform, std::move(inliers)};
    }
  }
  return best;
}

double label_residual(const Tracklet& tracklet, const MotionLabel& label,
                      const StereoCalib& calib) {
  double worst = -1.0;
  for (std::size_t i = 1; i < tracklet.observations.size(); ++i) {
    int from = tracklet.observations[i - 1].frame;
    int to = tracklet.observations[i].frame;
    if (!label.covers(from) || !label.covers(to)) continue;
    worst = std::max(worst, reprojection_residual(
                                tracklet, label.relative(to, from), from, to,
                                calib));
  }
  return worst < 0 ? kResidualCap : worst;
}

double outlier_residual(double min_label_residual, const EnergyConfig& cfg) {
  return cfg.outlier_scale *
         std::exp(-std::min(min_label_residual, kResidualCap) /
                  cfg.outlier_decay);
}

namespace {

// Residuals of every window tracklet against every label; rows follow
// store.tracklets(), columns follow seg.labels.
struct ResidualTable {
  std::vector<std::vector<double>> rho;
  std::vector<double> min_rho;
};

ResidualTable build_residual_table(const TrackletStore& store,
                                   const std::vector<MotionLabel>& labels,
                                   const StereoCalib& calib) {
  ResidualTable table;
  const auto& tracklets = store.tracklets();
  table.rho.resize(tracklets.size());
  table.min_rho.assign(tracklets.size(), kResidualCap);
  parallel_for(tracklets.size(), [&](std::size_t i) {
    table.rho[i].resize(labels.size());
    for (std::size_t l = 0; l < labels.size(); ++l) {
      table.rho[i][l] = label_residual(tracklets[i], labels[l], calib);
      table.min_rho[i] = std::min(table.min_rho[i], table.rho[i][l]);
    }
  });
  return table;
}

std::map<int, int> assignment_map(const Segmentation& seg) {
  std::map<int, int> out;  // track id -> label id, -1 outlier
  for (const auto& l : seg.labels) {
    for (int id : l.support) out[id] = l.id;
  }
  for (int id : seg.outliers) out[id] = -1;
  return out;
}

/// Connected components of the graph restricted to `members`; components and
/// their contents sorted ascending.
std::vector<std::vector<int>> components_of(const RigidityGraph& graph,
                                            const std::set<int>& members) {
  std::vector<std::vector<int>> components;
  std::set<int> remaining = members;
  while (!remaining.empty()) {
    std::vector<int> component;
    std::vector<int> stack{*remaining.begin()};
    remaining.erase(remaining.begin());
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      component.push_back(v);
      for (const auto& nbr : graph.neighbors(v)) {
        auto it = remaining.find(nbr.id);
        if (it != remaining.end()) {
          remaining.erase(it);
          stack.push_back(nbr.id);
        }
      }
    }
    std::sort(component.begin(), component.end());
    components.push_back(std::move(component));
  }
  std::sort(components.begin(), components.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return components;
}

struct BuiltTrajectory {
  int first_frame = 0;
  std::vector<Pose> trajectory;
  std::set<int> inliers;
};

/// Chains per-frame-pair RANSAC transforms over the longest contiguous run of
/// estimable pairs; inliers are the candidates within threshold of the whole
/// chain.
std::optional<BuiltTrajectory> build_trajectory(
    const TrackletStore& store, const std::vector<int>& candidates,
    const EnergyConfig& cfg, const StereoCalib& calib, std::mt19937_64& rng) {
  int first = store.first_frame();
  int last = store.last_frame();
  if (last <= first) return std::nullopt;

  std::vector<std::optional<Pose>> pair_transforms;  // (f -> f+1)
  for (int f = first; f < last; ++f) {
    auto result = ransac_frame_pair(store, candidates, f, f + 1, cfg, calib, rng);
    pair_transforms.push_back(result ? std::optional<Pose>(result->transform)
                                     : std::nullopt);
  }

  // Longest contiguous run of estimable pairs, earliest on ties.
  int best_start = -1, best_len = 0, run_start = -1, run_len = 0;
  for (std::size_t i = 0; i <= pair_transforms.size(); ++i) {
    if (i < pair_transforms.size() && pair_transforms[i]) {
      if (run_len == 0) run_start = static_cast<int>(i);
      ++run_len;
    } else {
      if (run_len > best_len) {
        best_len = run_len;
        best_start = run_start;
      }
      run_len = 0;
    }
  }
  if (best_len == 0) return std::nullopt;

  BuiltTrajectory built;
  built.first_frame = first + best_start;
  built.trajectory.push_back(Pose());
  for (int i = 0; i < best_len; ++i) {
    built.trajectory.push_back(*pair_transforms[best_start + i] *
                               built.trajectory.back());
  }

  MotionLabel probe;
  probe.first_frame = built.first_frame;
  probe.trajectory = built.trajectory;
  for (int id : candidates) {
    const Tracklet* t = store.by_id(id);
    if (t && label_residual(*t, probe, calib) <= cfg.inlier_threshold_px) {
      built.inliers.insert(id);
    }
  }
  if (built.inliers.size() < 3) return std::nullopt;
  return built;
}

}  // namespace

double smoothness_cost(const Segmentation& seg, const RigidityGraph& graph) {
  auto labels = assignment_map(seg);
  double cost = 0.0;
  for (const auto& e : graph.edges()) {
    auto a = labels.find(e.a);
    auto b = labels.find(e.b);
    if (a == labels.end() || b == labels.end()) continue;
    if (a->second != b->second) cost += std::exp(-e.cost);
  }
  return cost;
}

double segmentation_energy(const Segmentation& seg, const RigidityGraph& graph,
                           const TrackletStore& store, const EnergyConfig& cfg,
                           const StereoCalib& calib) {
  ResidualTable table = build_residual_table(store, seg.labels, calib);
  const auto& tracklets = store.tracklets();

  double residual = 0.0;
  for (std::size_t i = 0; i < tracklets.size(); ++i) {
    auto assigned = seg.label_of(tracklets[i].id);
    if (assigned) {
      for (std::size_t l = 0; l < seg.labels.size(); ++l) {
        if (seg.labels[l].id == *assigned) {
          residual += table.rho[i][l];
          break;
        }
      }
    } else if (!seg.labels.empty()) {
      residual += outlier_residual(table.min_rho[i], cfg);
    }
  }

  double complexity = 0.0;
  for (const auto& l : seg.labels) {
    if (!l.support.empty()) complexity += cfg.label_cost;
  }

  return residual + cfg.smoothness_weight * smoothness_cost(seg, graph) +
         complexity;
}

Segmentation propose_labels(const Segmentation& seg, const RigidityGraph& graph,
                            const TrackletStore& store, const EnergyConfig& cfg,
                            const StereoCalib& calib, std::mt19937_64& rng,
                            int& next_label_id) {
  Segmentation out;
  out.outliers = seg.outliers;

  for (const auto& label : seg.labels) {
    auto components = components_of(graph, label.support);
    if (components.empty()) continue;

    // The largest component keeps the parent id (first on ties).
    std::size_t keeper = 0;
    for (std::size_t c = 1; c < components.size(); ++c) {
      if (components[c].size() > components[keeper].size()) keeper = c;
    }

    for (std::size_t c = 0; c < components.size(); ++c) {
      const auto& component = components[c];
      std::optional<BuiltTrajectory> built;
      if (component.size() >= 3) {
        built = build_trajectory(store, component, cfg, calib, rng);
      }
      if (!built) {
        out.outliers.insert(component.begin(), component.end());
        continue;
      }
      MotionLabel candidate;
      candidate.id = (c == keeper) ? label.id : next_label_id++;
      candidate.first_frame = built->first_frame;
      candidate.trajectory = std::move(built->trajectory);
      candidate.support = built->inliers;
      for (int id : component) {
        if (!candidate.support.count(id)) out.outliers.insert(id);
      }
      out.labels.push_back(std::move(candidate));
    }
  }

  // New labels from the outlier set.
  auto outlier_components = components_of(graph, out.outliers);
  for (const auto& component : outlier_components) {
    if (component.size() < 3) continue;
    auto built = build_trajectory(store, component, cfg, calib, rng);
    if (!built) continue;
    MotionLabel candidate;
    candidate.id = next_label_id++;
    candidate.first_frame = built->first_frame;
    candidate.trajectory = std::move(built->trajectory);
    candidate.support = built->inliers;
    for (int id : candidate.support) out.outliers.erase(id);
    out.labels.push_back(std::move(candidate));
  }

  std::sort(out.labels.begin(), out.labels.end(),
            [](const MotionLabel& a, const MotionLabel& b) { return a.id < b.id; });
  out.energy = segmentation_energy(out, graph, store, cfg, calib);
  return out;
}

Segmentation assign_labels(const Segmentation& seg, const RigidityGraph& graph,
                           const TrackletStore& store, const EnergyConfig& cfg,
                           const StereoCalib& calib) {
  Segmentation out;
  out.labels = seg.labels;
  for (auto& l : out.labels) l.support.clear();

  const auto& tracklets = store.tracklets();
  const std::size_t n = tracklets.size();
  const std::size_t num_labels = seg.labels.size();
  if (num_labels == 0) {
    for (const auto& t : tracklets) out.outliers.insert(t.id);
    out.energy = segmentation_energy(out, graph, store, cfg, calib);
    return out;
  }
  const std::size_t options = num_labels + 1;  // outlier option last

  ResidualTable table = build_residual_table(store, seg.labels, calib);
  std::vector<std::vector<double>> cost(n, std::vector<double>(options));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < num_labels; ++l) cost[i][l] = table.rho[i][l];
    cost[i][num_labels] = outlier_residual(table.min_rho[i], cfg);
  }

  std::map<int, std::size_t> row_of;
  for (std::size_t i = 0; i < n; ++i) row_of[tracklets[i].id] = i;

  auto normalize = [](std::vector<double>& weights) {
    double lo = *std::min_element(weights.begin(), weights.end());
    double sum = 0.0;
    for (double& w : weights) {
      w = std::exp(-(w - lo));
      sum += w;
    }
    for (double& w : weights) w /= sum;
  };

  // Initial scores from the data costs alone.
  std::vector<std::vector<double>> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = cost[i];
    normalize(scores[i]);
  }

  // Block-coordinate sweeps; every update reads the previous sweep.
  constexpr int kMaxSweeps = 20;
  constexpr double kScoreTol = 1e-4;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    std::vector<std::vector<double>> next(n);
    std::vector<double> deltas(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
      std::vector<double> total = cost[i];
      for (const auto& nbr : graph.neighbors(tracklets[i].id)) {
        auto it = row_of.find(nbr.id);
        if (it == row_of.end()) continue;
        double weight = cfg.smoothness_weight * std::exp(-nbr.cost);
        const auto& nbr_scores = scores[it->second];
        for (std::size_t o = 0; o < options; ++o) {
          total[o] += weight * (1.0 - nbr_scores[o]);
        }
      }
      normalize(total);
      double delta = 0.0;
      for (std::size_t o = 0; o < options; ++o) {
        delta = std::max(delta, std::abs(total[o] - scores[i][o]));
      }
      deltas[i] = delta;
      next[i] = std::move(total);
    });
    scores = std::move(next);
    if (*std::max_element(deltas.begin(), deltas.end()) < kScoreTol) break;
  }

  // Discretize: strongest label wins only with a score above 0.5.
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t o = 1; o < options; ++o) {
      if (scores[i][o] > scores[i][best]) best = o;
    }
    if (best < num_labels && scores[i][best] > 0.5) {
      out.labels[best].support.insert(tracklets[i].id);
    } else {
      out.outliers.insert(tracklets[i].id);
    }
  }

  out.energy = segmentation_energy(out, graph, store, cfg, calib);
  return out;
}

Segmentation merge_labels(const Segmentation& seg, const RigidityGraph& graph,
                          const TrackletStore& store, const EnergyConfig& cfg,
                          const StereoCalib& calib) {
  Segmentation out = seg;
  if (out.labels.size() < 2) {
    out.energy = segmentation_energy(out, graph, store, cfg, calib);
    return out;
  }

  ResidualTable table = build_residual_table(store, out.labels, calib);
  std::map<int, std::size_t> row_of;
  for (std::size_t i = 0; i < store.tracklets().size(); ++i) {
    row_of[store.tracklets()[i].id] = i;
  }

  std::vector<char> alive(out.labels.size(), 1);
  auto assignment = assignment_map(out);

  auto merge_delta = [&](std::size_t keep, std::size_t dissolve) {
    const MotionLabel& lk = out.labels[keep];
    const MotionLabel& ld = out.labels[dissolve];
    if (ld.support.empty() || lk.support.empty()) return 0.0;
    double delta = -cfg.label_cost;
    for (int id : ld.support) {
      std::size_t row = row_of.at(id);
      delta += table.rho[row][keep] - table.rho[row][dissolve];
    }
    // Smoothness change over edges touching the dissolved support.
    for (const auto& e : graph.edges()) {
      auto ia = assignment.find(e.a);
      auto ib = assignment.find(e.b);
      if (ia == assignment.end() || ib == assignment.end()) continue;
      int la = ia->second, lb = ib->second;
      bool before = la != lb;
      int la_after = (la == ld.id) ? lk.id : la;
      int lb_after = (lb == ld.id) ? lk.id : lb;
      bool after = la_after != lb_after;
      if (before != after) {
        delta += cfg.smoothness_weight * std::exp(-e.cost) *
                 ((after ? 1.0 : 0.0) - (before ? 1.0 : 0.0));
      }
    }
    return delta;
  };

  for (;;) {
    double best_delta = -1e-12;
    int best_keep = -1, best_dissolve = -1;
    for (std::size_t a = 0; a < out.labels.size(); ++a) {
      if (!alive[a]) continue;
      for (std::size_t b = 0; b < out.labels.size(); ++b) {
        if (a == b || !alive[b]) continue;
        double delta = merge_delta(a, b);
        if (delta < best_delta) {
          best_delta = delta;
          best_keep = static_cast<int>(a);
          best_dissolve = static_cast<int>(b);
        }
      }
    }
    if (best_keep < 0) break;
    auto& keep = out.labels[best_keep];
    auto& dissolve = out.labels[best_dissolve];
    for (int id : dissolve.support) assignment[id] = keep.id;
    keep.support.insert(dissolve.support.begin(), dissolve.support.end());
    dissolve.support.clear();
    alive[best_dissolve] = 0;
  }

  std::vector<MotionLabel> kept;
  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    if (alive[i]) kept.push_back(std::move(out.labels[i]));
  }
  out.labels = std::move(kept);
  out.energy = segmentation_energy(out, graph, store, cfg, calib);
  return out;
}

Segmentation sanitize(const Segmentation& seg, const TrackletStore& store,
                      const EnergyConfig& cfg, const StereoCalib& calib) {
  Segmentation out = seg;

  for (auto& label : out.labels) {
    std::vector<int> evicted;
    for (int id : label.support) {
      const Tracklet* t = store.by_id(id);
      if (!t || label_residual(*t, label, calib) > cfg.inlier_threshold_px) {
        evicted.push_back(id);
      }
    }
    for (int id : evicted) {
      label.support.erase(id);
      out.outliers.insert(id);
    }
  }

  std::vector<MotionLabel> kept;
  for (auto& label : out.labels) {
    if (static_cast<int>(label.support.size()) < cfg.min_support ||
        label.lifetime() < cfg.min_lifetime_frames) {
      out.outliers.insert(label.support.begin(), label.support.end());
    } else {
      kept.push_back(std::move(label));
    }
  }
  out.labels = std::move(kept);
  return out;
}

Segmentation segment_window(const TrackletStore& window,
                            const RigidityGraph& graph,
                            const Segmentation& prior, const EnergyConfig& cfg,
                            const StereoCalib& calib, std::mt19937_64& rng,
                            int* next_label_id) {
  cfg.validate();
  int local_counter = 0;
  for (const auto& l : prior.labels) local_counter = std::max(local_counter, l.id + 1);
  int& counter = next_label_id ? *next_label_id : local_counter;
  if (next_label_id) {
    for (const auto& l : prior.labels) counter = std::max(counter, l.id + 1);
  }

  // Restrict the prior to the window's tracklets.
  std::vector<int> window_ids;
  for (const auto& t : window.tracklets()) window_ids.push_back(t.id);
  std::set<int> window_set(window_ids.begin(), window_ids.end());

  Segmentation seg;
  std::set<int> claimed;
  for (const auto& l : prior.labels) {
    MotionLabel clipped = l;
    clipped.support.clear();
    for (int id : l.support) {
      if (window_set.count(id)) {
        clipped.support.insert(id);
        claimed.insert(id);
      }
    }
    seg.labels.push_back(std::move(clipped));
  }
  for (int id : window_ids) {
    if (!claimed.count(id)) seg.outliers.insert(id);
  }

  using Labeling = std::pair<std::vector<std::set<int>>, std::set<int>>;
  auto canonical = [](const Segmentation& s) {
    Labeling key;
    for (const auto& l : s.labels) {
      if (!l.support.empty()) key.first.push_back(l.support);
    }
    std::sort(key.first.begin(), key.first.end());
    key.second = s.outliers;
    return key;
  };

  std::optional<Labeling> previous;
  for (int iter = 0; iter < cfg.max_outer_iterations; ++iter) {
    seg = propose_labels(seg, graph, window, cfg, calib, rng, counter);
    seg = assign_labels(seg, graph, window, cfg, calib);
    seg = merge_labels(seg, graph, window, cfg, calib);
    Labeling key = canonical(seg);
    if (previous && key == *previous) break;
    previous = std::move(key);
  }

  seg = sanitize(seg, window, cfg, calib);
  seg.energy = segmentation_energy(seg, graph, window, cfg, calib);
  seg.check_partition(window_ids);
  return seg;
}

void write_segmentation_csv(const Segmentation& seg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_segmentation_csv: cannot open " + path);
  out << "track_id,label_id\n";
  std::map<int, int> rows;
  for (const auto& l : seg.labels) {
    for (int id : l.support) rows[id] = l.id;
  }
  for (int id : seg.outliers) rows[id] = -1;
  for (const auto& [id, label] : rows) {
    out << id << "," << label << "\n";
  }
}

}  // namespace mvo
