#include "mvo/sliding_window.hpp"

#include <algorithm>
#include <cmath>

#include "mvo/runtime.hpp"

namespace mvo {

const char* track_status_name(TrackStatus status) {
  switch (status) {
    case TrackStatus::kDirect: return "direct";
    case TrackStatus::kExtrapolated: return "extrapolated";
    case TrackStatus::kInterpolated: return "interpolated";
    case TrackStatus::kClosed: return "closed";
  }
  return "?";
}

GpState MotionTrack::state_at(int frame) const {
  if (!covers(frame)) {
    throw Error("MotionTrack: frame outside track history");
  }
  int i = frame - anchor_frame;
  GpState s;
  s.pose = poses[i];
  if (!velocities.empty()) s.velocity = velocities[i];
  if (!accelerations.empty()) s.acceleration = accelerations[i];
  return s;
}

void MotionTrack::set_state(int frame, const GpState& state,
                            TrackStatus new_status) {
  const bool with_velocity = flavor != Flavor::kPoseOnly;
  const bool with_acceleration = flavor == Flavor::kPoseVelocityAccel;
  if (frame == last_frame() + 1 || poses.empty()) {
    if (poses.empty()) anchor_frame = frame;
    poses.push_back(state.pose);
    if (with_velocity) velocities.push_back(state.velocity);
    if (with_acceleration) accelerations.push_back(state.acceleration);
    status.push_back(new_status);
    return;
  }
  if (!covers(frame)) {
    throw Error("MotionTrack: set_state would leave a gap");
  }
  int i = frame - anchor_frame;
  poses[i] = state.pose;
  if (with_velocity) velocities[i] = state.velocity;
  if (with_acceleration) accelerations[i] = state.acceleration;
  status[i] = new_status;
}

Pose MotionTrack::object_from_camera(int frame,
                                     const Pose& cam_from_anchor) const {
  return state_at(frame).pose * anchor.object_from_camera *
         cam_from_anchor.inverse();
}

void MotionTrack::check_status() const {
  if (status.size() != poses.size()) {
    throw Error("MotionTrack: status/pose length mismatch");
  }
  auto measured = [&](std::size_t i) {
    return status[i] == TrackStatus::kDirect ||
           status[i] == TrackStatus::kClosed;
  };
  for (std::size_t i = 0; i < status.size(); ++i) {
    if (status[i] != TrackStatus::kInterpolated) continue;
    // Find the enclosing run and require measured states on both sides.
    std::size_t lo = i;
    while (lo > 0 && status[lo - 1] == TrackStatus::kInterpolated) --lo;
    std::size_t hi = i;
    while (hi + 1 < status.size() &&
           status[hi + 1] == TrackStatus::kInterpolated) {
      ++hi;
    }
    if (lo == 0 || hi + 1 >= status.size() || !measured(lo - 1) ||
        !measured(hi + 1)) {
      throw Error("MotionTrack: interpolated span not bracketed by estimates");
    }
  }
}

std::map<int, int> associate_labels(const Segmentation& current,
                                    const Segmentation& previous,
                                    double min_fraction) {
  struct Candidate {
    int overlap;
    int current_id;
    int previous_id;
  };
  std::vector<Candidate> candidates;
  for (const auto& cur : current.labels) {
    for (const auto& prev : previous.labels) {
      int overlap = 0;
      for (int id : cur.support) {
        if (prev.support.count(id)) ++overlap;
      }
      if (overlap > 0 &&
          overlap >=
              min_fraction * static_cast<double>(cur.support.size())) {
        candidates.push_back({overlap, cur.id, prev.id});
      }
    }
  }
  std::sort(candidates.begin(), candidates.end(),
            [](const Candidate& a, const Candidate& b) {
              if (a.overlap != b.overlap) return a.overlap > b.overlap;
              if (a.current_id != b.current_id) {
                return a.current_id < b.current_id;
              }
              return a.previous_id < b.previous_id;
            });
  std::map<int, int> mapping;
  std::set<int> used;
  for (const auto& c : candidates) {
    if (mapping.count(c.current_id) || used.count(c.previous_id)) continue;
    mapping[c.current_id] = c.previous_id;
    used.insert(c.previous_id);
  }
  return mapping;
}

GpState extrapolate_track(const MotionTrack& track, int frame,
                          const PipelineConfig& cfg) {
  int f0 = track.last_direct_frame;
  if (!track.covers(f0)) {
    throw Error("extrapolate_track: missing last direct state");
  }
  GpState base = track.state_at(f0);
  double dt = (frame - f0) * cfg.dt;
  if (track.flavor == Flavor::kPoseOnly) {
    // Discrete velocity from the final two poses.
    Vec6 velocity = Vec6::Zero();
    if (f0 > track.first_frame()) {
      velocity = (track.state_at(f0).pose *
                  track.state_at(f0 - 1).pose.inverse())
                     .log() /
                 cfg.dt;
    }
    GpState state = base;
    state.velocity = velocity;
    return gp_extrapolate(state, dt, 2);
  }
  return gp_extrapolate(base, dt, prior_order(track.flavor));
}

GpState interpolate_track(const MotionTrack& track, int frame_j, int frame_k,
                          int frame, const PipelineConfig& cfg) {
  GpState at_j = track.state_at(frame_j);
  GpState at_k = track.state_at(frame_k);
  if (track.flavor == Flavor::kPoseOnly) {
    if (frame == frame_j) return at_j;
    if (frame == frame_k) return at_k;
    GpState out;
    out.pose = pose_only_interpolate(at_j.pose, at_k.pose, frame_j * cfg.dt,
                                     frame_k * cfg.dt, frame * cfg.dt);
    return out;
  }
  return gp_interpolate(at_j, at_k, frame_j * cfg.dt, frame_k * cfg.dt,
                        frame * cfg.dt, prior_order(track.flavor),
                        cfg.prior.qc(), cfg.prior.jacobian_mode);
}

std::optional<int> try_motion_closure(
    const ClosureQuery& query, const std::vector<ClosureCandidate>& candidates,
    Flavor flavor, const EnergyConfig& cfg) {
  std::optional<int> best;
  double best_metric = cfg.closure_threshold;
  for (const auto& candidate : candidates) {
    double metric = cfg.closure_position_weight *
                    (candidate.centroid_camera - query.centroid_camera).norm();
    if (flavor != Flavor::kPoseOnly) {
      Pose rel =
          candidate.object_from_camera * query.object_from_camera.inverse();
      metric += (1.0 - cfg.closure_position_weight) *
                (candidate.velocity - rel.adjoint() * query.velocity).norm();
    }
    if (metric < best_metric) {
      best_metric = metric;
      best = candidate.track_id;
    }
  }
  return best;
}

Pose closure_correction(const ClosureCandidate& chosen,
                        const ClosureQuery& query) {
  Vec3 translation = chosen.object_from_camera.rotation() *
                     (chosen.centroid_camera - query.centroid_camera);
  return Pose::from_parts(Mat3::Identity(), translation);
}

namespace {

MotionLabel clip_label(const MotionLabel& label, int first, int last) {
  MotionLabel out;
  out.id = label.id;
  out.first_frame = first;
  out.support = label.support;
  for (int f = first; f <= last; ++f) {
    out.trajectory.push_back(label.at(f) * label.at(first).inverse());
  }
  return out;
}

}  // namespace

Pipeline::Pipeline(PipelineConfig cfg, StereoCalib calib)
    : cfg_(std::move(cfg)), calib_(std::move(calib)), rng_(cfg_.seed) {
  cfg_.energy.validate();
  cfg_.prior.validate();
  calib_.validate();
}

const MotionTrack* Pipeline::ego_track() const {
  return ego_track_id_ < 0 ? nullptr : track(ego_track_id_);
}

const MotionTrack* Pipeline::track(int id) const {
  for (const auto& t : tracks_) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

void Pipeline::run(const TrackletStore& stream) {
  if (stream.empty()) throw Error("Pipeline: empty tracklet stream");
  int first = stream.first_frame();
  int last = stream.last_frame();
  int window = cfg_.energy.window_length;
  int first_end = std::min(last, first + window - 1);
  for (int end = first_end; end <= last; ++end) {
    int start = std::max(first, end - window + 1);
    process_window(stream, start, end);
  }
}

std::vector<double> Pipeline::times_for(const MotionLabel& label) const {
  std::vector<double> times;
  for (int f = label.first_frame; f <= label.last_frame(); ++f) {
    times.push_back(f * cfg_.dt);
  }
  return times;
}

Pose Pipeline::camera_pose(int frame) const {
  const MotionTrack* ego = ego_track();
  if (!ego) throw Error("Pipeline: egomotion not yet estimated");
  if (ego->covers(frame)) return ego->state_at(frame).pose;
  if (frame == ego->last_frame() + 1 || frame > ego->last_frame()) {
    return extrapolate_track(*ego, frame, cfg_).pose;
  }
  throw Error("Pipeline: camera pose before track history");
}

Segmentation Pipeline::seed_labels(int first, int last,
                                   const TrackletStore& window) const {
  (void)window;
  Segmentation prior;
  for (const auto& [label_id, track_id] : label_to_track_) {
    const MotionTrack* tr = track(track_id);
    if (!tr || tr->retired) continue;
    const MotionLabel* prev = previous_seg_.label(label_id);
    if (!prev) continue;

    Pose cam_at_anchor = camera_pose(tr->anchor_frame);
    auto hypothesis_abs = [&](int f) {
      Pose cam = camera_pose(f) * cam_at_anchor.inverse();
      if (tr->is_ego) return cam;
      GpState geo = tr->covers(f) ? tr->state_at(f)
                                  : extrapolate_track(*tr, f, cfg_);
      return hypothesis_from_geocentric(geo.pose, cam, tr->anchor);
    };

    MotionLabel seeded;
    seeded.id = prev->id;
    seeded.first_frame = first;
    Pose base = hypothesis_abs(first);
    for (int f = first; f <= last; ++f) {
      seeded.trajectory.push_back(hypothesis_abs(f) * base.inverse());
    }
    seeded.support = prev->support;
    prior.labels.push_back(std::move(seeded));
  }
  std::sort(prior.labels.begin(), prior.labels.end(),
            [](const MotionLabel& a, const MotionLabel& b) {
              return a.id < b.id;
            });
  return prior;
}

void Pipeline::update_track_from_estimate(MotionTrack& track,
                                          const TrajectoryState& estimate,
                                          int gauge_frame) {
  Pose base;
  if (track.poses.empty()) {
    if (gauge_frame != track.anchor_frame) {
      throw Error("Pipeline: new track must be gauged at its anchor");
    }
    GpState start;
    start.pose = base;  // identity
    if (!estimate.velocities.empty()) {
      start.velocity = estimate.velocities.front();
    }
    if (!estimate.accelerations.empty()) {
      start.acceleration = estimate.accelerations.front();
    }
    track.set_state(gauge_frame, start, TrackStatus::kDirect);
  } else {
    base = track.state_at(gauge_frame).pose;
    // Refresh the gauge frame's derivatives; its pose is the composition
    // base and stays.
    if (!estimate.velocities.empty() || !estimate.accelerations.empty()) {
      GpState refreshed = track.state_at(gauge_frame);
      if (!estimate.velocities.empty()) {
        refreshed.velocity = estimate.velocities.front();
      }
      if (!estimate.accelerations.empty()) {
        refreshed.acceleration = estimate.accelerations.front();
      }
      track.set_state(gauge_frame, refreshed,
                      track.status[gauge_frame - track.anchor_frame]);
    }
  }

  for (int f = gauge_frame + 1; f <= estimate.last_frame(); ++f) {
    GpState s = estimate.state_at(f);
    s.pose = s.pose * base;
    track.set_state(f, s, TrackStatus::kDirect);
  }
  track.last_direct_frame =
      std::max(track.last_direct_frame, estimate.last_frame());
}

void Pipeline::extrapolate_missing(MotionTrack& track, int frame) {
  for (int f = track.last_frame() + 1; f <= frame; ++f) {
    track.set_state(f, extrapolate_track(track, f, cfg_),
                    TrackStatus::kExtrapolated);
  }
}

void Pipeline::process_window(const TrackletStore& stream, int first,
                              int last) {
  TrackletStore window = stream.window(first, last);
  WindowOutput output;
  output.window_first = first;
  output.window_last = last;

  if (window.empty()) {
    log(LogLevel::kWarn, "pipeline: empty window at frame " +
                             std::to_string(last));
    windows_.push_back(std::move(output));
    return;
  }

  RigidityGraph graph = build_graph(window, cfg_.energy.graph_neighbors,
                                    cfg_.energy.min_overlap_frames);
  Segmentation prior;
  if (has_previous_) prior = seed_labels(first, last, window);
  Segmentation seg = segment_window(window, graph, prior, cfg_.energy, calib_,
                                    rng_, &next_label_id_);

  // Map current labels onto existing tracks through the previous window.
  std::map<int, int> label_track;
  if (has_previous_) {
    auto assoc = associate_labels(seg, previous_seg_, cfg_.association_overlap);
    for (const auto& [cur, prev] : assoc) {
      auto it = label_to_track_.find(prev);
      if (it == label_to_track_.end()) continue;
      const MotionTrack* tr = track(it->second);
      if (tr && !tr->retired) label_track[cur] = it->second;
    }
  }

  std::set<int> updated_tracks;

  if (!seg.labels.empty()) {
    int ego_label_id = select_egomotion(seg);
    const MotionLabel& ego_label = *seg.label(ego_label_id);

    // Bind the ego label to the ego track.
    if (ego_track_id_ < 0) {
      MotionTrack ego;
      ego.id = next_track_id_++;
      ego.flavor = cfg_.flavor;
      ego.anchor_frame = ego_label.first_frame;
      ego.anchor = GeoFrameAnchor{Pose(), ego_label.first_frame};
      ego.is_ego = true;
      ego.last_direct_frame = ego_label.first_frame;
      tracks_.push_back(std::move(ego));
      ego_track_id_ = tracks_.back().id;
    } else if (label_track.count(ego_label_id) &&
               label_track[ego_label_id] != ego_track_id_) {
      log(LogLevel::kWarn, "pipeline: egomotion label re-bound to ego track");
    }
    label_track[ego_label_id] = ego_track_id_;

    // Egomotion first; third-party estimation needs it.
    try {
      MotionTrack& ego = *const_cast<MotionTrack*>(track(ego_track_id_));
      int gauge = std::max(ego_label.first_frame, ego.first_frame());
      MotionLabel clipped = clip_label(ego_label, gauge, ego_label.last_frame());
      TrajectoryState est =
          estimate_ego_trajectory(window, clipped.support, clipped, cfg_.flavor,
                                  calib_, cfg_.prior, times_for(clipped));
      update_track_from_estimate(ego, est, gauge);
      updated_tracks.insert(ego.id);
    } catch (const Error& e) {
      log(LogLevel::kWarn,
          std::string("pipeline: egomotion estimation failed: ") + e.what());
    }

    // Third-party labels in ascending id order.
    for (const auto& label : seg.labels) {
      if (label.id == ego_label_id) continue;
      try {
        auto track_it = label_track.find(label.id);
        bool continuing = track_it != label_track.end();

        int gauge = label.first_frame;
        MotionTrack* existing = nullptr;
        if (continuing) {
          existing = const_cast<MotionTrack*>(track(track_it->second));
          gauge = std::max(gauge, existing->first_frame());
        }
        MotionLabel clipped = clip_label(label, gauge, label.last_frame());

        Pose cam_at_gauge = camera_pose(gauge);
        std::vector<Pose> ego_rel;
        for (int f = gauge; f <= clipped.last_frame(); ++f) {
          ego_rel.push_back(camera_pose(f) * cam_at_gauge.inverse());
        }

        GeoFrameAnchor anchor;
        if (continuing) {
          Pose cam_from_anchor =
              cam_at_gauge * camera_pose(existing->anchor_frame).inverse();
          anchor = GeoFrameAnchor{
              existing->object_from_camera(gauge, cam_from_anchor), gauge};
        } else {
          anchor = make_centroid_anchor(window, clipped.support, clipped);
        }

        auto estimate_with = [&](const GeoFrameAnchor& a,
                                 const MotionLabel& lbl,
                                 const std::vector<Pose>& ego_vec) {
          if (cfg_.flavor == Flavor::kPoseOnly) {
            TrajectoryState hyp = estimate_ego_trajectory(
                window, lbl.support, lbl, Flavor::kPoseOnly, calib_,
                cfg_.prior, times_for(lbl));
            TrajectoryState geo = hyp;
            geo.poses = to_geocentric_pose_only(hyp.poses, ego_vec, a);
            geo.landmarks.clear();
            return geo;
          }
          return estimate_geo_trajectory(window, lbl.support, lbl, ego_vec, a,
                                         cfg_.flavor, calib_, cfg_.prior,
                                         times_for(lbl));
        };

        TrajectoryState est = estimate_with(anchor, clipped, ego_rel);

        if (continuing) {
          update_track_from_estimate(*existing, est, gauge);
          updated_tracks.insert(existing->id);
          continue;
        }

        // Newly discovered motion: attempt motion closure against occluded
        // tracks before creating a fresh track.
        ClosureQuery query;
        query.frame = gauge;
        query.centroid_camera = -anchor.object_from_camera.translation();
        query.object_from_camera = anchor.object_from_camera;
        if (!est.velocities.empty()) {
          query.velocity = est.velocities.front();
        } else if (est.poses.size() >= 2) {
          query.velocity =
              (est.poses[1] * est.poses[0].inverse()).log() / cfg_.dt;
        }

        std::vector<ClosureCandidate> candidates;
        for (const auto& tr : tracks_) {
          if (tr.retired || tr.is_ego) continue;
          if (updated_tracks.count(tr.id)) continue;
          if (label_track.count(label.id) &&
              label_track[label.id] == tr.id) {
            continue;
          }
          if (tr.last_direct_frame >= first) continue;  // not occluded
          if (!tr.covers(tr.last_direct_frame)) continue;
          GpState ext = extrapolate_track(tr, gauge, cfg_);
          ClosureCandidate candidate;
          candidate.track_id = tr.id;
          Pose cam_from_anchor =
              cam_at_gauge * camera_pose(tr.anchor_frame).inverse();
          candidate.object_from_camera = ext.pose *
                                         tr.anchor.object_from_camera *
                                         cam_from_anchor.inverse();
          candidate.centroid_camera =
              candidate.object_from_camera.inverse().translation();
          candidate.velocity = ext.velocity;
          if (tr.flavor == Flavor::kPoseOnly) {
            candidate.velocity = extrapolate_track(tr, gauge, cfg_).velocity;
          }
          candidates.push_back(std::move(candidate));
        }

        auto closed = try_motion_closure(query, candidates, cfg_.flavor,
                                         cfg_.energy);
        if (closed) {
          MotionTrack& old = *const_cast<MotionTrack*>(track(*closed));
          const ClosureCandidate* chosen = nullptr;
          for (const auto& c : candidates) {
            if (c.track_id == *closed) chosen = &c;
          }
          extrapolate_missing(old, gauge);

          Pose correction = closure_correction(*chosen, query);
          int f_before = old.last_direct_frame;
          GpState closed_state;
          closed_state.pose = correction * old.state_at(gauge).pose;
          Mat6 transport =
              (chosen->object_from_camera *
               query.object_from_camera.inverse())
                  .adjoint();
          if (cfg_.flavor != Flavor::kPoseOnly) {
            closed_state.velocity = transport * query.velocity;
            if (!est.accelerations.empty()) {
              closed_state.acceleration =
                  transport * est.accelerations.front();
            }
          }
          old.set_state(gauge, closed_state, TrackStatus::kClosed);
          old.last_direct_frame = gauge;
          for (int f = f_before + 1; f < gauge; ++f) {
            old.set_state(f, interpolate_track(old, f_before, gauge, f, cfg_),
                          TrackStatus::kInterpolated);
          }

          // Re-estimate the post-closure span against the corrected pose.
          if (clipped.last_frame() > gauge) {
            Pose cam_from_anchor =
                cam_at_gauge * camera_pose(old.anchor_frame).inverse();
            GeoFrameAnchor corrected{
                old.object_from_camera(gauge, cam_from_anchor), gauge};
            TrajectoryState rees = estimate_with(corrected, clipped, ego_rel);
            update_track_from_estimate(old, rees, gauge);
          }
          label_track[label.id] = old.id;
          updated_tracks.insert(old.id);
          continue;
        }

        MotionTrack fresh;
        fresh.id = next_track_id_++;
        fresh.flavor = cfg_.flavor;
        fresh.anchor_frame = gauge;
        fresh.anchor = anchor;
        fresh.last_direct_frame = gauge;
        tracks_.push_back(std::move(fresh));
        update_track_from_estimate(tracks_.back(), est, gauge);
        updated_tracks.insert(tracks_.back().id);
        label_track[label.id] = tracks_.back().id;
      } catch (const Error& e) {
        log(LogLevel::kWarn, std::string("pipeline: label ") +
                                 std::to_string(label.id) +
                                 " estimation failed: " + e.what());
      }
    }
  } else {
    log(LogLevel::kWarn, "pipeline: no labels in window ending at " +
                             std::to_string(last));
  }

  // Extend every live track to the window end; unobserved tracks become
  // extrapolated and are eventually dropped.
  for (auto& tr : tracks_) {
    if (tr.retired) continue;
    extrapolate_missing(tr, last);
    if (!tr.is_ego &&
        last - tr.last_direct_frame > cfg_.max_occlusion_frames) {
      tr.retired = true;
      log(LogLevel::kInfo,
          "pipeline: track " + std::to_string(tr.id) + " retired");
    }
  }

  // Window output with labels renumbered to track ids; labels that failed
  // estimation dissolve into the outliers for reporting.
  output.segmentation.outliers = seg.outliers;
  output.segmentation.energy = seg.energy;
  for (const auto& label : seg.labels) {
    auto it = label_track.find(label.id);
    if (it == label_track.end() || !updated_tracks.count(it->second)) {
      output.segmentation.outliers.insert(label.support.begin(),
                                          label.support.end());
      continue;
    }
    MotionLabel renamed = label;
    renamed.id = it->second;
    output.segmentation.labels.push_back(std::move(renamed));
  }
  std::sort(output.segmentation.labels.begin(),
            output.segmentation.labels.end(),
            [](const MotionLabel& a, const MotionLabel& b) {
              return a.id < b.id;
            });
  output.direct_track_ids.assign(updated_tracks.begin(), updated_tracks.end());

  previous_seg_ = std::move(seg);
  label_to_track_ = std::move(label_track);
  has_previous_ = true;
  windows_.push_back(std::move(output));
}

}  // namespace mvo
