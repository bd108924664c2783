#include "mvo/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mvo/runtime.hpp"

namespace mvo {

namespace {
constexpr int kBodyIdStride = 1000;
}

Pose TrajectoryProgram::pose_at(double t) const {
  switch (kind) {
    case ProgramKind::kConstantPose:
      return initial;
    case ProgramKind::kConstantVelocity:
      return initial * exp_map(t * velocity);
    case ProgramKind::kConstantAcceleration:
      return initial * exp_map(t * velocity + 0.5 * t * t * acceleration);
    case ProgramKind::kPendular: {
      double theta =
          amplitude * std::sin(2.0 * M_PI * t / period + phase);
      Mat3 r = so3_exp(theta * axis.normalized());
      Vec3 translation = (Mat3::Identity() - r) * hinge;
      return Pose::from_parts(r, translation) * initial;
    }
  }
  throw Error("TrajectoryProgram: invalid kind");
}

void SceneScript::validate() const {
  if (frame_count < 2) throw Error("SceneScript: frame_count must be >= 2");
  if (noise_sigma < 0) throw Error("SceneScript: noise_sigma must be >= 0");
  if (dt <= 0) throw Error("SceneScript: dt must be positive");
  calib.validate();
  for (const auto& body : bodies) {
    if (body.points.empty() && body.point_count <= 0) {
      throw Error("SceneScript: body needs points or a positive point_count");
    }
  }
}

GeneratedScene generate(const SceneScript& script) {
  script.validate();
  std::mt19937_64 rng(script.seed);

  // Materialize body point clouds first so noise draws do not depend on
  // visibility.
  std::vector<std::vector<Vec3>> clouds;
  for (const auto& body : script.bodies) {
    if (!body.points.empty()) {
      clouds.push_back(body.points);
      continue;
    }
    if (body.point_count > kBodyIdStride) {
      throw Error("SceneScript: point_count exceeds id stride");
    }
    std::vector<Vec3> cloud;
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int i = 0; i < body.point_count; ++i) {
      Vec3 offset(unit(rng) * body.box_half_extent.x(),
                  unit(rng) * body.box_half_extent.y(),
                  unit(rng) * body.box_half_extent.z());
      cloud.push_back(body.box_center + offset);
    }
    clouds.push_back(std::move(cloud));
  }

  SceneTruth truth;
  truth.body_poses.resize(script.bodies.size());
  truth.visible.assign(script.bodies.size(),
                       std::vector<bool>(script.frame_count, false));
  for (int f = 0; f < script.frame_count; ++f) {
    truth.timestamps.push_back(f * script.dt);
  }

  std::map<int, Tracklet> tracklets;
  std::normal_distribution<double> noise(0.0, 1.0);

  for (int f = 0; f < script.frame_count; ++f) {
    double t = f * script.dt;
    Pose camera = script.camera.pose_at(t);
    truth.camera_poses.push_back(camera);
    Pose world_from_camera = camera.inverse();

    bool any_visible = false;
    for (std::size_t b = 0; b < script.bodies.size(); ++b) {
      const SceneBody& body = script.bodies[b];
      Pose body_pose = body.program.pose_at(t);
      truth.body_poses[b].push_back(body_pose);

      bool occluded = false;
      for (const auto& [start, end] : body.occlusions) {
        if (f >= start && f <= end) {
          occluded = true;
          break;
        }
      }
      if (occluded) continue;

      for (std::size_t i = 0; i < clouds[b].size(); ++i) {
        Vec3 world_point = body_pose * clouds[b][i];
        Vec3 camera_point = world_from_camera * world_point;
        auto projected = try_project(camera_point, script.calib);
        if (!projected) continue;
        StereoObs pixel = *projected;
        if (script.noise_sigma > 0) {
          pixel.u += script.noise_sigma * noise(rng);
          pixel.v += script.noise_sigma * noise(rng);
          pixel.d += script.noise_sigma * noise(rng);
          if (pixel.d <= 0) continue;
        }
        if (script.frustum) {
          const auto& fr = *script.frustum;
          if (pixel.u < fr[0] || pixel.u > fr[1] || pixel.v < fr[2] ||
              pixel.v > fr[3]) {
            continue;
          }
        }
        int id = static_cast<int>(b) * kBodyIdStride + static_cast<int>(i);
        auto& tracklet = tracklets[id];
        tracklet.id = id;
        tracklet.observations.push_back(
            {f, pixel, unproject(pixel, script.calib)});
        truth.track_to_body[id] = static_cast<int>(b);
        truth.visible[b][f] = true;
        any_visible = true;
      }
    }
    if (!any_visible) {
      log(LogLevel::kWarn,
          "generate: no visible observations in frame " + std::to_string(f));
    }
  }

  std::vector<Tracklet> list;
  list.reserve(tracklets.size());
  for (auto& [id, t] : tracklets) list.push_back(std::move(t));
  return GeneratedScene{TrackletStore(std::move(list)), std::move(truth)};
}

double oracle_segmentation_score(const Segmentation& seg,
                                 const SceneTruth& truth) {
  if (truth.track_to_body.empty()) return 0.0;

  int num_bodies = static_cast<int>(truth.body_poses.size());
  std::vector<int> label_ids;
  for (const auto& l : seg.labels) label_ids.push_back(l.id);

  // correct[l][b]: tracklets of label l generated by body b.
  std::vector<std::vector<int>> hits(label_ids.size(),
                                     std::vector<int>(num_bodies, 0));
  for (std::size_t l = 0; l < seg.labels.size(); ++l) {
    for (int id : seg.labels[l].support) {
      auto it = truth.track_to_body.find(id);
      if (it != truth.track_to_body.end()) ++hits[l][it->second];
    }
  }

  // Exhaustive best injective assignment of labels to bodies.
  std::vector<int> bodies(num_bodies);
  for (int b = 0; b < num_bodies; ++b) bodies[b] = b;

  int best = 0;
  std::vector<int> chosen;
  std::vector<bool> used(num_bodies, false);
  std::function<void(std::size_t, int)> recurse = [&](std::size_t l, int acc) {
    if (l == label_ids.size()) {
      best = std::max(best, acc);
      return;
    }
    // Leave label l unmatched.
    recurse(l + 1, acc);
    for (int b = 0; b < num_bodies; ++b) {
      if (used[b]) continue;
      used[b] = true;
      recurse(l + 1, acc + hits[l][b]);
      used[b] = false;
    }
  };
  recurse(0, 0);

  return static_cast<double>(best) /
         static_cast<double>(truth.track_to_body.size());
}

namespace {

nlohmann::ordered_json program_to_json(const TrajectoryProgram& p) {
  nlohmann::ordered_json j;
  switch (p.kind) {
    case ProgramKind::kConstantPose: j["kind"] = "constant-pose"; break;
    case ProgramKind::kConstantVelocity: j["kind"] = "constant-velocity"; break;
    case ProgramKind::kConstantAcceleration:
      j["kind"] = "constant-acceleration";
      break;
    case ProgramKind::kPendular: j["kind"] = "pendular"; break;
  }
  // Row-major for readability.
  std::vector<double> row_major;
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) row_major.push_back(p.initial.matrix()(r, c));
  }
  j["initial"] = row_major;
  j["velocity"] = std::vector<double>(p.velocity.data(), p.velocity.data() + 6);
  j["acceleration"] =
      std::vector<double>(p.acceleration.data(), p.acceleration.data() + 6);
  j["axis"] = {p.axis.x(), p.axis.y(), p.axis.z()};
  j["hinge"] = {p.hinge.x(), p.hinge.y(), p.hinge.z()};
  j["amplitude"] = p.amplitude;
  j["period"] = p.period;
  j["phase"] = p.phase;
  return j;
}

TrajectoryProgram program_from_json(const nlohmann::json& j) {
  TrajectoryProgram p;
  std::string kind = j.value("kind", "constant-pose");
  if (kind == "constant-pose") {
    p.kind = ProgramKind::kConstantPose;
  } else if (kind == "constant-velocity") {
    p.kind = ProgramKind::kConstantVelocity;
  } else if (kind == "constant-acceleration") {
    p.kind = ProgramKind::kConstantAcceleration;
  } else if (kind == "pendular") {
    p.kind = ProgramKind::kPendular;
  } else {
    throw IoError("scene script: unknown program kind '" + kind + "'");
  }
  if (j.contains("initial")) {
    auto v = j.at("initial").get<std::vector<double>>();
    if (v.size() != 16) throw IoError("scene script: initial needs 16 values");
    Mat4 m;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) m(r, c) = v[4 * r + c];
    }
    p.initial = Pose(m);
  }
  auto read_vec6 = [&](const char* key, Vec6& out) {
    if (!j.contains(key)) return;
    auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != 6) throw IoError("scene script: 6 values expected");
    for (int i = 0; i < 6; ++i) out(i) = v[i];
  };
  read_vec6("velocity", p.velocity);
  read_vec6("acceleration", p.acceleration);
  auto read_vec3 = [&](const char* key, Vec3& out) {
    if (!j.contains(key)) return;
    auto v = j.at(key).get<std::vector<double>>();
    if (v.size() != 3) throw IoError("scene script: 3 values expected");
    out = Vec3(v[0], v[1], v[2]);
  };
  read_vec3("axis", p.axis);
  read_vec3("hinge", p.hinge);
  p.amplitude = j.value("amplitude", p.amplitude);
  p.period = j.value("period", p.period);
  p.phase = j.value("phase", p.phase);
  return p;
}

}  // namespace

SceneScript load_scene_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_scene_script: cannot open " + path);
  nlohmann::json j;
  in >> j;

  SceneScript script;
  script.frame_count = j.at("frame_count").get<int>();
  script.dt = j.value("dt", script.dt);
  script.noise_sigma = j.value("noise_sigma", script.noise_sigma);
  script.seed = j.value("seed", script.seed);
  script.camera = program_from_json(j.at("camera"));

  const auto& cj = j.at("calib");
  script.calib.f_u = cj.at("f_u").get<double>();
  script.calib.f_v = cj.at("f_v").get<double>();
  script.calib.u0 = cj.at("u0").get<double>();
  script.calib.v0 = cj.at("v0").get<double>();
  script.calib.b = cj.at("b").get<double>();
  script.calib.principal_point_sign =
      cj.value("principal_point_sign", script.calib.principal_point_sign);
  script.calib.z_min = cj.value("z_min", script.calib.z_min);

  if (j.contains("frustum")) {
    auto v = j.at("frustum").get<std::vector<double>>();
    if (v.size() != 4) throw IoError("scene script: frustum needs 4 values");
    script.frustum = std::array<double, 4>{v[0], v[1], v[2], v[3]};
  }

  for (const auto& bj : j.at("bodies")) {
    SceneBody body;
    body.program = program_from_json(bj.at("program"));
    if (bj.contains("points")) {
      for (const auto& pj : bj.at("points")) {
        auto v = pj.get<std::vector<double>>();
        if (v.size() != 3) throw IoError("scene script: point needs 3 values");
        body.points.emplace_back(v[0], v[1], v[2]);
      }
    }
    body.point_count = bj.value("point_count", 0);
    auto read_vec3 = [&](const char* key, Vec3& out) {
      if (!bj.contains(key)) return;
      auto v = bj.at(key).get<std::vector<double>>();
      out = Vec3(v.at(0), v.at(1), v.at(2));
    };
    read_vec3("box_center", body.box_center);
    read_vec3("box_half_extent", body.box_half_extent);
    if (bj.contains("occlusions")) {
      for (const auto& oj : bj.at("occlusions")) {
        auto v = oj.get<std::vector<int>>();
        if (v.size() != 2) throw IoError("scene script: occlusion is [a, b]");
        body.occlusions.emplace_back(v[0], v[1]);
      }
    }
    script.bodies.push_back(std::move(body));
  }
  script.validate();
  return script;
}

void save_scene_script(const SceneScript& script, const std::string& path) {
  nlohmann::ordered_json j;
  j["frame_count"] = script.frame_count;
  j["dt"] = script.dt;
  j["noise_sigma"] = script.noise_sigma;
  j["seed"] = script.seed;
  j["camera"] = program_to_json(script.camera);
  nlohmann::ordered_json cj;
  cj["f_u"] = script.calib.f_u;
  cj["f_v"] = script.calib.f_v;
  cj["u0"] = script.calib.u0;
  cj["v0"] = script.calib.v0;
  cj["b"] = script.calib.b;
  cj["principal_point_sign"] = script.calib.principal_point_sign;
  cj["z_min"] = script.calib.z_min;
  j["calib"] = cj;
  if (script.frustum) {
    j["frustum"] = std::vector<double>(script.frustum->begin(),
                                       script.frustum->end());
  }
  j["bodies"] = nlohmann::ordered_json::array();
  for (const auto& body : script.bodies) {
    nlohmann::ordered_json bj;
    bj["program"] = program_to_json(body.program);
    if (!body.points.empty()) {
      auto pts = nlohmann::ordered_json::array();
      for (const auto& p : body.points) {
        pts.push_back({p.x(), p.y(), p.z()});
      }
      bj["points"] = pts;
    } else {
      bj["point_count"] = body.point_count;
      bj["box_center"] = {body.box_center.x(), body.box_center.y(),
                          body.box_center.z()};
      bj["box_half_extent"] = {body.box_half_extent.x(),
                               body.box_half_extent.y(),
                               body.box_half_extent.z()};
    }
    if (!body.occlusions.empty()) {
      auto oc = nlohmann::ordered_json::array();
      for (const auto& [a, b] : body.occlusions) oc.push_back({a, b});
      bj["occlusions"] = oc;
    }
    j["bodies"].push_back(bj);
  }
  std::ofstream out(path);
  if (!out) throw IoError("save_scene_script: cannot open " + path);
  out << j.dump(2) << "\n";
}

namespace {
void write_pose_row(std::ofstream& out, int id, int frame, const Pose& pose) {
  char buf[512];
  const Mat4& m = pose.matrix();
  std::snprintf(buf, sizeof(buf),
                "%d,%d,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,"
                "%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g\n",
                id, frame, m(0, 0), m(0, 1), m(0, 2), m(0, 3), m(1, 0),
                m(1, 1), m(1, 2), m(1, 3), m(2, 0), m(2, 1), m(2, 2), m(2, 3),
                m(3, 0), m(3, 1), m(3, 2), m(3, 3));
  out << buf;
}
}  // namespace

void write_truth_bodies_csv(const SceneTruth& truth, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_truth_bodies_csv: cannot open " + path);
  out << "body_id,frame,T00,T01,T02,T03,T10,T11,T12,T13,T20,T21,T22,T23,T30,"
         "T31,T32,T33\n";
  for (std::size_t f = 0; f < truth.camera_poses.size(); ++f) {
    write_pose_row(out, -1, static_cast<int>(f), truth.camera_poses[f]);
  }
  for (std::size_t b = 0; b < truth.body_poses.size(); ++b) {
    for (std::size_t f = 0; f < truth.body_poses[b].size(); ++f) {
      write_pose_row(out, static_cast<int>(b), static_cast<int>(f),
                     truth.body_poses[b][f]);
    }
  }
}

void write_truth_tracks_csv(const SceneTruth& truth, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_truth_tracks_csv: cannot open " + path);
  out << "track_id,body_id\n";
  for (const auto& [track, body] : truth.track_to_body) {
    out << track << "," << body << "\n";
  }
}

TruthFile read_truth_csv(const std::string& bodies_path,
                         const std::string& tracks_path) {
  TruthFile truth;
  {
    std::ifstream in(bodies_path);
    if (!in) throw IoError("read_truth_csv: cannot open " + bodies_path);
    std::string line;
    std::getline(in, line);
    std::map<int, std::map<int, Pose>> staged;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string field;
      std::vector<double> values;
      while (std::getline(ss, field, ',')) values.push_back(std::stod(field));
      if (values.size() != 18) {
        throw IoError("read_truth_csv: malformed row in " + bodies_path);
      }
      Mat4 m;
      for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) m(r, c) = values[2 + 4 * r + c];
      }
      staged[static_cast<int>(values[0])][static_cast<int>(values[1])] =
          Pose(m);
    }
    int first = std::numeric_limits<int>::max();
    for (const auto& [body, frames] : staged) {
      if (!frames.empty()) first = std::min(first, frames.begin()->first);
    }
    truth.first_frame = first;
    for (auto& [body, frames] : staged) {
      auto& poses = truth.world_poses[body];
      for (auto& [frame, pose] : frames) poses.push_back(pose);
    }
  }
  {
    std::ifstream in(tracks_path);
    if (!in) throw IoError("read_truth_csv: cannot open " + tracks_path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream ss(line);
      std::string a, b;
      std::getline(ss, a, ',');
      std::getline(ss, b, ',');
      truth.track_to_body[std::stoi(a)] = std::stoi(b);
    }
  }
  return truth;
}

}  // namespace mvo
