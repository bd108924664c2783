#include "mvo/camera.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace mvo {

void StereoCalib::validate() const {
  if (f_u <= 0 || f_v <= 0 || b <= 0) {
    throw CameraError("StereoCalib: f_u, f_v and b must be positive");
  }
}

StereoObs project(const Vec3& p, const StereoCalib& calib) {
  if (p.z() <= calib.z_min) {
    throw CameraError("project: point behind the near plane");
  }
  StereoObs obs;
  obs.u = calib.f_u * p.x() / p.z() + calib.principal_point_sign * calib.u0;
  obs.v = calib.f_v * p.y() / p.z() + calib.principal_point_sign * calib.v0;
  obs.d = calib.f_u * calib.b / p.z();
  return obs;
}

std::optional<StereoObs> try_project(const Vec3& p, const StereoCalib& calib) {
  if (!(p.z() > calib.z_min) || !p.allFinite()) {
    return std::nullopt;
  }
  return project(p, calib);
}

Vec3 project_homogeneous(const Vec4& z, const StereoCalib& calib) {
  Vec3 out;
  out(0) = calib.f_u * z(0) / z(2) + calib.principal_point_sign * calib.u0;
  out(1) = calib.f_v * z(1) / z(2) + calib.principal_point_sign * calib.v0;
  out(2) = calib.f_u * calib.b / (z(2) * z(3));
  return out;
}

Vec3 unproject(const StereoObs& obs, const StereoCalib& calib) {
  if (obs.d <= 0.0) {
    throw CameraError("unproject: disparity must be positive");
  }
  double z = calib.f_u * calib.b / obs.d;
  double x = (obs.u - calib.principal_point_sign * calib.u0) * z / calib.f_u;
  double y = (obs.v - calib.principal_point_sign * calib.v0) * z / calib.f_v;
  return Vec3(x, y, z);
}

Mat34 projection_jacobian(const Vec4& z, const StereoCalib& calib) {
  if (z(2) <= calib.z_min) {
    throw CameraError("projection_jacobian: point behind the near plane");
  }
  double z3 = z(2);
  double z4 = z(3);
  Mat34 s = Mat34::Zero();
  s(0, 0) = calib.f_u / z3;
  s(0, 2) = -calib.f_u * z(0) / (z3 * z3);
  s(1, 1) = calib.f_v / z3;
  s(1, 2) = -calib.f_v * z(1) / (z3 * z3);
  s(2, 2) = -calib.f_u * calib.b / (z3 * z3 * z4);
  s(2, 3) = -calib.f_u * calib.b / (z3 * z4 * z4);
  return s;
}

StereoCalib load_calib(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("load_calib: cannot open " + path);
  }
  nlohmann::json j;
  in >> j;
  StereoCalib calib;
  calib.f_u = j.at("f_u").get<double>();
  calib.f_v = j.at("f_v").get<double>();
  calib.u0 = j.at("u0").get<double>();
  calib.v0 = j.at("v0").get<double>();
  calib.b = j.at("b").get<double>();
  calib.principal_point_sign =
      j.value("principal_point_sign", calib.principal_point_sign);
  calib.z_min = j.value("z_min", calib.z_min);
  calib.validate();
  return calib;
}

void save_calib(const StereoCalib& calib, const std::string& path) {
  nlohmann::ordered_json j;
  j["f_u"] = calib.f_u;
  j["f_v"] = calib.f_v;
  j["u0"] = calib.u0;
  j["v0"] = calib.v0;
  j["b"] = calib.b;
  j["principal_point_sign"] = calib.principal_point_sign;
  j["z_min"] = calib.z_min;
  std::ofstream out(path);
  if (!out) {
    throw IoError("save_calib: cannot open " + path);
  }
  out << j.dump(2) << "\n";
}

}  // namespace mvo
