#pragma once

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "neurar/scene.hpp"

namespace neurar {

/// Scene description schema (JSON):
/// {
///   "name": "blobs",
///   "bounds": {"min": [x,y,z], "max": [x,y,z]},
///   "background": [r,g,b],
///   "primitives": [
///     {"shape": "sphere", "position": [..], "radius": 0.5, "albedo": [..]},
///     {"shape": "box", "position": [..], "half_extents": [..],
///      "rotation_axis": [..], "rotation_deg": 30, "albedo": [..]},
///     {"shape": "cylinder", "position": [..], "radius": .., "half_height": .., ...},
///     {"shape": "torus", "position": [..], "major_radius": .., "minor_radius": .., ...}
///   ]
/// }
/// rotation_axis / rotation_deg are optional (identity when absent).

namespace detail {

inline Vec3 vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw Fault("scene file: expected 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline nlohmann::json vec3_to_json(const Vec3& v) {
  return nlohmann::json::array({v.x(), v.y(), v.z()});
}

}  // namespace detail

inline SceneSdf scene_from_json(const nlohmann::json& j) {
  SceneSdf s;
  s.name = j.value("name", std::string("scene"));
  if (j.contains("bounds")) {
    s.bounds.min = detail::vec3_from_json(j.at("bounds").at("min"));
    s.bounds.max = detail::vec3_from_json(j.at("bounds").at("max"));
  }
  if (j.contains("background")) s.background_color = detail::vec3_from_json(j.at("background"));
  for (const auto& pj : j.value("primitives", nlohmann::json::array())) {
    Primitive p;
    const std::string shape = pj.at("shape").get<std::string>();
    if (shape == "sphere") {
      p.kind = ShapeKind::Sphere;
      p.size.x() = pj.at("radius").get<double>();
    } else if (shape == "box") {
      p.kind = ShapeKind::Box;
      p.size = detail::vec3_from_json(pj.at("half_extents"));
    } else if (shape == "cylinder") {
      p.kind = ShapeKind::Cylinder;
      p.size.x() = pj.at("radius").get<double>();
      p.size.y() = pj.at("half_height").get<double>();
    } else if (shape == "torus") {
      p.kind = ShapeKind::Torus;
      p.size.x() = pj.at("major_radius").get<double>();
      p.size.y() = pj.at("minor_radius").get<double>();
    } else {
      throw Fault("scene file: unknown shape '" + shape + "'");
    }
    p.position = detail::vec3_from_json(pj.at("position"));
    if (pj.contains("rotation_axis"))
      p.rotation = axis_angle_rotation(detail::vec3_from_json(pj.at("rotation_axis")),
                                       pj.value("rotation_deg", 0.0) * kPi / 180.0);
    if (pj.contains("albedo")) p.albedo = detail::vec3_from_json(pj.at("albedo"));
    s.primitives.push_back(p);
  }
  s.validate();
  return s;
}

inline nlohmann::json scene_to_json(const SceneSdf& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["bounds"] = {{"min", detail::vec3_to_json(s.bounds.min)},
                 {"max", detail::vec3_to_json(s.bounds.max)}};
  j["background"] = detail::vec3_to_json(s.background_color);
  auto prims = nlohmann::json::array();
  for (const auto& p : s.primitives) {
    nlohmann::json pj;
    pj["shape"] = shape_name(p.kind);
    pj["position"] = detail::vec3_to_json(p.position);
    pj["albedo"] = detail::vec3_to_json(p.albedo);
    switch (p.kind) {
      case ShapeKind::Sphere: pj["radius"] = p.size.x(); break;
      case ShapeKind::Box: pj["half_extents"] = detail::vec3_to_json(p.size); break;
      case ShapeKind::Cylinder:
        pj["radius"] = p.size.x();
        pj["half_height"] = p.size.y();
        break;
      case ShapeKind::Torus:
        pj["major_radius"] = p.size.x();
        pj["minor_radius"] = p.size.y();
        break;
    }
    if (!p.rotation.isApprox(Mat3::Identity(), 1e-12)) {
      Eigen::AngleAxisd aa(p.rotation);
      pj["rotation_axis"] = detail::vec3_to_json(aa.axis());
      pj["rotation_deg"] = aa.angle() * 180.0 / kPi;
    }
    prims.push_back(pj);
  }
  j["primitives"] = prims;
  return j;
}

/// Loads a scene from a builtin name ("blobs", "arch") or a JSON file path.
inline SceneSdf load_scene(const std::string& name_or_path) {
  if (name_or_path == "blobs") return make_blobs_scene();
  if (name_or_path == "arch") return make_arch_scene();
  std::ifstream in(name_or_path);
  if (!in) throw Fault("scene file not found: " + name_or_path);
  nlohmann::json j;
  in >> j;
  return scene_from_json(j);
}

inline void save_scene(const SceneSdf& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Fault("cannot write scene file: " + path);
  out << scene_to_json(s).dump(2) << "\n";
}

}  // namespace neurar
