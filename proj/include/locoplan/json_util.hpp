#pragma once

#include <Eigen/Core>

#include <string>

#include <json.hpp>

#include "locoplan/errors.hpp"

// Small checked accessors for the file loaders. Every failure is reported as
// a FormatError carrying the field path, e.g. "/task/q_init/3".
namespace locoplan::json_util {

using nlohmann::json;

inline std::string join(const std::string& path, const std::string& key) { return path + "/" + key; }
inline std::string join(const std::string& path, std::size_t idx) { return path + "/" + std::to_string(idx); }

inline const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw FormatError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(join(path, key), "missing required field");
  return *it;
}

inline double number(const json& j, const std::string& path) {
  if (!j.is_number()) throw FormatError(path, "expected a number");
  return j.get<double>();
}

inline double number(const json& j, const std::string& key, const std::string& path) {
  return number(require(j, key, path), join(path, key));
}

inline double number_or(const json& j, const std::string& key, double fallback, const std::string& path) {
  if (!j.contains(key)) return fallback;
  return number(j.at(key), join(path, key));
}

inline std::string string(const json& j, const std::string& path) {
  if (!j.is_string()) throw FormatError(path, "expected a string");
  return j.get<std::string>();
}

inline std::string string(const json& j, const std::string& key, const std::string& path) {
  return string(require(j, key, path), join(path, key));
}

inline const json& array(const json& j, const std::string& path) {
  if (!j.is_array()) throw FormatError(path, "expected an array");
  return j;
}

inline Eigen::VectorXd vector(const json& j, const std::string& path) {
  array(j, path);
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j[i], join(path, i));
  return v;
}

inline Eigen::Vector2d vec2(const json& j, const std::string& path) {
  Eigen::VectorXd v = vector(j, path);
  if (v.size() != 2) throw FormatError(path, "expected a 2-element array");
  return {v[0], v[1]};
}

inline Eigen::Vector2d vec2(const json& j, const std::string& key, const std::string& path) {
  return vec2(require(j, key, path), join(path, key));
}

inline void expect_format(const json& j, const std::string& expected, const std::string& path = "") {
  if (!j.contains("format")) return;
  std::string got = string(j.at("format"), join(path, "format"));
  if (got != expected) throw FormatError(join(path, "format"), "expected \"" + expected + "\", got \"" + got + "\"");
}

inline json to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline json to_json(const Eigen::Vector2d& v) { return json::array({v.x(), v.y()}); }

}  // namespace locoplan::json_util
