#pragma once

// Field-level JSON helpers. Every failure names the offending field so that
// CLI diagnostics point at the broken key.

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace cfpa {

template <class T>
T read_required(const nlohmann::json& j, const char* field) {
  if (!j.is_object() || !j.contains(field)) {
    throw std::invalid_argument(std::string("missing field '") + field + "'");
  }
  try {
    return j.at(field).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed field '") + field + "': " + e.what());
  }
}

template <class T>
void read_optional(const nlohmann::json& j, const char* field, T& target) {
  if (j.is_object() && j.contains(field)) target = read_required<T>(j, field);
}

inline std::vector<double> flatten_row_major(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

inline Eigen::MatrixXd read_row_major(const nlohmann::json& j, const char* field,
                                      Eigen::Index rows, Eigen::Index cols) {
  const auto flat = read_required<std::vector<double>>(j, field);
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols) {
    throw std::invalid_argument(std::string("field '") + field + "' has " +
                                std::to_string(flat.size()) + " entries, expected " +
                                std::to_string(rows * cols));
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

inline void check_format_version(const nlohmann::json& j, int expected, const char* what) {
  const int version = read_required<int>(j, "format_version");
  if (version != expected) {
    throw std::invalid_argument(std::string("field 'format_version': unsupported ") + what +
                                " format " + std::to_string(version));
  }
}

}  // namespace cfpa
