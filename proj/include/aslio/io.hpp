// Dataset and trajectory file IO.
//
// Points CSV:      t,x,y,z            (seconds, meters, 9 significant digits)
// IMU CSV:         t,wx,wy,wz,ax,ay,az
// Trajectories:    TUM format, "t x y z qx qy qz qw" per line.
// Config files:    flat "key = value" lines with dotted section prefixes,
//                  '#' comments.

#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aslio/geometry.hpp"
#include "aslio/imu.hpp"
#include "aslio/types.hpp"

namespace aslio {

struct TumPose {
  double t = 0.0;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
};

namespace detail {

inline std::vector<double> parse_numeric_line(const std::string& line, char sep) {
  std::vector<double> values;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t next = line.find(sep, pos);
    if (next == std::string::npos) next = line.size();
    const std::string token = line.substr(pos, next - pos);
    if (!token.empty()) {
      std::size_t consumed = 0;
      values.push_back(std::stod(token, &consumed));
    }
    pos = next + 1;
  }
  return values;
}

inline bool numeric_start(const std::string& line) {
  for (const char c : line) {
    if (c == ' ' || c == '\t') continue;
    return (c >= '0' && c <= '9') || c == '-' || c == '+' || c == '.';
  }
  return false;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  return os;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  return is;
}

}  // namespace detail

inline void write_points_csv(const std::string& path, std::span<const TimedPoint> points) {
  auto os = detail::open_out(path);
  os << "t,x,y,z\n";
  char line[160];
  for (const auto& p : points) {
    std::snprintf(line, sizeof(line), "%.9g,%.9g,%.9g,%.9g\n", p.t, p.p.x(), p.p.y(), p.p.z());
    os << line;
  }
}

inline std::vector<TimedPoint> read_points_csv(const std::string& path) {
  auto is = detail::open_in(path);
  std::vector<TimedPoint> points;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || !detail::numeric_start(line)) continue;
    std::vector<double> v;
    try {
      v = detail::parse_numeric_line(line, ',');
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed point row");
    }
    if (v.size() != 4)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected t,x,y,z");
    points.push_back({v[0], Eigen::Vector3d(v[1], v[2], v[3])});
  }
  return points;
}

inline void write_imu_csv(const std::string& path, std::span<const ImuSample> samples) {
  auto os = detail::open_out(path);
  os << "t,wx,wy,wz,ax,ay,az\n";
  char line[256];
  for (const auto& s : samples) {
    std::snprintf(line, sizeof(line), "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", s.t, s.gyro.x(),
                  s.gyro.y(), s.gyro.z(), s.accel.x(), s.accel.y(), s.accel.z());
    os << line;
  }
}

inline std::vector<ImuSample> read_imu_csv(const std::string& path) {
  auto is = detail::open_in(path);
  std::vector<ImuSample> samples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || !detail::numeric_start(line)) continue;
    std::vector<double> v;
    try {
      v = detail::parse_numeric_line(line, ',');
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed IMU row");
    }
    if (v.size() != 7)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected t,wx,wy,wz,ax,ay,az");
    samples.push_back(
        {v[0], Eigen::Vector3d(v[1], v[2], v[3]), Eigen::Vector3d(v[4], v[5], v[6])});
  }
  return samples;
}

inline void write_tum(const std::string& path, std::span<const TumPose> poses) {
  auto os = detail::open_out(path);
  char line[256];
  for (const auto& p : poses) {
    std::snprintf(line, sizeof(line), "%.9f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", p.t,
                  p.position.x(), p.position.y(), p.position.z(), p.orientation.x(),
                  p.orientation.y(), p.orientation.z(), p.orientation.w());
    os << line;
  }
}

inline std::vector<TumPose> read_tum(const std::string& path) {
  auto is = detail::open_in(path);
  std::vector<TumPose> poses;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || !detail::numeric_start(line)) continue;
    std::vector<double> v;
    try {
      v = detail::parse_numeric_line(line, ' ');
    } catch (const std::exception&) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": malformed TUM row");
    }
    if (v.size() != 8)
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected t x y z qx qy qz qw");
    TumPose p;
    p.t = v[0];
    p.position = Eigen::Vector3d(v[1], v[2], v[3]);
    p.orientation = Eigen::Quaterniond(v[7], v[4], v[5], v[6]).normalized();
    poses.push_back(p);
  }
  return poses;
}

/// Parses a flat key = value config file; '#' starts a comment.
inline std::vector<std::pair<std::string, std::string>> read_key_values(const std::string& path) {
  auto is = detail::open_in(path);
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string trimmed = trim(line);
    if (trimmed.empty()) continue;
    const auto eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key = value");
    entries.emplace_back(trim(trimmed.substr(0, eq)), trim(trimmed.substr(eq + 1)));
  }
  return entries;
}

}  // namespace aslio
