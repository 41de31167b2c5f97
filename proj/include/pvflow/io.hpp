#pragma once

#include "pvflow/path.hpp"
#include "pvflow/solver.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pvflow {

/// Fixed 17-significant-digit formatting: enough digits to round-trip any
/// double, so read-then-write is byte-stable.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline double parse_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("bad number: '" + s + "'");
  return v;
}

// ---------------------------------------------------------------------------
// Path CSV: header t,x1,...,xn; cadlag jumps encoded as two consecutive rows
// with equal t (first row = left limit).

inline void write_path_csv(std::ostream& os, const SampledPath& path) {
  const int n = dim(path);
  os << 't';
  for (int j = 0; j < n; ++j) os << ",x" << (j + 1);
  os << '\n';
  auto row = [&os, n](double t, const Vector& v) {
    os << format_double(t);
    for (int j = 0; j < n; ++j) os << ',' << format_double(v[j]);
    os << '\n';
  };
  for (std::size_t i = 0; i < path.size(); ++i) {
    if (path.has_jump(i)) row(path.times[i], path.left_limit(i));
    row(path.times[i], path.values[i]);
  }
}

inline SampledPath read_path_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("empty path file");
  SampledPath path;
  std::vector<double> pending;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  const std::size_t cols = split(line).size();
  if (cols < 2) throw std::invalid_argument("path csv needs t plus >= 1 coordinate");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != cols) throw std::invalid_argument("ragged path csv row");
    const double t = parse_double(cells[0]);
    Vector v(static_cast<int>(cols) - 1);
    for (std::size_t j = 1; j < cols; ++j) v[static_cast<int>(j) - 1] = parse_double(cells[j]);
    if (!path.times.empty() && t == path.times.back()) {
      // duplicate time: previous row was the left limit of a jump here
      path.jumps.emplace(path.times.size() - 1, path.values.back());
      path.values.back() = v;
      path.kind = PathKind::Cadlag;
    } else {
      path.times.push_back(t);
      path.values.push_back(v);
    }
  }
  path.validate();
  return path;
}

// ---------------------------------------------------------------------------
// Path JSON: explicit kind and jumps array.

inline nlohmann::json path_to_json(const SampledPath& path) {
  nlohmann::json j;
  j["kind"] = path.kind == PathKind::Cadlag ? "cadlag" : "continuous-linear";
  j["times"] = path.times;
  auto& values = j["values"] = nlohmann::json::array();
  for (const Vector& v : path.values)
    values.push_back(std::vector<double>(v.data(), v.data() + v.size()));
  auto& jumps = j["jumps"] = nlohmann::json::array();
  for (const auto& [i, left] : path.jumps)
    jumps.push_back({{"index", i},
                     {"left", std::vector<double>(left.data(), left.data() + left.size())}});
  if (path.variation_exponent) j["variation_exponent"] = *path.variation_exponent;
  return j;
}

inline SampledPath path_from_json(const nlohmann::json& j) {
  SampledPath path;
  path.kind = j.value("kind", std::string("continuous-linear")) == "cadlag"
                  ? PathKind::Cadlag
                  : PathKind::ContinuousLinear;
  path.times = j.at("times").get<std::vector<double>>();
  for (const auto& row : j.at("values")) {
    const auto vals = row.get<std::vector<double>>();
    path.values.push_back(Eigen::Map<const Vector>(vals.data(), vals.size()));
  }
  for (const auto& jump : j.value("jumps", nlohmann::json::array())) {
    const auto vals = jump.at("left").get<std::vector<double>>();
    path.jumps.emplace(jump.at("index").get<std::size_t>(),
                       Eigen::Map<const Vector>(vals.data(), vals.size()));
  }
  if (j.contains("variation_exponent"))
    path.variation_exponent = j["variation_exponent"].get<double>();
  path.validate();
  return path;
}

// ---------------------------------------------------------------------------
// Trajectory CSV: t,y1,...,yd[,k11,...,kdd] (Jacobian flattened column-major).

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const int d = dim(traj.path);
  os << 't';
  for (int j = 0; j < d; ++j) os << ",y" << (j + 1);
  if (traj.jacobian)
    for (int c = 0; c < d; ++c)
      for (int r = 0; r < d; ++r) os << ",k" << (r + 1) << (c + 1);
  os << '\n';
  auto row = [&](std::size_t i, const Vector& y, const Matrix* k) {
    os << format_double(traj.path.times[i]);
    for (int j = 0; j < d; ++j) os << ',' << format_double(y[j]);
    if (k)
      for (int c = 0; c < d; ++c)
        for (int r = 0; r < d; ++r) os << ',' << format_double((*k)(r, c));
    os << '\n';
  };
  for (std::size_t i = 0; i < traj.path.size(); ++i) {
    if (traj.path.has_jump(i)) {
      const Matrix kl = traj.jacobian ? traj.jacobian->left_limit(i) : Matrix();
      row(i, traj.path.left_limit(i), traj.jacobian ? &kl : nullptr);
    }
    const Matrix kv = traj.jacobian ? traj.jacobian->values[i] : Matrix();
    row(i, traj.path.values[i], traj.jacobian ? &kv : nullptr);
  }
}

// ---------------------------------------------------------------------------
// File helpers (atomic writes: write to a temp name, then rename).

inline void write_file_atomic(const std::filesystem::path& file, const std::string& data) {
  const std::filesystem::path tmp = file.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + tmp.string());
    os << data;
  }
  std::filesystem::rename(tmp, file);
}

inline std::string read_file(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + file.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void save_path_csv(const std::filesystem::path& file, const SampledPath& path) {
  std::ostringstream os;
  write_path_csv(os, path);
  write_file_atomic(file, os.str());
}

inline SampledPath load_path_csv(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw std::runtime_error("cannot open " + file.string());
  return read_path_csv(is);
}

inline void save_trajectory_csv(const std::filesystem::path& file, const Trajectory& traj) {
  std::ostringstream os;
  write_trajectory_csv(os, traj);
  write_file_atomic(file, os.str());
}

inline SampledPath load_path(const std::filesystem::path& file) {
  if (file.extension() == ".json")
    return path_from_json(nlohmann::json::parse(read_file(file)));
  return load_path_csv(file);
}

inline void save_path(const std::filesystem::path& file, const SampledPath& path) {
  if (file.extension() == ".json")
    write_file_atomic(file, path_to_json(path).dump(2) + "\n");
  else
    save_path_csv(file, path);
}

}  // namespace pvflow
