#include "polyode/ode.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace polyode {

void Trajectory::push_back(double t, std::span<const double> y) {
  if (y.size() != dim) throw ShapeError("Trajectory: row of " + std::to_string(y.size()) + " values, expected " +
                                        std::to_string(dim));
  times.push_back(t);
  states.insert(states.end(), y.begin(), y.end());
}

void Trajectory::validate() const {
  if (states.size() != times.size() * dim) throw ShapeError("Trajectory: state matrix does not match time grid");
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw std::invalid_argument("Trajectory: times not strictly increasing at row " + std::to_string(i));
    }
  }
  for (double v : states)
    if (!std::isfinite(v)) throw std::invalid_argument("Trajectory: non-finite state value");
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::vector<double> linspace(double a, double b, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {a};
  std::vector<double> out(n);
  const double step = (b - a) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = a + static_cast<double>(i) * step;
  out.back() = b;
  return out;
}

std::string trajectory_to_csv(const Trajectory& traj) {
  std::string s = traj.time_name;
  for (std::size_t j = 0; j < traj.dim; ++j) {
    s += ',';
    s += j < traj.names.size() ? traj.names[j] : "y" + std::to_string(j + 1);
  }
  s += '\n';
  for (std::size_t i = 0; i < traj.size(); ++i) {
    s += format_double(traj.times[i]);
    for (std::size_t j = 0; j < traj.dim; ++j) {
      s += ',';
      s += format_double(traj.at(i, j));
    }
    s += '\n';
  }
  return s;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("CSV line " + std::to_string(line) + ": cannot parse number '" + s + "'");
  }
  return v;
}

}  // namespace

Trajectory trajectory_from_csv(const std::string& text) {
  std::stringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("CSV: empty input");
  const auto header = split(line);
  if (header.size() < 2) throw std::runtime_error("CSV: header needs a time column and at least one state column");
  Trajectory traj;
  traj.time_name = header[0];
  traj.names.assign(header.begin() + 1, header.end());
  traj.dim = traj.names.size();
  std::vector<double> row(traj.dim);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("CSV line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                               " columns, found " + std::to_string(cells.size()));
    }
    for (std::size_t j = 0; j < traj.dim; ++j) row[j] = parse_double(cells[j + 1], lineno);
    traj.push_back(parse_double(cells[0], lineno), row);
  }
  traj.validate();
  return traj;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
  if (!f) throw std::runtime_error("failed writing " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_trajectory_csv(const Trajectory& traj, const std::string& path) { write_text_file(path, trajectory_to_csv(traj)); }

Trajectory read_trajectory_csv(const std::string& path) { return trajectory_from_csv(read_text_file(path)); }

}  // namespace polyode
