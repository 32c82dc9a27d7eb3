#include "coverage_inekf/csv.hpp"

#include <spdlog/fmt/fmt.h>

#include <Eigen/Geometry>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "coverage_inekf/errors.hpp"

namespace coverage_inekf {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    out.push_back(trim(cell));
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

double parse_cell(const std::string& cell, const std::string& origin, std::size_t line) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') {
    ++first;
  }
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw InputError(origin + ":" + std::to_string(line) + ": not a number: '" + cell + "'");
  }
  return v;
}

void check_increasing(const std::vector<double>& t, const std::string& origin) {
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (!(t[i] > t[i - 1])) {
      throw InputError(origin + ": timestamps not strictly increasing at data row " +
                       std::to_string(i + 1));
    }
  }
}

}  // namespace

std::string format_double(double v) {
  return fmt::format("{}", v);
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) {
      return i;
    }
  }
  throw InputError("CSV column '" + name + "' not found");
}

CsvTable parse_csv(std::istream& in, const std::string& origin,
                   const std::vector<std::string>& required) {
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) {
      continue;
    }
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
      line.erase(0, 3);
    }
    std::vector<std::string> cells = split(line);
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size()) {
      throw InputError(origin + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(table.header.size()) + " fields, got " +
                       std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const std::string& c : cells) {
      row.push_back(parse_cell(c, origin, lineno));
    }
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) {
    throw InputError(origin + ": missing CSV header");
  }
  for (const std::string& r : required) {
    try {
      table.column(r);
    } catch (const InputError&) {
      throw InputError(origin + ": missing column '" + r + "'");
    }
  }
  return table;
}

CsvTable read_csv(const std::string& path, const std::vector<std::string>& required) {
  std::ifstream in(path);
  if (!in) {
    throw InputError("cannot open '" + path + "'");
  }
  return parse_csv(in, path, required);
}

ErrorSeries read_error_series(const std::string& path) {
  const CsvTable t = read_csv(path, {"t", "ex", "ey", "ez"});
  const std::size_t ct = t.column("t");
  const std::size_t cx = t.column("ex");
  const std::size_t cy = t.column("ey");
  const std::size_t cz = t.column("ez");
  ErrorSeries s;
  for (const auto& row : t.rows) {
    s.timestamps.push_back(row[ct]);
    s.errors.emplace_back(row[cx], row[cy], row[cz]);
  }
  try {
    s.validate();
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
  return s;
}

void write_error_series(std::ostream& out, const ErrorSeries& series) {
  out << "t,ex,ey,ez\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const Vec3& e = series.errors[i];
    out << fmt::format("{},{},{},{}\n", series.timestamps[i], e.x(), e.y(), e.z());
  }
}

void write_results_csv(std::ostream& out, const std::vector<MethodSummary>& rows) {
  out << "method,gamma,rmse_mean,rmse_std,nees_mean,nees_std,frac_active\n";
  for (const MethodSummary& r : rows) {
    out << fmt::format("{},{:.4f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", r.method.name(),
                       r.method.gamma, r.rmse_mean, r.rmse_std, r.nees_mean, r.nees_std,
                       r.frac_active);
  }
}

void write_trajectory_csv(std::ostream& out, const std::vector<PoseSample>& poses) {
  out << "t,px,py,pz,qw,qx,qy,qz,vx,vy,vz\n";
  for (const PoseSample& p : poses) {
    const Eigen::Quaterniond q(p.nav.rot);
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", p.t, p.nav.pos.x(), p.nav.pos.y(),
                       p.nav.pos.z(), q.w(), q.x(), q.y(), q.z(), p.nav.vel.x(), p.nav.vel.y(),
                       p.nav.vel.z());
  }
}

std::vector<PoseSample> read_trajectory_csv(const std::string& path) {
  const std::vector<std::string> cols{"t", "px", "py", "pz", "qw", "qx",
                                      "qy", "qz", "vx", "vy", "vz"};
  const CsvTable t = read_csv(path, cols);
  std::vector<std::size_t> idx;
  for (const std::string& c : cols) {
    idx.push_back(t.column(c));
  }
  std::vector<PoseSample> out;
  for (const auto& row : t.rows) {
    PoseSample p;
    p.t = row[idx[0]];
    p.nav.pos = Vec3(row[idx[1]], row[idx[2]], row[idx[3]]);
    p.nav.rot = Eigen::Quaterniond(row[idx[4]], row[idx[5]], row[idx[6]], row[idx[7]])
                    .normalized()
                    .toRotationMatrix();
    p.nav.vel = Vec3(row[idx[8]], row[idx[9]], row[idx[10]]);
    out.push_back(p);
  }
  return out;
}

void write_imu_csv(std::ostream& out, const std::vector<TimedImu>& samples) {
  out << "t,ax,ay,az,gx,gy,gz\n";
  for (const TimedImu& s : samples) {
    out << fmt::format("{},{},{},{},{},{},{}\n", s.t, s.accel.x(), s.accel.y(), s.accel.z(),
                       s.gyro.x(), s.gyro.y(), s.gyro.z());
  }
}

std::vector<TimedImu> read_imu_csv(const std::string& path) {
  const CsvTable t = read_csv(path, {"t", "ax", "ay", "az", "gx", "gy", "gz"});
  const std::size_t c[7] = {t.column("t"),  t.column("ax"), t.column("ay"), t.column("az"),
                            t.column("gx"), t.column("gy"), t.column("gz")};
  std::vector<TimedImu> out;
  std::vector<double> times;
  for (const auto& row : t.rows) {
    TimedImu s;
    s.t = row[c[0]];
    s.accel = Vec3(row[c[1]], row[c[2]], row[c[3]]);
    s.gyro = Vec3(row[c[4]], row[c[5]], row[c[6]]);
    out.push_back(s);
    times.push_back(s.t);
  }
  check_increasing(times, path);
  return out;
}

void write_measurement_csv(std::ostream& out, const std::vector<TimedMeasurement>& meas) {
  out << "t,vx,vy,vz\n";
  for (const TimedMeasurement& m : meas) {
    out << fmt::format("{},{},{},{}\n", m.t, m.value.x(), m.value.y(), m.value.z());
  }
}

std::vector<TimedMeasurement> read_measurement_csv(const std::string& path) {
  const CsvTable t = read_csv(path, {"t", "vx", "vy", "vz"});
  const std::size_t c[4] = {t.column("t"), t.column("vx"), t.column("vy"), t.column("vz")};
  std::vector<TimedMeasurement> out;
  std::vector<double> times;
  for (const auto& row : t.rows) {
    out.push_back({row[c[0]], Vec3(row[c[1]], row[c[2]], row[c[3]])});
    times.push_back(row[c[0]]);
  }
  check_increasing(times, path);
  return out;
}

void write_bounds_document(std::ostream& out, const CoverageBounds& b) {
  out << "gamma = " << format_double(b.gamma) << "\n"
      << "per_axis_gamma = " << format_double(b.per_axis_gamma) << "\n"
      << "K = " << b.subsample_k << "\n"
      << "n_effective = " << b.n_effective << "\n"
      << "rank = " << b.k << "\n"
      << "eps_x = " << format_double(b.epsilon.x()) << "\n"
      << "eps_y = " << format_double(b.epsilon.y()) << "\n"
      << "eps_z = " << format_double(b.epsilon.z()) << "\n";
}

CoverageBounds read_bounds_document(const std::string& path) {
  namespace pt = boost::property_tree;
  pt::ptree doc;
  try {
    pt::read_ini(path, doc);
  } catch (const pt::ini_parser_error& e) {
    throw InputError(std::string("bounds document: ") + e.what());
  }
  auto number = [&](const std::string& key) {
    const auto v = doc.get_optional<std::string>(key);
    if (!v) {
      throw InputError(path + ": missing '" + key + "'");
    }
    return parse_cell(trim(*v), path, 0);
  };
  CoverageBounds b;
  b.gamma = number("gamma");
  b.per_axis_gamma = number("per_axis_gamma");
  b.subsample_k = static_cast<std::size_t>(number("K"));
  b.n_effective = static_cast<std::size_t>(number("n_effective"));
  b.k = doc.get_optional<std::string>("rank") ? static_cast<std::size_t>(number("rank")) : 0;
  b.epsilon = Vec3(number("eps_x"), number("eps_y"), number("eps_z"));
  return b;
}

}  // namespace coverage_inekf
