#include "mflab/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mflab/error.hpp"

namespace mflab {

namespace fs = std::filesystem;

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_double(v));
  return row_cells(cells);
}

CsvTable& CsvTable::row_cells(const std::vector<std::string>& cells) {
  if (cells.size() != header_.size()) throw InvalidInput("CSV row width does not match the header");
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) line += ',';
    line += cells[i];
  }
  rows_.push_back(std::move(line));
  return *this;
}

std::string CsvTable::str() const {
  std::string out;
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (i) out += ',';
    out += header_[i];
  }
  out += '\n';
  for (const auto& r : rows_) {
    out += r;
    out += '\n';
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw Error("failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string grid_density_csv(const GridDensity& p) {
  std::vector<std::string> header;
  for (std::size_t k = 0; k < p.dim(); ++k) header.push_back("x" + std::to_string(k + 1));
  header.push_back("density");
  header.push_back("log_density");
  CsvTable t(header);
  std::vector<double> row(header.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    const auto x = p.grid().node(k);
    for (std::size_t j = 0; j < p.dim(); ++j) row[j] = x[static_cast<Eigen::Index>(j)];
    row[p.dim()] = p.density()[static_cast<Eigen::Index>(k)];
    row[p.dim() + 1] = p.log_density()[static_cast<Eigen::Index>(k)];
    t.row(row);
  }
  return t.str();
}

json grid_density_header(const GridDensity& p) {
  json axes = json::array();
  for (const auto& a : p.grid().axes()) axes.push_back({{"lo", a.lo}, {"hi", a.hi}, {"n", a.n}});
  return {{"dim", p.dim()}, {"axes", axes}, {"mass", p.mass()}, {"node_order", "row-major, last axis fastest"}};
}

void write_grid_density(const fs::path& dir, const std::string& stem, const GridDensity& p) {
  write_text(dir / (stem + ".csv"), grid_density_csv(p));
  write_text(dir / (stem + ".json"), grid_density_header(p).dump(2) + "\n");
}

std::string samples_csv(const std::vector<ParticleState>& samples, std::size_t per_chain) {
  if (samples.empty()) return "chain,step,particle\n";
  const auto d = static_cast<std::size_t>(samples.front().x.cols());
  std::vector<std::string> header{"chain", "step", "particle"};
  for (std::size_t k = 0; k < d; ++k) header.push_back("x" + std::to_string(k + 1));
  CsvTable t(header);
  std::vector<double> row(header.size());
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto& st = samples[s];
    for (Eigen::Index i = 0; i < st.x.rows(); ++i) {
      row[0] = static_cast<double>(per_chain ? s / per_chain : 0);
      row[1] = static_cast<double>(st.step_count);
      row[2] = static_cast<double>(i);
      for (std::size_t k = 0; k < d; ++k) row[3 + k] = st.x(i, static_cast<Eigen::Index>(k));
      t.row(row);
    }
  }
  return t.str();
}

json mala_diagnostics_json(const MalaDiagnostics& d) {
  json chains = json::array();
  for (const auto& c : d.chains)
    chains.push_back({{"acceptance_rate", c.acceptance_rate},
                      {"step_size", c.step_size},
                      {"ess_mean", c.ess_mean},
                      {"ess_log_density", c.ess_log_density}});
  return {{"acceptance_rate", d.acceptance_rate},
          {"ess_mean", d.ess_mean},
          {"ess_log_density", d.ess_log_density},
          {"acceptance_warning", d.acceptance_warning},
          {"chains", chains}};
}

std::string trajectory_csv(const MfldTrajectory& traj) {
  if (traj.states.empty()) return "time,particle\n";
  const auto d = static_cast<std::size_t>(traj.states.front().x.cols());
  std::vector<std::string> header{"time", "particle"};
  for (std::size_t k = 0; k < d; ++k) header.push_back("x" + std::to_string(k + 1));
  CsvTable t(header);
  std::vector<double> row(header.size());
  for (std::size_t s = 0; s < traj.states.size(); ++s)
    for (Eigen::Index i = 0; i < traj.states[s].x.rows(); ++i) {
      row[0] = traj.times[s];
      row[1] = static_cast<double>(i);
      for (std::size_t k = 0; k < d; ++k) row[2 + k] = traj.states[s].x(i, static_cast<Eigen::Index>(k));
      t.row(row);
    }
  return t.str();
}

void write_system(const fs::path& dir, const ProximalGibbsSystem& system, const std::optional<TiltSpec>& tilts) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < system.per_particle.size(); ++i)
    write_text(dir / ("particle_" + std::to_string(i) + ".csv"), grid_density_csv(system.per_particle[i]));
  write_text(dir / "mean_measure.csv", grid_density_csv(system.mean_measure));
  json manifest = {{"particles", system.per_particle.size()},
                   {"residual", system.residual},
                   {"iterations", system.iterations},
                   {"residual_trace", system.residual_trace},
                   {"grid", grid_density_header(system.mean_measure)}};
  if (tilts) {
    json ys = json::array();
    for (Eigen::Index i = 0; i < tilts->y.rows(); ++i) {
      std::vector<double> row(tilts->y.row(i).data(), tilts->y.row(i).data() + tilts->y.cols());
      ys.push_back(row);
    }
    manifest["tilt"] = {{"t", tilts->t}, {"y", ys}};
  } else {
    manifest["tilt"] = nullptr;
  }
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return out;
}

double parse_number(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidInput("not a number '" + s + "' at " + where);
  }
}

}  // namespace

std::vector<Datum> load_dataset_csv(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw InvalidInput(path.string() + ": empty dataset");
  const auto header = split_csv_line(line);
  std::size_t d = 0;
  while (d < header.size() && header[d] == "x_" + std::to_string(d + 1)) ++d;
  if (d == 0 || d >= header.size() || header[d] != "y")
    throw InvalidInput(path.string() + ": header must be x_1,...,x_d,y[,weight]");
  const bool weighted = header.size() == d + 2 && header[d + 1] == "weight";
  if (header.size() != d + 1 + (weighted ? 1 : 0)) throw InvalidInput(path.string() + ": unexpected columns");

  std::vector<Datum> data;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (cells.size() != header.size()) throw InvalidInput(where + ": wrong number of columns");
    Datum z;
    z.x.resize(static_cast<Eigen::Index>(d));
    for (std::size_t k = 0; k < d; ++k) z.x[static_cast<Eigen::Index>(k)] = parse_number(cells[k], where);
    z.y = parse_number(cells[d], where);
    z.weight = weighted ? parse_number(cells[d + 1], where) : 0.0;
    data.push_back(std::move(z));
  }
  if (data.empty()) throw InvalidInput(path.string() + ": no data rows");
  if (!weighted)
    for (auto& z : data) z.weight = 1.0 / static_cast<double>(data.size());
  return data;
}

}  // namespace mflab
