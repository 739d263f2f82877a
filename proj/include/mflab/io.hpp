#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mflab/meanfield.hpp"
#include "mflab/measure.hpp"
#include "mflab/model.hpp"
#include "mflab/sampler.hpp"

namespace mflab {

using json = nlohmann::ordered_json;

// Round-trip representation of a double ("%.17g"); non-finite values print as
// inf, -inf and nan.
std::string format_double(double v);

// Minimal CSV table; values are formatted with format_double.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  CsvTable& row(const std::vector<double>& values);
  // Mixed row: preformatted cells.
  CsvTable& row_cells(const std::vector<std::string>& cells);
  std::string str() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::string> rows_;
};

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

// Columns x1[,x2],density,log_density.
std::string grid_density_csv(const GridDensity& p);
json grid_density_header(const GridDensity& p);
// Writes <stem>.csv and <stem>.json.
void write_grid_density(const std::filesystem::path& dir, const std::string& stem, const GridDensity& p);

// Columns chain,step,particle,x1..xd. `per_chain` samples per chain block.
std::string samples_csv(const std::vector<ParticleState>& samples, std::size_t per_chain);
json mala_diagnostics_json(const MalaDiagnostics& d);

// Columns time,particle,x1..xd.
std::string trajectory_csv(const MfldTrajectory& traj);

// Directory with particle_<i>.csv, mean_measure.csv and manifest.json.
void write_system(const std::filesystem::path& dir, const ProximalGibbsSystem& system,
                  const std::optional<TiltSpec>& tilts);

// Dataset with header x_1..x_d,y and optional weight column; missing weights
// are uniform.
std::vector<Datum> load_dataset_csv(const std::filesystem::path& path);

}  // namespace mflab
