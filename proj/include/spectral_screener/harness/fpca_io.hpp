#pragma once

// FunctionalSample import/export: CSV with header t_1,...,t_m and one row per
// trajectory; grid, mesh constant, noise variance and mean in a JSON sidecar.

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "spectral_screener/error.hpp"
#include "spectral_screener/fpca.hpp"
#include "spectral_screener/harness/report.hpp"

namespace spectral::harness {

inline void write_functional_sample(const FunctionalSample& sample, const std::string& csv_path,
                                    const std::string& sidecar_path) {
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw InvalidArgument("cannot write " + csv_path);
  for (Index j = 0; j < sample.m(); ++j) csv << (j == 0 ? "" : ",") << "t_" << j + 1;
  csv << '\n';
  for (Index i = 0; i < sample.n(); ++i) {
    for (Index j = 0; j < sample.m(); ++j) csv << (j == 0 ? "" : ",") << detail::format_double(sample.observations(i, j));
    csv << '\n';
  }

  nlohmann::json side;
  side["grid"] = std::vector<double>(sample.grid.points().data(), sample.grid.points().data() + sample.m());
  side["mesh_constant"] = sample.grid.mesh_constant();
  side["noise_var"] = sample.noise_var;
  side["mean"] = std::vector<double>(sample.mean.data(), sample.mean.data() + sample.mean.size());
  std::ofstream js(sidecar_path, std::ios::binary);
  if (!js) throw InvalidArgument("cannot write " + sidecar_path);
  js << side.dump(2) << '\n';
}

inline FunctionalSample read_functional_sample(const std::string& csv_path, const std::string& sidecar_path) {
  std::ifstream js(sidecar_path);
  if (!js) throw InvalidArgument("cannot open " + sidecar_path);
  const nlohmann::json side = nlohmann::json::parse(js);
  const auto grid_points = side.at("grid").get<std::vector<double>>();
  const Index m = static_cast<Index>(grid_points.size());

  std::ifstream csv(csv_path);
  if (!csv) throw InvalidArgument("cannot open " + csv_path);
  std::string line;
  if (!std::getline(csv, line)) throw InvalidArgument("functional sample: missing header");
  const auto header = detail::split(line, ',');
  if (static_cast<Index>(header.size()) != m) throw InvalidArgument("functional sample: header does not match grid");
  for (Index j = 0; j < m; ++j) {
    if (header[static_cast<std::size_t>(j)] != "t_" + std::to_string(j + 1)) {
      throw InvalidArgument("functional sample: unexpected column " + header[static_cast<std::size_t>(j)]);
    }
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    const auto cells = detail::split(line, ',');
    if (static_cast<Index>(cells.size()) != m) throw InvalidArgument("functional sample: row width mismatch");
    std::vector<double> row;
    for (const auto& cell : cells) row.push_back(detail::parse_double(cell));
    rows.push_back(std::move(row));
  }

  FunctionalSample out;
  out.grid = DesignGrid(Eigen::Map<const Vector>(grid_points.data(), m), side.at("mesh_constant").get<double>());
  out.noise_var = side.at("noise_var").get<double>();
  const auto mean = side.at("mean").get<std::vector<double>>();
  out.mean = Eigen::Map<const Vector>(mean.data(), static_cast<Index>(mean.size()));
  out.observations.resize(static_cast<Index>(rows.size()), m);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (Index j = 0; j < m; ++j) out.observations(static_cast<Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
  if (!out.observations.allFinite()) throw InvalidArgument("functional sample: non-finite entries");
  return out;
}

}  // namespace spectral::harness
