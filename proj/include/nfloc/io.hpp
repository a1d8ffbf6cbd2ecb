// JSON configuration loading (scenario, vehicle body, mounting grid) and the
// CSV/JSON file formats produced by the tools.
#pragma once

#include <json.hpp>

#include <string>
#include <utility>
#include <vector>

#include "nfloc/geometry.hpp"
#include "nfloc/likelihood.hpp"
#include "nfloc/metric.hpp"
#include "nfloc/optimizer.hpp"
#include "nfloc/scenario.hpp"

namespace nfloc::io {

using json = nlohmann::json;

/// Shortest-exact decimal rendering used by every CSV writer, so identical
/// runs produce byte-identical files.
std::string format_double(double value);

json load_json_file(const std::string& path);
void write_json_file(const std::string& path, const json& j);

/// Scenario from JSON. Gains accept linear keys or the matching *_db key;
/// unknown keys are rejected to catch typos.
ScenarioConfig scenario_from_json(const json& j);
json scenario_to_json(const ScenarioConfig& scenario);

geometry::VehicleBody body_from_json(const json& j);
json body_to_json(const geometry::VehicleBody& body);

/// Grid from JSON: a list of points with `placement`, `rotation` (nine row-major
/// floats or {"axis_angle": [x,y,z]}) and `mirrored`. Mirror twins are derived.
optimizer::Grid grid_from_json(const json& j);
json grid_to_json(const optimizer::Grid& grid);
json grid_selection_to_json(const optimizer::Grid& grid, optimizer::Selection mask);

metric::PoseSamplingSpec sampling_from_json(const json& j, const ScenarioConfig& scenario);
json sampling_to_json(const metric::PoseSamplingSpec& spec);

void write_peb_map_csv(const std::string& path, const metric::PebMap& map);
/// Reads values and identifiability flags back (deployment is not restored).
metric::PebMap read_peb_map_csv(const std::string& path);

void write_eccdf_csv(const std::string& path,
                     const std::vector<std::pair<double, double>>& curve);

void write_ranking_csv(const std::string& path,
                       const std::vector<std::pair<optimizer::Selection, double>>& ranking);

void write_surface_csv(const std::string& path, const likelihood::SurfaceScan& scan);
json surface_sidecar(const likelihood::SurfaceScan& scan, double wavelength);

void write_cut_csv(const std::string& path,
                   const std::vector<std::pair<double, double>>& cut);

}  // namespace nfloc::io
