#include "nfloc/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace nfloc::io {

namespace {

[[noreturn]] void fail(const std::string& message) { throw std::invalid_argument(message); }

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    for (const auto& item : j.items())
        if (!allowed.contains(item.key()))
            fail(where + ": unknown key '" + item.key() + "'");
}

double get_number(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    if (!j.at(key).is_number()) fail("'" + key + "' must be a number");
    return j.at(key).get<double>();
}

/// Linear value from either `key` or `key_db`.
double get_gain(const json& j, const std::string& key, double fallback) {
    const std::string db_key = key + "_db";
    if (j.contains(key) && j.contains(db_key)) fail("give '" + key + "' or '" + db_key + "', not both");
    if (j.contains(db_key)) return db_to_linear(j.at(db_key).get<double>());
    return get_number(j, key, fallback);
}

Eigen::Vector3d vector3_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) fail(where + ": expected a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vector3_to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Matrix3d rotation_from_json(const json& j, const std::string& where) {
    Eigen::Matrix3d r;
    if (j.is_object() && j.contains("axis_angle")) {
        r = geometry::axis_angle_rotation(vector3_from_json(j.at("axis_angle"), where));
    } else if (j.is_array() && j.size() == 9) {
        for (int i = 0; i < 3; ++i)
            for (int c = 0; c < 3; ++c) r(i, c) = j[static_cast<std::size_t>(3 * i + c)].get<double>();
    } else {
        fail(where + ": rotation must be 9 row-major floats or {\"axis_angle\": [x,y,z]}");
    }
    if (!geometry::is_rotation(r)) fail(where + ": rotation is not orthonormal with det +1");
    return r;
}

json rotation_to_json(const Eigen::Matrix3d& r) {
    json out = json::array();
    for (int i = 0; i < 3; ++i)
        for (int c = 0; c < 3; ++c) out.push_back(r(i, c));
    return out;
}

}  // namespace

std::string format_double(double value) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buffer[40];
    std::snprintf(buffer, sizeof(buffer), "%.17g", value);
    return buffer;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open file: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail(path + ": " + e.what());
    }
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) fail("cannot write file: " + path);
    out << j.dump(2) << "\n";
}

ScenarioConfig scenario_from_json(const json& j) {
    if (!j.is_object()) fail("scenario: expected an object");
    check_keys(j, "scenario",
               {"bs_height_m", "vehicle_ref_height_m", "tx_power_w", "tx_gain", "tx_gain_db",
                "element_gain_max", "element_gain_max_db", "element_gain_min",
                "element_gain_min_db", "element_hpbw_deg", "gain_beta", "carrier_hz",
                "subcarrier_spacing_hz", "n_subcarriers", "noise_variance_w",
                "peb_percentile_epsilon", "ground_permittivity", "ground_polarization",
                "ground_reflection", "sync"});
    ScenarioConfig s;
    s.bs_height_m = get_number(j, "bs_height_m", s.bs_height_m);
    s.vehicle_ref_height_m = get_number(j, "vehicle_ref_height_m", s.vehicle_ref_height_m);
    s.waveform.tx_power_w = get_number(j, "tx_power_w", s.waveform.tx_power_w);
    s.waveform.carrier_hz = get_number(j, "carrier_hz", s.waveform.carrier_hz);
    s.waveform.subcarrier_spacing_hz =
        get_number(j, "subcarrier_spacing_hz", s.waveform.subcarrier_spacing_hz);
    s.waveform.n_subcarriers =
        static_cast<int>(get_number(j, "n_subcarriers", s.waveform.n_subcarriers));
    s.waveform.noise_variance_w = get_number(j, "noise_variance_w", s.waveform.noise_variance_w);
    s.gains.tx_gain = get_gain(j, "tx_gain", s.gains.tx_gain);
    s.gains.max_gain = get_gain(j, "element_gain_max", s.gains.max_gain);
    s.gains.min_gain = get_gain(j, "element_gain_min", s.gains.min_gain);
    if (j.contains("element_hpbw_deg") && j.contains("gain_beta"))
        fail("give 'element_hpbw_deg' or 'gain_beta', not both");
    if (j.contains("gain_beta"))
        s.gains.beta = j.at("gain_beta").get<double>();
    else if (j.contains("element_hpbw_deg"))
        s.gains.beta =
            beta_for_half_power_beamwidth(j.at("element_hpbw_deg").get<double>() * M_PI / 180.0);
    s.peb_percentile_epsilon =
        get_number(j, "peb_percentile_epsilon", s.peb_percentile_epsilon);
    if (j.contains("ground_permittivity")) {
        const json& g = j.at("ground_permittivity");
        check_keys(g, "ground_permittivity", {"re", "im"});
        s.ground.permittivity = {get_number(g, "re", 5.0), get_number(g, "im", 0.2)};
    }
    if (j.contains("ground_polarization")) {
        const std::string pol = j.at("ground_polarization").get<std::string>();
        if (pol == "perpendicular")
            s.ground.polarization = Polarization::perpendicular;
        else if (pol == "parallel")
            s.ground.polarization = Polarization::parallel;
        else
            fail("ground_polarization must be 'perpendicular' or 'parallel'");
    }
    if (j.contains("ground_reflection")) s.ground_reflection = j.at("ground_reflection").get<bool>();
    if (j.contains("sync")) {
        const json& sync = j.at("sync");
        check_keys(sync, "sync", {"delta_d_m", "delta_phi_rad"});
        s.sync.delta_d_m = get_number(sync, "delta_d_m", 0.0);
        if (sync.contains("delta_phi_rad")) {
            const json& phi = sync.at("delta_phi_rad");
            if (phi.is_number()) {
                s.sync.delta_phi_rad = {phi.get<double>()};
            } else if (phi.is_array()) {
                s.sync.delta_phi_rad.clear();
                for (const auto& v : phi) s.sync.delta_phi_rad.push_back(v.get<double>());
            } else {
                fail("sync.delta_phi_rad must be a number or an array");
            }
        }
    }
    s.validate();
    return s;
}

json scenario_to_json(const ScenarioConfig& s) {
    json j;
    j["bs_height_m"] = s.bs_height_m;
    j["vehicle_ref_height_m"] = s.vehicle_ref_height_m;
    j["tx_power_w"] = s.waveform.tx_power_w;
    j["carrier_hz"] = s.waveform.carrier_hz;
    j["subcarrier_spacing_hz"] = s.waveform.subcarrier_spacing_hz;
    j["n_subcarriers"] = s.waveform.n_subcarriers;
    j["noise_variance_w"] = s.waveform.noise_variance_w;
    j["tx_gain"] = s.gains.tx_gain;
    j["element_gain_max"] = s.gains.max_gain;
    j["element_gain_min"] = s.gains.min_gain;
    j["gain_beta"] = s.gains.beta;
    j["peb_percentile_epsilon"] = s.peb_percentile_epsilon;
    j["ground_permittivity"] = {{"re", s.ground.permittivity.real()},
                                {"im", s.ground.permittivity.imag()}};
    j["ground_polarization"] =
        s.ground.polarization == Polarization::perpendicular ? "perpendicular" : "parallel";
    j["ground_reflection"] = s.ground_reflection;
    j["sync"] = {{"delta_d_m", s.sync.delta_d_m}, {"delta_phi_rad", s.sync.delta_phi_rad}};
    return j;
}

geometry::VehicleBody body_from_json(const json& j) {
    if (!j.is_object() || !j.contains("triangles")) fail("body: expected {\"triangles\": [...]}");
    check_keys(j, "body", {"triangles", "extents"});
    geometry::VehicleBody body;
    for (const auto& t : j.at("triangles")) {
        if (!t.is_array() || t.size() != 9) fail("body: each triangle needs 9 floats");
        geometry::Triangle tri;
        tri.a = {t[0].get<double>(), t[1].get<double>(), t[2].get<double>()};
        tri.b = {t[3].get<double>(), t[4].get<double>(), t[5].get<double>()};
        tri.c = {t[6].get<double>(), t[7].get<double>(), t[8].get<double>()};
        const double area = 0.5 * (tri.b - tri.a).cross(tri.c - tri.a).norm();
        if (!(area > 1e-12)) fail("body: degenerate triangle (area <= 1e-12 m^2)");
        body.triangles.push_back(tri);
    }
    if (j.contains("extents")) {
        body.extents = vector3_from_json(j.at("extents"), "body.extents");
    } else if (!body.triangles.empty()) {
        Eigen::Vector3d lo = body.triangles.front().a, hi = lo;
        for (const auto& t : body.triangles)
            for (const auto* v : {&t.a, &t.b, &t.c}) {
                lo = lo.cwiseMin(*v);
                hi = hi.cwiseMax(*v);
            }
        body.extents = hi - lo;
    }
    return body;
}

json body_to_json(const geometry::VehicleBody& body) {
    json tris = json::array();
    for (const auto& t : body.triangles) {
        json row = json::array();
        for (const auto* v : {&t.a, &t.b, &t.c})
            for (int i = 0; i < 3; ++i) row.push_back((*v)[i]);
        tris.push_back(row);
    }
    return {{"triangles", tris}, {"extents", vector3_to_json(body.extents)}};
}

optimizer::Grid grid_from_json(const json& j) {
    if (!j.is_object() || !j.contains("points")) fail("grid: expected {\"points\": [...]}");
    check_keys(j, "grid", {"points"});
    optimizer::Grid grid;
    int id = 0;
    for (const auto& p : j.at("points")) {
        check_keys(p, "grid point", {"id", "placement", "rotation", "mirrored"});
        optimizer::GridPoint point;
        point.id = p.contains("id") ? p.at("id").get<int>() : id;
        point.mirrored = p.contains("mirrored") && p.at("mirrored").get<bool>();
        const Eigen::Vector3d placement = vector3_from_json(p.at("placement"), "grid placement");
        const Eigen::Matrix3d rotation = rotation_from_json(p.at("rotation"), "grid rotation");
        point.placements.push_back(placement);
        point.rotations.push_back(rotation);
        if (point.mirrored) {
            point.placements.push_back(geometry::mirror_across_center_plane(placement));
            point.rotations.push_back(geometry::mirror_rotation_across_center_plane(rotation));
        }
        grid.points.push_back(std::move(point));
        ++id;
    }
    grid.validate();
    return grid;
}

json grid_to_json(const optimizer::Grid& grid) {
    json points = json::array();
    for (const auto& p : grid.points) {
        points.push_back({{"id", p.id},
                          {"placement", vector3_to_json(p.placements[0])},
                          {"rotation", rotation_to_json(p.rotations[0])},
                          {"mirrored", p.mirrored}});
    }
    return {{"points", points}};
}

json grid_selection_to_json(const optimizer::Grid& grid, optimizer::Selection mask) {
    optimizer::Grid subset;
    int id = 0;
    for (const auto& p : grid.points) {
        if (!(mask & (optimizer::Selection{1} << p.id))) continue;
        optimizer::GridPoint q = p;
        q.id = id++;
        subset.points.push_back(std::move(q));
    }
    return grid_to_json(subset);
}

metric::PoseSamplingSpec sampling_from_json(const json& j, const ScenarioConfig& scenario) {
    metric::PoseSamplingSpec spec = metric::default_sampling(scenario);
    if (j.is_null()) return spec;
    check_keys(j, "sampling",
               {"r_min_m", "r_step_m", "n_r", "phi_start_deg", "phi_step_deg", "n_phi",
                "vehicle_z_m"});
    spec.r_min_m = get_number(j, "r_min_m", spec.r_min_m);
    spec.r_step_m = get_number(j, "r_step_m", spec.r_step_m);
    spec.n_r = static_cast<int>(get_number(j, "n_r", spec.n_r));
    spec.phi_start_rad =
        get_number(j, "phi_start_deg", spec.phi_start_rad * 180.0 / M_PI) * M_PI / 180.0;
    spec.phi_step_rad =
        get_number(j, "phi_step_deg", spec.phi_step_rad * 180.0 / M_PI) * M_PI / 180.0;
    spec.n_phi = static_cast<int>(get_number(j, "n_phi", spec.n_phi));
    spec.vehicle_z_m = get_number(j, "vehicle_z_m", spec.vehicle_z_m);
    spec.validate();
    return spec;
}

json sampling_to_json(const metric::PoseSamplingSpec& spec) {
    json j;
    j["r_min_m"] = spec.r_min_m;
    j["r_step_m"] = spec.r_step_m;
    j["n_r"] = spec.n_r;
    j["phi_start_deg"] = spec.phi_start_rad * 180.0 / M_PI;
    j["phi_step_deg"] = spec.phi_step_rad * 180.0 / M_PI;
    j["n_phi"] = spec.n_phi;
    j["vehicle_z_m"] = spec.vehicle_z_m;
    return j;
}

void write_peb_map_csv(const std::string& path, const metric::PebMap& map) {
    std::ofstream out(path);
    if (!out) fail("cannot write file: " + path);
    out << "phi_deg";
    for (int j = 0; j < map.sampling.n_r; ++j)
        out << "," << format_double(map.sampling.r_at(j));
    out << "\n";
    for (int i = 0; i < map.sampling.n_phi; ++i) {
        out << format_double(map.sampling.phi_at(i) * 180.0 / M_PI);
        for (int j = 0; j < map.sampling.n_r; ++j)
            out << "," << (map.ok(i, j) ? format_double(map.peb(i, j)) : "inf");
        out << "\n";
    }
}

metric::PebMap read_peb_map_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open file: " + path);
    std::string line;
    if (!std::getline(in, line)) fail(path + ": empty PEB map file");

    const auto split = [](const std::string& text) {
        std::vector<std::string> fields;
        std::stringstream stream(text);
        std::string field;
        while (std::getline(stream, field, ',')) fields.push_back(field);
        return fields;
    };
    const auto header = split(line);
    if (header.size() < 2 || header[0] != "phi_deg") fail(path + ": not a PEB map CSV");
    std::vector<double> r_values;
    for (std::size_t i = 1; i < header.size(); ++i) r_values.push_back(std::stod(header[i]));

    std::vector<double> phis;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split(line);
        if (fields.size() != header.size()) fail(path + ": ragged CSV row");
        phis.push_back(std::stod(fields[0]));
        std::vector<double> row;
        for (std::size_t i = 1; i < fields.size(); ++i)
            row.push_back(fields[i] == "inf" ? std::numeric_limits<double>::infinity()
                                             : std::stod(fields[i]));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) fail(path + ": no data rows");

    metric::PebMap map;
    map.sampling.n_r = static_cast<int>(r_values.size());
    map.sampling.r_min_m = r_values.front();
    map.sampling.r_step_m = r_values.size() > 1 ? r_values[1] - r_values[0] : 1.0;
    map.sampling.n_phi = static_cast<int>(rows.size());
    map.sampling.phi_start_rad = phis.front() * M_PI / 180.0;
    map.sampling.phi_step_rad =
        phis.size() > 1 ? (phis[1] - phis[0]) * M_PI / 180.0 : M_PI / 60.0;
    map.peb.resize(map.sampling.n_phi, map.sampling.n_r);
    map.ok.resize(map.sampling.n_phi, map.sampling.n_r);
    for (int i = 0; i < map.sampling.n_phi; ++i)
        for (int j = 0; j < map.sampling.n_r; ++j) {
            const double v = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            map.peb(i, j) = v;
            map.ok(i, j) = std::isfinite(v) ? 1 : 0;
        }
    return map;
}

void write_eccdf_csv(const std::string& path,
                     const std::vector<std::pair<double, double>>& curve) {
    std::ofstream out(path);
    if (!out) fail("cannot write file: " + path);
    out << "threshold_m,eccdf\n";
    for (const auto& [threshold, fraction] : curve)
        out << format_double(threshold) << "," << format_double(fraction) << "\n";
}

void write_ranking_csv(const std::string& path,
                       const std::vector<std::pair<optimizer::Selection, double>>& ranking) {
    std::ofstream out(path);
    if (!out) fail("cannot write file: " + path);
    out << "selection_bitmask,rho_m\n";
    for (const auto& [mask, rho] : ranking) out << mask << "," << format_double(rho) << "\n";
}

void write_surface_csv(const std::string& path, const likelihood::SurfaceScan& scan) {
    std::ofstream out(path);
    if (!out) fail("cannot write file: " + path);
    out << "y_m\\x_m";
    for (Eigen::Index c = 0; c < scan.x_axis.size(); ++c)
        out << "," << format_double(scan.x_axis[c]);
    out << "\n";
    for (Eigen::Index r = 0; r < scan.y_axis.size(); ++r) {
        out << format_double(scan.y_axis[r]);
        for (Eigen::Index c = 0; c < scan.x_axis.size(); ++c)
            out << "," << format_double(scan.sqrt_values(r, c));
        out << "\n";
    }
}

json surface_sidecar(const likelihood::SurfaceScan& scan, double wavelength) {
    json j;
    j["mode"] = scan.mode == Mode::coherent ? "coherent" : "incoherent";
    j["spacing_m"] = scan.spacing;
    j["true_position_m"] = {scan.true_x, scan.true_y};
    j["wavelength_m"] = wavelength;
    j["values"] = "sqrt(L)";
    j["regularized"] = scan.any_regularized;
    return j;
}

void write_cut_csv(const std::string& path,
                   const std::vector<std::pair<double, double>>& cut) {
    std::ofstream out(path);
    if (!out) fail("cannot write file: " + path);
    out << "coordinate_m,sqrt_objective\n";
    for (const auto& [coord, value] : cut)
        out << format_double(coord) << "," << format_double(value) << "\n";
}

}  // namespace nfloc::io
