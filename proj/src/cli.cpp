#include "eit/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <set>
#include <sstream>

#include "eit/data.hpp"
#include "eit/forward.hpp"
#include "eit/io.hpp"
#include "eit/parallel.hpp"
#include "eit/reconstruct.hpp"
#include "json.hpp"

namespace eit {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json parse_config_json(const std::string& path) {
    require(fs::exists(path), ErrorKind::Config, "config file not found: " + path);
    json j = json::parse(read_text_file(path), nullptr, false);
    require(!j.is_discarded(), ErrorKind::Config, path + " is not valid JSON");
    require(j.is_object(), ErrorKind::Config, path + " must hold a JSON object");
    return j;
}

void check_config_schema(const json& j, const char* want, const std::string& path) {
    require(j.contains("schema") && j["schema"].is_string() &&
                j["schema"].get<std::string>() == want,
            ErrorKind::Config,
            path + " is missing schema '" + want + "'");
}

BoundaryShape parse_boundary(const json& b, const std::string& path) {
    require(b.is_object() && b.contains("kind") && b["kind"].is_string(),
            ErrorKind::Config, path + ": boundary needs a 'kind'");
    const std::string kind = b["kind"].get<std::string>();
    try {
        if (kind == "circle") return BoundaryShape::circle(b.at("radius").get<double>());
        if (kind == "ellipse")
            return BoundaryShape::ellipse(b.at("a").get<double>(), b.at("b").get<double>());
        if (kind == "smooth")
            return BoundaryShape::smooth(b.at("radii").get<std::vector<double>>());
        if (kind == "polygon") {
            std::vector<Vec2> verts;
            for (const auto& v : b.at("vertices"))
                verts.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
            return BoundaryShape::polygon(std::move(verts));
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, path + ": boundary: " + e.what());
    }
    fail(ErrorKind::Config, path + ": unknown boundary kind '" + kind + "'");
}

MeshOptions parse_mesh_options(const json& m, const std::string& path) {
    MeshOptions opt;
    try {
        opt.edge_len = m.at("edge_len").get<double>();
        opt.band_len = m.value("band_len", 0.0);
        opt.grade = m.value("grade", 0.4);
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, path + ": mesh options: " + e.what());
    }
    require(opt.edge_len > 0 && opt.band_len >= 0 && opt.grade >= 0, ErrorKind::Config,
            path + ": mesh resolutions must be positive");
    return opt;
}

std::vector<int> parse_centers(const json& c, int electrode_count, const std::string& where) {
    std::vector<int> centers;
    if (c.is_string() && c.get<std::string>() == "all") {
        for (int n = 1; n <= electrode_count; ++n) centers.push_back(n);
    } else if (c.is_array()) {
        for (const auto& v : c) {
            require(v.is_number_integer(), ErrorKind::Config,
                    where + ": centers must be integers");
            centers.push_back(v.get<int>());
        }
    } else {
        fail(ErrorKind::Config, where + ": centers must be \"all\" or a list");
    }
    require(!centers.empty(), ErrorKind::Config, where + ": empty center list");
    for (int n : centers)
        require(n >= 1 && n <= electrode_count, ErrorKind::Config,
                where + ": center " + std::to_string(n) + " out of 1.." +
                    std::to_string(electrode_count));
    return centers;
}

std::vector<int> parse_centers_string(const std::string& s, int electrode_count) {
    if (s == "all") return parse_centers(json("all"), electrode_count, "--centers");
    json arr = json::array();
    std::istringstream in(s);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        require(!tok.empty(), ErrorKind::Config, "--centers: empty entry");
        char* end = nullptr;
        long v = std::strtol(tok.c_str(), &end, 10);
        require(end == tok.c_str() + tok.size(), ErrorKind::Config,
                "--centers: malformed entry '" + tok + "'");
        arr.push_back(static_cast<int>(v));
    }
    return parse_centers(arr, electrode_count, "--centers");
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec, ErrorKind::Config, "cannot create output directory " + dir);
}

std::string out_path(const RunConfig& config, const std::string& name) {
    return (fs::path(config.out_dir) / name).string();
}

/// Unit-admittivity fields for a batch of drive pairs, solved in parallel.
std::vector<PotentialField> solve_reference_fields(const Mesh& mesh_v,
                                                   const ElectrodeConfig& electrodes,
                                                   bool v_by_cem,
                                                   const std::vector<DrivePair>& pairs) {
    std::vector<double> unit_sigma(mesh_v.tri_count(), 1.0);
    std::vector<PotentialField> fields(pairs.size());
    if (v_by_cem) {
        CemSolver solver(mesh_v, unit_sigma, electrodes);
        const std::int64_t n = static_cast<std::int64_t>(pairs.size());
#pragma omp parallel for schedule(dynamic) num_threads(thread_count())
        for (std::int64_t i = 0; i < n; ++i) fields[i] = solver.solve(pairs[i]);
    } else {
        PemSolver solver(mesh_v, unit_sigma, electrodes);
        const std::int64_t n = static_cast<std::int64_t>(pairs.size());
#pragma omp parallel for schedule(dynamic) num_threads(thread_count())
        for (std::int64_t i = 0; i < n; ++i) fields[i] = solver.solve(pairs[i]);
    }
    return fields;
}

}  // namespace

RunConfig load_run_config(const std::string& path, const CliOverrides& overrides) {
    json j = parse_config_json(path);
    check_config_schema(j, kRunSchema, path);
    RunConfig config;
    const fs::path base = fs::path(path).parent_path();

    // phantom file
    require(j.contains("phantom") && j["phantom"].is_string(), ErrorKind::Config,
            path + ": missing phantom path");
    fs::path phantom_path = fs::path(j["phantom"].get<std::string>());
    if (phantom_path.is_relative()) phantom_path = base / phantom_path;
    json pj = parse_config_json(phantom_path.string());
    check_config_schema(pj, kPhantomSchema, phantom_path.string());
    require(pj.contains("boundary"), ErrorKind::Config,
            phantom_path.string() + ": missing boundary");
    config.boundary = parse_boundary(pj["boundary"], phantom_path.string());
    config.fat_depth = pj.value("fat_depth", 0.0);
    require(config.fat_depth >= 0, ErrorKind::Config, "fat_depth must be nonnegative");
    if (pj.contains("conductivities")) {
        require(pj["conductivities"].is_object(), ErrorKind::Config,
                "conductivities must map region name to S/m");
        for (const auto& [name, value] : pj["conductivities"].items()) {
            require(value.is_number(), ErrorKind::Config,
                    "conductivity for '" + name + "' must be a number");
            config.conductivities[region_tag_from_name(name)] = value.get<double>();
        }
    }
    if (pj.contains("inclusions")) {
        for (const auto& inc : pj["inclusions"]) {
            Inclusion one;
            one.tag = region_tag_from_name(inc.at("tag").get<std::string>());
            for (const auto& v : inc.at("polygon"))
                one.polygon.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
            config.inclusions.push_back(std::move(one));
        }
    }

    // electrode spec: run config wins over the phantom file
    json ej;
    if (pj.contains("electrodes")) ej = pj["electrodes"];
    if (j.contains("electrodes")) {
        require(j["electrodes"].is_object(), ErrorKind::Config,
                path + ": electrodes must be an object");
        for (const auto& [k, v] : j["electrodes"].items()) ej[k] = v;
    }
    require(ej.is_object() && ej.contains("count") && ej.contains("half_width"),
            ErrorKind::Config, path + ": electrode spec needs count and half_width");
    int electrode_count = 0;
    double half_width = 0, contact_impedance = 0.01, current = 1.0, start_arc = 0.0;
    try {
        electrode_count = ej.at("count").get<int>();
        half_width = ej.at("half_width").get<double>();
        contact_impedance = ej.value("contact_impedance", 0.01);
        current = ej.value("current", 1.0);
        start_arc = ej.value("start_arc", 0.0);
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, path + ": electrodes: " + e.what());
    }
    config.electrodes = equispaced_electrodes(config.boundary, electrode_count, half_width,
                                              contact_impedance, current, start_arc);

    // centers
    if (!overrides.centers.empty()) {
        config.centers = parse_centers_string(overrides.centers, electrode_count);
    } else if (j.contains("centers")) {
        config.centers = parse_centers(j["centers"], electrode_count, path);
    } else {
        config.centers = parse_centers(json("all"), electrode_count, path);
    }

    // noise: seed required whenever noise is set
    if (j.contains("noise") && !j["noise"].is_null()) {
        const json& nj = j["noise"];
        require(nj.is_object() && nj.contains("snr_db"), ErrorKind::Config,
                path + ": noise needs snr_db");
        config.has_noise = true;
        config.snr_db = nj["snr_db"].get<double>();
        if (nj.contains("seed")) config.seed = nj["seed"].get<std::uint64_t>();
        else
            require(overrides.seed.has_value(), ErrorKind::Config,
                    path + ": noise requires a seed (config or --seed)");
    }
    if (overrides.snr_db) {
        config.has_noise = true;
        config.snr_db = *overrides.snr_db;
        require(overrides.seed.has_value() ||
                    (j.contains("noise") && j["noise"].is_object() &&
                     j["noise"].contains("seed")),
                ErrorKind::Config, "--snr-db requires a seed (config or --seed)");
    }
    if (overrides.seed) config.seed = *overrides.seed;
    require(!config.has_noise || std::isfinite(config.snr_db), ErrorKind::Config,
            "snr_db must be finite");

    // regularization weight
    config.alpha_weight = j.value("alpha", 1e-2);
    if (overrides.alpha) config.alpha_weight = *overrides.alpha;
    require(config.alpha_weight > 0 && std::isfinite(config.alpha_weight),
            ErrorKind::Config, "alpha must be positive and finite");

    // meshes
    require(j.contains("mesh_u") && j.contains("mesh_v"), ErrorKind::Config,
            path + ": mesh_u and mesh_v resolutions are required");
    config.mesh_u = parse_mesh_options(j["mesh_u"], path);
    config.mesh_v = parse_mesh_options(j["mesh_v"], path);
    config.v_by_cem = j.value("v_by_cem", false);
    config.recon_depth = j.value("depth", 0.0);

    config.out_dir = j.value("out", std::string("."));
    if (!overrides.out_dir.empty()) config.out_dir = overrides.out_dir;
    config.raster = overrides.raster || j.value("raster", false);

    // optional convergence-study settings
    if (j.contains("convergence")) {
        const json& cj = j["convergence"];
        ConvergenceStudySpec spec;
        spec.radius = cj.value("radius", 1.0);
        spec.electrode_count = cj.value("electrode_count", 8);
        spec.contact_impedance = cj.value("contact_impedance", 0.01);
        spec.current = cj.value("current", 1.0);
        spec.exclusion_radius = cj.value("exclusion_radius", 0.35);
        if (cj.contains("drive")) {
            spec.drive.plus = cj["drive"].at(0).get<int>();
            spec.drive.minus = cj["drive"].at(1).get<int>();
        }
        if (cj.contains("h")) {
            for (const auto& h : cj["h"]) {
                require(h.is_number() && h.get<double>() > 0, ErrorKind::Config,
                        path + ": study h values must be positive");
                spec.levels.push_back(make_convergence_level(h.get<double>()));
            }
        } else {
            spec.levels = default_convergence_spec().levels;
        }
        // Optional mesh-budget override: boundary band = h / scale. Scales
        // below 2 make the study unresolvable (caught by its precondition).
        if (cj.contains("pem_band_scale")) {
            double scale = cj["pem_band_scale"].get<double>();
            require(scale > 0 && std::isfinite(scale), ErrorKind::Config,
                    path + ": pem_band_scale must be positive");
            for (ConvergenceLevel& lvl : spec.levels) lvl.pem_mesh.band_len = lvl.h / scale;
        }
        config.convergence = spec;
    }
    return config;
}

void cmd_simulate(const RunConfig& config) {
    ensure_out_dir(config.out_dir);
    LayeredPhantom phantom =
        build_layered_phantom(config.boundary, config.electrodes, config.mesh_u,
                              config.fat_depth, config.conductivities, config.inclusions);
    Mesh mesh_v = generate_boundary_mesh(config.boundary, config.electrodes, config.mesh_v);
    FrameSimulator sim(phantom.mesh, phantom.sigma, mesh_v, config.electrodes,
                       config.v_by_cem);

    write_mesh_json(out_path(config, "mesh_u.json"), phantom.mesh, config.electrodes,
                    phantom.sigma);
    write_mesh_json(out_path(config, "mesh_v.json"), mesh_v, config.electrodes);

    const int electrode_count = config.electrodes.count();
    for (int n : config.centers) {
        PatternSet patterns = enumerate_patterns(n, electrode_count);
        MeasurementFrame frame = sim.simulate(patterns);
        if (config.has_noise)
            frame = add_noise(frame, config.snr_db, mix_seed(config.seed, n));
        const std::string stem = "frame_n" + std::to_string(n);
        write_frame_csv(out_path(config, stem + ".csv"), frame);
        write_frame_sidecar(out_path(config, stem + ".json"), frame);
    }

    if (config.raster) {
        double hi = 0.0;
        for (double s : phantom.sigma) hi = std::max(hi, s);
        write_raster_pgm(out_path(config, "sigma.pgm"), phantom.mesh, phantom.sigma, 0.0,
                         hi > 0 ? hi : 1.0);
    }
}

void cmd_reconstruct(const RunConfig& config, const std::vector<std::string>& frame_csvs) {
    require(!frame_csvs.empty(), ErrorKind::Config, "no frame files given");
    ensure_out_dir(config.out_dir);
    Mesh mesh_v = generate_boundary_mesh(config.boundary, config.electrodes, config.mesh_v);
    const std::string mesh_id = mesh_content_id(mesh_v);
    const int electrode_count = config.electrodes.count();

    // load frames and check they belong to this config
    std::vector<MeasurementFrame> frames;
    for (const std::string& csv : frame_csvs) {
        require(csv.size() > 4 && csv.substr(csv.size() - 4) == ".csv", ErrorKind::Config,
                "frame path must end in .csv: " + csv);
        std::string sidecar = csv.substr(0, csv.size() - 4) + ".json";
        MeasurementFrame frame = read_frame(csv, sidecar);
        require(frame.provenance.electrode_count == electrode_count,
                ErrorKind::DataMismatch,
                csv + ": frame electrode count " +
                    std::to_string(frame.provenance.electrode_count) +
                    " does not match the config");
        require(frame.provenance.mesh_v_id == mesh_id, ErrorKind::DataMismatch,
                csv + ": frame reference mesh does not match the config");
        require(frame.provenance.v_by_cem == config.v_by_cem, ErrorKind::DataMismatch,
                csv + ": frame reference-model flag does not match the config");
        frames.push_back(std::move(frame));
    }

    // one parallel batch of unit-admittivity solves covering every frame
    std::vector<DrivePair> all_pairs;
    {
        std::set<std::pair<int, int>> seen;
        for (const MeasurementFrame& frame : frames) {
            PatternSet patterns = enumerate_patterns(frame.n, electrode_count);
            for (const DrivePair& d : required_field_pairs(patterns)) {
                auto key = d.plus < d.minus ? std::make_pair(d.plus, d.minus)
                                            : std::make_pair(d.minus, d.plus);
                if (seen.insert(key).second) all_pairs.push_back(d);
            }
        }
    }
    std::vector<PotentialField> fields =
        solve_reference_fields(mesh_v, config.electrodes, config.v_by_cem, all_pairs);

    json summary;
    summary["schema"] = kSummarySchema;
    summary["alpha_weight"] = config.alpha_weight;
    summary["mesh_v_id"] = mesh_id;
    json per_frame = json::array();

    std::vector<ReconImage> images;
    double gamma0_sum = 0.0;
    for (const MeasurementFrame& frame : frames) {
        ReconDomain domain = extract_recon_domain(mesh_v, frame.n, config.recon_depth);
        SensitivitySystem system = assemble_sensitivity(domain, mesh_v, fields, frame);
        const double nt = static_cast<double>(domain.elements.size());
        const double alpha = config.alpha_weight * system.S.squaredNorm() / nt;
        ReconImage image = solve_tikhonov(system, alpha);

        const Eigen::VectorXd stb = system.S.transpose() * system.b;
        Eigen::VectorXd kappa =
            Eigen::Map<const Eigen::VectorXd>(image.kappa.data(), image.kappa.size());
        const double residual =
            (stb - system.S.transpose() * (system.S * kappa) - alpha * kappa).norm();

        const std::string stem = "n" + std::to_string(frame.n);
        write_image_csv(out_path(config, "image_" + stem + ".csv"), image);
        write_system(out_path(config, "system_" + stem + ".dat"), system);

        json rec;
        rec["n"] = frame.n;
        rec["alpha"] = alpha;
        rec["gamma0"] = system.gamma0;
        rec["rows"] = system.S.rows();
        rec["elements"] = domain.elements.size();
        rec["dropped_degenerate"] = system.dropped_degenerate;
        rec["residual"] = residual;
        rec["residual_rel"] = stb.norm() > 0 ? residual / stb.norm() : 0.0;
        per_frame.push_back(std::move(rec));

        gamma0_sum += system.gamma0;
        images.push_back(std::move(image));
    }
    summary["frames"] = std::move(per_frame);

    MergedImage merged = merge_images(images, mesh_v.tri_count());
    write_merged_csv(out_path(config, "merged.csv"), merged);
    write_text_file(out_path(config, "summary.json"), summary.dump(1) + "\n");

    if (config.raster) {
        const double gamma0 = gamma0_sum / static_cast<double>(images.size());
        write_raster_pgm(out_path(config, "merged.pgm"), mesh_v, merged.gamma, 0.0,
                         2.0 * gamma0);
    }
}

void cmd_convergence(const RunConfig& config) {
    ensure_out_dir(config.out_dir);
    ConvergenceReport report = run_convergence_study(config.convergence);
    write_convergence_csv(out_path(config, "convergence.csv"), report);
    write_convergence_json(out_path(config, "convergence.json"), report);
}

void cmd_diagnostics(const RunConfig& config, const std::string& system_path) {
    ensure_out_dir(config.out_dir);
    SensitivitySystem system = read_system(system_path);
    Mesh mesh_v = generate_boundary_mesh(config.boundary, config.electrodes, config.mesh_v);
    require(system.domain.mesh_id == mesh_content_id(mesh_v), ErrorKind::DataMismatch,
            system_path + ": system was assembled on a different mesh");
    require(system.S.rows() >= 1 && !system.domain.elements.empty(), ErrorKind::Degenerate,
            system_path + ": empty system");

    // three reference elements by depth: shallowest, mid-layer, deepest
    std::vector<Vec2> cent = triangle_centroids(mesh_v);
    std::vector<Vec2> domain_cent;
    for (int t : system.domain.elements) domain_cent.push_back(cent[t]);
    std::vector<double> dist = distance_to_boundary(mesh_v, domain_cent);
    const std::size_t nt = system.domain.elements.size();
    std::size_t i_near = 0, i_deep = 0;
    for (std::size_t m = 1; m < nt; ++m) {
        if (dist[m] < dist[i_near]) i_near = m;
        if (dist[m] > dist[i_deep]) i_deep = m;
    }
    const double mid_target =
        config.fat_depth > 0 ? 0.5 * config.fat_depth : 0.5 * dist[i_deep];
    std::size_t i_mid = 0;
    for (std::size_t m = 1; m < nt; ++m)
        if (std::abs(dist[m] - mid_target) < std::abs(dist[i_mid] - mid_target)) i_mid = m;

    std::vector<CorrelationEntry> entries;
    for (std::size_t ref : {i_near, i_mid, i_deep}) {
        std::vector<double> c = column_correlation(system, static_cast<int>(ref));
        for (std::size_t m = 0; m < nt; ++m) {
            if (!std::isfinite(c[m]) || std::abs(c[m]) <= 0.5) continue;
            entries.push_back({system.domain.elements[ref], system.domain.elements[m],
                               c[m]});
        }
    }
    write_correlation_csv(out_path(config, "correlation.csv"), entries);

    const Pattern& p = system.row_patterns.front();
    std::vector<PotentialField> fields = solve_reference_fields(
        mesh_v, config.electrodes, config.v_by_cem,
        {{p.k_plus, p.k_minus}, {p.l_plus, p.l_minus}});
    DecayDiagnostic diag = decay_diagnostic(fields[0], fields[1], mesh_v, config.electrodes);
    write_decay_csv(out_path(config, "decay.csv"), diag);
}

int run_guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const Error& e) {
        json err;
        err["error"]["kind"] = e.kind_name();
        err["error"]["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        json err;
        err["error"]["kind"] = "internal";
        err["error"]["message"] = e.what();
        std::cerr << err.dump() << "\n";
        return 1;
    }
}

}  // namespace eit
