#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "eit/analytic.hpp"
#include "eit/geometry.hpp"

namespace eit {

inline constexpr const char* kRunSchema = "eit-run/1";
inline constexpr const char* kPhantomSchema = "eit-phantom/1";
inline constexpr const char* kSummarySchema = "eit-reconstruct/1";

/// Command-line overrides applied on top of the run-config file.
struct CliOverrides {
    std::string centers;  ///< "all" or comma-separated list; empty keeps the config value
    std::optional<double> snr_db;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha;  ///< dimensionless regularization weight
    std::string out_dir;
    bool raster = false;
};

/// Fully resolved run configuration: phantom, electrodes, meshes, noise,
/// reconstruction, and study settings.
struct RunConfig {
    BoundaryShape boundary = BoundaryShape::circle(1.0);
    double fat_depth = 0.0;
    std::map<RegionTag, double> conductivities = default_conductivities();
    std::vector<Inclusion> inclusions;

    ElectrodeConfig electrodes;

    std::vector<int> centers;  ///< resolved 1-based electrode indices
    bool has_noise = false;
    double snr_db = 0.0;
    std::uint64_t seed = 0;

    double alpha_weight = 1e-2;  ///< lambda in alpha = lambda * tr(S^T S) / N_T
    MeshOptions mesh_u;
    MeshOptions mesh_v;
    bool v_by_cem = false;
    double recon_depth = 0.0;  ///< <= 0 selects the default of 2x electrode pitch

    std::string out_dir = ".";
    bool raster = false;

    ConvergenceStudySpec convergence = default_convergence_spec();
};

/// Reads the run-config JSON (and the phantom JSON it references; relative
/// paths resolve against the config file's directory), validates it, and
/// applies command-line overrides. A missing or invalid file is a config
/// error.
RunConfig load_run_config(const std::string& path, const CliOverrides& overrides);

/// Simulates one measurement frame per configured center and writes frame
/// CSVs with provenance sidecars, plus both mesh artifacts.
void cmd_simulate(const RunConfig& config);

/// Reconstructs per-center images from frame CSVs (sidecars found by
/// replacing .csv with .json), writes per-center image and system artifacts,
/// the merged image, and a summary JSON.
void cmd_reconstruct(const RunConfig& config, const std::vector<std::string>& frame_csvs);

/// Runs the model-agreement convergence study and writes its CSV + JSON.
void cmd_convergence(const RunConfig& config);

/// Reads an assembled sensitivity system and writes correlation maps for
/// three reference elements (near-boundary, mid-layer, deep) plus the
/// sensitivity decay profile of the system's first row.
void cmd_diagnostics(const RunConfig& config, const std::string& system_path);

/// Runs `body`, mapping domain errors to the exit-code taxonomy and printing
/// a machine-readable error JSON on standard error.
int run_guarded(const std::function<void()>& body);

}  // namespace eit
