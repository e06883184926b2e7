#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eit/cli.hpp"
#include "json.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Static impedance imaging toolkit: phantom simulation, layered "
                 "reconstruction, diagnostics, and model-agreement studies"};
    app.require_subcommand(1);

    std::string config_path;
    std::string centers;
    std::string out_dir;
    std::string system_path;
    std::vector<std::string> frame_paths;
    double snr_db = 0.0;
    std::uint64_t seed = 0;
    double alpha = 0.0;
    bool raster = false;

    CLI::App* sim = app.add_subcommand("simulate", "Simulate measurement frames");
    sim->add_option("--config", config_path, "Run-config JSON path")->required();
    sim->add_option("--centers", centers, "\"all\" or comma-separated electrode indices");
    CLI::Option* snr_opt = sim->add_option("--snr-db", snr_db, "Gaussian noise level (dB)");
    CLI::Option* sim_seed_opt = sim->add_option("--seed", seed, "Noise seed");
    sim->add_option("--out", out_dir, "Output directory");
    sim->add_flag("--raster", raster, "Also write graymap rasters");

    CLI::App* rec = app.add_subcommand("reconstruct", "Reconstruct images from frames");
    rec->add_option("--config", config_path, "Run-config JSON path")->required();
    rec->add_option("frames", frame_paths, "Frame CSV paths")->required()->expected(-1);
    CLI::Option* alpha_opt =
        rec->add_option("--alpha", alpha, "Regularization weight (dimensionless)");
    rec->add_option("--out", out_dir, "Output directory");
    rec->add_flag("--raster", raster, "Also write graymap rasters");

    CLI::App* conv = app.add_subcommand("convergence", "Run the model-agreement study");
    conv->add_option("--config", config_path, "Run-config JSON path")->required();
    conv->add_option("--out", out_dir, "Output directory");

    CLI::App* diag = app.add_subcommand("diagnostics",
                                        "Correlation and decay maps for a saved system");
    diag->add_option("--config", config_path, "Run-config JSON path")->required();
    diag->add_option("system", system_path, "Assembled system artifact path")->required();
    diag->add_option("--out", out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        nlohmann::json err;
        err["error"]["kind"] = "config";
        err["error"]["message"] = std::string("command line: ") + e.what();
        std::cerr << err.dump() << "\n";
        return 2;
    }

    eit::CliOverrides overrides;
    overrides.centers = centers;
    if (snr_opt->count() > 0) overrides.snr_db = snr_db;
    if (sim_seed_opt->count() > 0) overrides.seed = seed;
    if (alpha_opt->count() > 0) overrides.alpha = alpha;
    overrides.out_dir = out_dir;
    overrides.raster = raster;

    return eit::run_guarded([&] {
        eit::RunConfig config = eit::load_run_config(config_path, overrides);
        if (sim->parsed()) {
            eit::cmd_simulate(config);
        } else if (rec->parsed()) {
            eit::cmd_reconstruct(config, frame_paths);
        } else if (conv->parsed()) {
            eit::cmd_convergence(config);
        } else {
            eit::cmd_diagnostics(config, system_path);
        }
    });
}
