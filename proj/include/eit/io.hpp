#pragma once

#include <string>
#include <tuple>
#include <vector>

#include "eit/analytic.hpp"
#include "eit/data.hpp"
#include "eit/geometry.hpp"
#include "eit/reconstruct.hpp"

namespace eit {

// Every artifact carries one of these schema tags (JSON "schema" field or a
// leading "# schema:" comment line); readers reject anything else.
inline constexpr const char* kMeshSchema = "eit-mesh/1";
inline constexpr const char* kFrameSchema = "eit-frame/1";
inline constexpr const char* kImageSchema = "eit-image/1";
inline constexpr const char* kMergedSchema = "eit-merged/1";
inline constexpr const char* kCorrelationSchema = "eit-correlation/1";
inline constexpr const char* kDecaySchema = "eit-decay/1";
inline constexpr const char* kConvergenceSchema = "eit-convergence/1";
inline constexpr const char* kSystemSchema = "eit-system/1";
inline constexpr const char* kRasterSchema = "eit-raster/1";

/// Shortest-exact decimal rendering (17 significant digits), '.' decimal.
std::string format_double(double value);

/// Whole-file text helpers. Reading a missing file is a missing-artifact
/// error; callers that need a config error must check existence first.
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// Mesh + electrode layout (+ optional per-element conductivity) as JSON.
struct MeshArtifact {
    Mesh mesh;
    ElectrodeConfig electrodes;
    std::vector<double> sigma;  ///< empty when the file carries none
};
void write_mesh_json(const std::string& path, const Mesh& mesh,
                     const ElectrodeConfig& electrodes,
                     const std::vector<double>& sigma = {});
MeshArtifact read_mesh_json(const std::string& path);

/// Measurement frame: CSV of records plus a JSON sidecar with provenance.
void write_frame_csv(const std::string& path, const MeasurementFrame& frame);
void write_frame_sidecar(const std::string& path, const MeasurementFrame& frame);
MeasurementFrame read_frame(const std::string& csv_path, const std::string& sidecar_path);

/// Per-center reconstruction image and per-mesh merged image.
void write_image_csv(const std::string& path, const ReconImage& image);
void write_merged_csv(const std::string& path, const MergedImage& merged);

/// Sparse correlation map rows (i, j, c); callers pre-threshold the entries.
struct CorrelationEntry {
    int i = 0;
    int j = 0;
    double c = 0.0;
};
void write_correlation_csv(const std::string& path,
                           const std::vector<CorrelationEntry>& entries);

/// Shell-averaged sensitivity decay profile.
void write_decay_csv(const std::string& path, const DecayDiagnostic& diagnostic);

/// Convergence study: CSV of (h, error) and JSON with the fitted rate.
void write_convergence_csv(const std::string& path, const ConvergenceReport& report);
void write_convergence_json(const std::string& path, const ConvergenceReport& report);

/// Assembled sensitivity system as a self-contained text artifact.
void write_system(const std::string& path, const SensitivitySystem& system);
SensitivitySystem read_system(const std::string& path);

/// Per-element values rendered onto a portable graymap (ASCII PGM). The
/// linear value-to-gray scale is written into the header comment; gray 0
/// marks pixels outside the mesh or without a finite value.
void write_raster_pgm(const std::string& path, const Mesh& mesh,
                      const std::vector<double>& element_values, double lo, double hi,
                      int width = 256);

}  // namespace eit
