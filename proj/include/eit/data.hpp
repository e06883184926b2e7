#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "eit/forward.hpp"
#include "eit/geometry.hpp"

namespace eit {

/// All four-electrode patterns drawn from the 8-electrode window centered at
/// electrode n, plus the reference pattern (n, n+1, n-1, n+2).
struct PatternSet {
    int n = 0;  ///< center electrode, 1-based
    std::vector<Pattern> patterns;
    Pattern reference;
};

/// Quadruples (i,j,k,l) over the window (n-3..n+4) with i<j, k<l, i<k, j!=l,
/// mapped to drive (i,j) / measure (k,l) and reduced into 1..N_E. The set
/// includes combinatorially valid but physically unusable patterns (measure
/// electrode equal to a drive electrode); those are filtered downstream and
/// reported as a frame statistic.
PatternSet enumerate_patterns(int n, int electrode_count);

/// True when both measurement electrodes differ from both drive electrodes.
bool pattern_is_physical(const Pattern& p);

struct FrameRecord {
    Pattern pattern;
    double U = std::numeric_limits<double>::quiet_NaN();  ///< measured voltage
    double V = std::numeric_limits<double>::quiet_NaN();  ///< unit-admittivity reference voltage
    double G = std::numeric_limits<double>::quiet_NaN();  ///< V/U
    double B = std::numeric_limits<double>::quiet_NaN();  ///< 1/G - 1/G_ref
    bool valid = false;
    bool is_reference = false;
};

struct FrameProvenance {
    std::string mesh_u_id;
    std::string mesh_v_id;
    std::string sigma_id;
    std::string electrodes_id;
    int electrode_count = 0;
    double current = 0.0;
    bool v_by_cem = false;
    bool has_noise = false;
    double snr_db = std::numeric_limits<double>::infinity();
    std::uint64_t seed = 0;
};

/// One measurement frame: every pattern of a PatternSet in enumeration order,
/// the reference record last.
struct MeasurementFrame {
    int n = 0;
    std::vector<FrameRecord> records;
    double g_ref = std::numeric_limits<double>::quiet_NaN();
    int physical_count = 0;  ///< records passing the drive/measure disjointness filter
    FrameProvenance provenance;

    const FrameRecord& reference() const;
};

/// Simulates frames against fixed meshes: U from the complete electrode model
/// with the phantom conductivity on mesh_u, V from the unit-admittivity
/// point-model solve on mesh_v (complete model behind a flag). Factorizations
/// are built once and reused across frames; per-frame drive solves run in
/// parallel and deterministically.
class FrameSimulator {
  public:
    FrameSimulator(const Mesh& mesh_u, std::vector<double> sigma, const Mesh& mesh_v,
                   const ElectrodeConfig& electrodes, bool v_by_cem = false);

    MeasurementFrame simulate(const PatternSet& patterns) const;
    int electrode_count() const { return electrodes_.count(); }
    const FrameProvenance& provenance() const { return provenance_; }

  private:
    ElectrodeConfig electrodes_;
    CemSolver cem_u_;
    std::unique_ptr<PemSolver> pem_v_;
    std::unique_ptr<CemSolver> cem_v_;
    FrameProvenance provenance_;
};

/// One-shot wrapper around FrameSimulator.
MeasurementFrame simulate_frame(const Mesh& mesh_u, const std::vector<double>& sigma,
                                const Mesh& mesh_v, const ElectrodeConfig& electrodes,
                                const PatternSet& patterns, bool v_by_cem = false);

/// Additive Gaussian noise on U only: sigma_noise = RMS(U over valid records)
/// times 10^(-snr_db/20); G, B and G_ref recomputed; V untouched; records are
/// perturbed in stored order so a fixed seed gives a bit-identical frame.
/// snr_db = +infinity returns the frame unchanged.
MeasurementFrame add_noise(const MeasurementFrame& frame, double snr_db, std::uint64_t seed);

/// alpha_{k,l} = V_{k,l} / V_ref for each value in `v_values`.
std::vector<double> alpha_ratio(const std::vector<double>& v_values, double v_reference);

/// Per-record alpha of a frame (NaN for invalid records).
std::vector<double> alpha_ratio(const MeasurementFrame& frame);

}  // namespace eit
