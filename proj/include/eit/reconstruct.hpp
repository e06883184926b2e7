#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "eit/data.hpp"
#include "eit/forward.hpp"
#include "eit/geometry.hpp"

namespace eit {

/// The near-electrode reconstruction patch for center electrode n: triangles
/// whose centroid lies within `depth` of the boundary and inside the arc
/// window spanned by the 8-electrode neighborhood plus one pitch of margin.
struct ReconDomain {
    int n = 0;
    double depth = 0.0;
    std::vector<int> elements;  ///< parent-mesh triangle ids, ascending
    std::string mesh_id;
};

/// Selects the domain from the mesh's own boundary ring and electrode wiring.
/// depth <= 0 selects the default of twice the electrode pitch. The selection
/// is restricted to its largest edge-connected component and is deterministic.
/// An empty selection (for example depth ~ 0) is a geometry error.
ReconDomain extract_recon_domain(const Mesh& mesh, int n, double depth = 0.0);

/// Dense linearized system S kappa = b over a ReconDomain.
struct SensitivitySystem {
    Eigen::MatrixXd S;  ///< rows: usable patterns, cols: domain elements
    Eigen::VectorXd b;  ///< reference-subtracted reciprocal data per row
    std::vector<Pattern> row_patterns;
    int dropped_degenerate = 0;  ///< rows dropped for |V| < 1e-14
    double alpha = 0.0;          ///< default regularization (1e-2 * tr(S^T S) / N_T)
    double gamma0 = 0.0;         ///< background admittivity estimate (S/m)
    double current = 1.0;        ///< drive current (mA)
    ReconDomain domain;
};

/// Row r, element m: area_m * ( (grad v_k . grad v_l)/V_kl - (grad v_ref1 .
/// grad v_ref2)/V_ref ). Fields are the unit-admittivity solves for every
/// drive pair appearing in the frame (as drive or measure pair); a missing
/// field is a data-mismatch error. The reference row cancels identically and
/// is excluded; invalid and |V| < 1e-14 records are skipped (counted).
SensitivitySystem assemble_sensitivity(const ReconDomain& domain, const Mesh& mesh,
                                       const std::vector<PotentialField>& v_fields,
                                       const MeasurementFrame& frame);
SensitivitySystem assemble_sensitivity_serial(const ReconDomain& domain, const Mesh& mesh,
                                              const std::vector<PotentialField>& v_fields,
                                              const MeasurementFrame& frame);

/// Every drive pair needed to assemble systems for this pattern set (drive
/// pairs and measure pairs of physical patterns, plus both reference pairs).
std::vector<DrivePair> required_field_pairs(const PatternSet& patterns);

/// Reconstruction over one domain. kappa is the scaled admittivity perturbation
/// (kappa_m = -(1/I)(gamma_m/gamma0^2 - 1/gamma0)); gamma inverts it.
struct ReconImage {
    int n = 0;
    std::vector<int> elements;
    std::vector<double> kappa;
    std::vector<double> gamma;
    double gamma0 = 0.0;
    double alpha = 0.0;
    std::string mesh_id;
};

/// Tikhonov-regularized least squares: kappa = (S^T S + alpha I)^{-1} S^T b,
/// solved in whichever of the primal/dual forms is smaller, with iterative
/// refinement until the normal-equation residual is below 1e-10 * |S^T b|.
/// b = 0 returns kappa = 0 exactly.
ReconImage solve_tikhonov(const SensitivitySystem& system, double alpha);
ReconImage solve_tikhonov(const SensitivitySystem& system);  ///< uses system.alpha

/// Background admittivity from the reference pattern's geometry-free value
/// (the most closely spaced pattern senses the outermost layer).
double estimate_gamma0(const MeasurementFrame& frame);

/// | kappa | bound implied by a data-vector bound: tol_b times the max-abs-row-sum
/// operator norm of (S^T S + alpha I)^{-1} S^T.
double kappa_amplification_norm(const SensitivitySystem& system, double alpha);

/// Per-element union of per-center images: unweighted mean over covering
/// domains; uncovered elements are NaN with coverage 0.
struct MergedImage {
    std::vector<double> gamma;
    std::vector<int> coverage;
};
MergedImage merge_images(const std::vector<ReconImage>& images, std::size_t tri_count);

/// Correlations c_{i,j} = s_i . s_j / (|s_i||s_j|) of domain column i against
/// every column; zero columns yield NaN entries.
std::vector<double> column_correlation(const SensitivitySystem& system, int i);

/// Pointwise sensitivity weight of a measurement pair: w = (grad v_k / I) .
/// (grad v_l / I) per element, with a shell-averaged |w| profile by distance
/// from the four drive points.
struct DecayDiagnostic {
    std::vector<double> weight;        ///< signed w per element
    std::vector<double> element_dist;  ///< centroid distance to nearest drive point
    std::vector<double> shell_lo;
    std::vector<double> shell_hi;
    std::vector<double> shell_mean;  ///< mean |w| per shell
    int argmax_element = -1;
};
DecayDiagnostic decay_diagnostic(const PotentialField& v_k, const PotentialField& v_l,
                                 const Mesh& mesh, const ElectrodeConfig& electrodes);

/// Scores a merged image against a known interface depth: per angular sector,
/// the per-ring mean profile of gamma is thresholded halfway between its
/// shallow minimum and its deep plateau; the crossing depth is compared to
/// `fat_depth` in units of the local ring spacing.
struct InterfaceScore {
    int sectors_ok = 0;
    int sectors_scored = 0;
    std::vector<double> errors_layers;  ///< per scored sector with a crossing
};
InterfaceScore score_interface_depth(const Mesh& mesh, const std::vector<double>& merged_gamma,
                                     const std::vector<int>& coverage, double fat_depth,
                                     int sectors = 64, double max_err_layers = 1.0);

}  // namespace eit
