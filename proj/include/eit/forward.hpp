#pragma once

#include <Eigen/Sparse>
#include <array>
#include <memory>
#include <vector>

#include "eit/geometry.hpp"

namespace eit {

/// Current drive pair; electrode labels are 1-based.
struct DrivePair {
    int plus = 0;
    int minus = 0;
};

/// Four-electrode pattern (k+, k-) drive / (l+, l-) measure, 1-based labels.
struct Pattern {
    int k_plus = 0;
    int k_minus = 0;
    int l_plus = 0;
    int l_minus = 0;

    DrivePair drive() const { return {k_plus, k_minus}; }
    bool operator==(const Pattern&) const = default;
};

/// A solved potential. `electrode` always holds one value per electrode: the
/// electrode constant for the complete model, the potential at the electrode
/// center node for the point model. Voltages are differences of these.
struct PotentialField {
    enum class Kind { Cem, Pem };
    Kind kind = Kind::Cem;
    std::vector<double> nodal;      ///< per mesh node (V)
    std::vector<double> electrode;  ///< per electrode (V)
    DrivePair drive;
};

/// Voltage between measurement electrodes. l+ == l- gives exactly 0;
/// measuring on a drive electrode is a pattern error.
double measure(const PotentialField& field, int l_plus, int l_minus);

/// Per-triangle areas and P1 basis gradients.
struct TriGeometry {
    std::vector<double> area;
    std::vector<std::array<Vec2, 3>> grad;  ///< gradient of each vertex basis
};
TriGeometry triangle_geometry(const Mesh& mesh);
TriGeometry triangle_geometry_serial(const Mesh& mesh);

/// Per-triangle values of the 3x3 local stiffness blocks, flattened as
/// value[9t + 3i + j] = sigma_t * area_t * grad_i . grad_j.
std::vector<double> stiffness_values(const Mesh& mesh, const TriGeometry& geom,
                                     const std::vector<double>& sigma);
std::vector<double> stiffness_values_serial(const Mesh& mesh, const TriGeometry& geom,
                                            const std::vector<double>& sigma);

/// Piecewise-constant gradient of a nodal field.
std::vector<Vec2> element_gradients(const Mesh& mesh, const TriGeometry& geom,
                                    const std::vector<double>& nodal);
std::vector<Vec2> element_gradients_serial(const Mesh& mesh, const TriGeometry& geom,
                                           const std::vector<double>& nodal);

/// Half-edge-length weight of each boundary node (discrete ds measure);
/// interior nodes get 0.
std::vector<double> boundary_node_weights(const Mesh& mesh);

/// sum_t sigma_t * area_t * (grad uk)_t . (grad ul)_t — the conductive part of
/// the bilinear form, used by the energy-identity checks.
double dirichlet_energy(const Mesh& mesh, const TriGeometry& geom,
                        const std::vector<double>& sigma, const std::vector<double>& nodal_k,
                        const std::vector<double>& nodal_l);

/// Complete electrode model solver: P1 elements, exact edge-wise quadrature of
/// the contact terms, zero-sum-of-electrode-potentials gauge. The factorization
/// is immutable after construction; concurrent solves are safe.
class CemSolver {
  public:
    CemSolver(const Mesh& mesh, std::vector<double> sigma, const ElectrodeConfig& electrodes);

    PotentialField solve(DrivePair drive) const;
    int electrode_count() const { return nl_; }

    /// Current through each electrode, integral of (P_l - u)/z over the arc.
    /// Sums to zero up to solver tolerance; +I/-I/0 per the drive.
    std::vector<double> electrode_currents(const PotentialField& field) const;

  private:
    int nn_ = 0;
    int nl_ = 0;
    double current_ = 1.0;
    double contact_impedance_ = 0.01;
    std::vector<std::vector<std::array<int, 2>>> electrode_edge_nodes_;
    std::vector<std::vector<double>> electrode_edge_len_;
    std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
};

/// Point electrode model solver: point loads at electrode center nodes,
/// grounded at the innermost mesh node, then shifted to the zero weighted
/// boundary mean gauge (discrete integral of u over the boundary is 0).
class PemSolver {
  public:
    PemSolver(const Mesh& mesh, std::vector<double> sigma, const ElectrodeConfig& electrodes);

    PotentialField solve(DrivePair drive) const;
    int electrode_count() const { return static_cast<int>(center_node_.size()); }

  private:
    int nn_ = 0;
    int pin_ = 0;
    double current_ = 1.0;
    std::vector<int> center_node_;
    std::vector<double> weight_;
    double weight_sum_ = 0.0;
    std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>> ldlt_;
};

/// One-shot wrappers (assemble, factor, solve once).
PotentialField solve_cem(const Mesh& mesh, const std::vector<double>& sigma,
                         const ElectrodeConfig& electrodes, DrivePair drive);
PotentialField solve_pem(const Mesh& mesh, const std::vector<double>& sigma,
                         const ElectrodeConfig& electrodes, DrivePair drive);

}  // namespace eit
