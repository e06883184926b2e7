#pragma once

#include <array>
#include <vector>

#include "eit/forward.hpp"
#include "eit/geometry.hpp"

namespace eit {

/// Circular domain with electrodes at given arc-length positions; the setting
/// in which homogeneous voltages have a closed form.
struct DiskSpec {
    double radius = 1.0;
    std::vector<double> arc_positions;  ///< strictly increasing modulo circumference

    int count() const { return static_cast<int>(arc_positions.size()); }
};

/// Validates DiskSpec invariants (positive radius, increasing positions).
void validate_disk(const DiskSpec& disk);

/// Neumann kernel of the homogeneous unit disk problem, N(x, y) = -(1/pi)·log|x-y|.
double disk_neumann_kernel(const Vec2& x, const Vec2& y);

/// Closed-form four-electrode voltage on a homogeneous disk:
/// U = (I / (gamma·pi)) · log( d(k+,l-)·d(k-,l+) / (d(k+,l+)·d(k-,l-)) )
/// with d the chord length between electrode points.
double disk_voltage_homogeneous(const DiskSpec& disk, double gamma, double current,
                                const Pattern& pattern);

/// Same value computed through arc lengths (chord = 2s·sin(arc/(2s))).
double disk_voltage_homogeneous_arc(const DiskSpec& disk, double gamma, double current,
                                    const Pattern& pattern);

/// Inverse of disk_voltage_homogeneous in gamma.
double gamma_from_voltage(const DiskSpec& disk, double voltage, double current,
                          const Pattern& pattern);

/// Recovers a constant admittivity from four Neumann-function values
/// {N(pk+,pl+), N(pk+,pl-), N(pk-,pl+), N(pk-,pl-)} and a measured voltage:
/// gamma = (I/U)·(N0 - N1 - N2 + N3). U = 0 is a degenerate-pattern error.
double constant_gamma_from_neumann(const std::array<double, 4>& neumann_values, double voltage,
                                   double current);

/// Depth-weighted harmonic mean 1 / (a/gamma1 + (1-a)/gamma2), a in (0,1).
double harmonic_average_1d(double a, double gamma1, double gamma2);

/// One refinement level of the model-agreement study: electrode half-width h
/// plus the mesh resolutions used for the complete-model and point-model
/// solves (kept distinct so shared-mesh error cancellation cannot inflate the
/// measured order).
struct ConvergenceLevel {
    double h = 0.0;
    MeshOptions cem_mesh;
    MeshOptions pem_mesh;
};

struct ConvergenceStudySpec {
    double radius = 1.0;
    int electrode_count = 8;
    double contact_impedance = 0.01;
    double current = 1.0;
    DrivePair drive{1, 5};
    double exclusion_radius = 0.35;  ///< R: disks of this radius around drive centers excluded
    std::vector<ConvergenceLevel> levels;  ///< strictly decreasing h
};

/// Mesh budgets for one study level at boundary scale h (edge length and
/// boundary band proportional to h, independently for the two models so the
/// meshes never share node positions).
ConvergenceLevel make_convergence_level(double h);

/// Frozen default study: unit disk, 8 electrodes, drive (1,5), R = 0.35,
/// h = 0.16 halved down to 0.01, per-level mesh budgets proportional to h.
ConvergenceStudySpec default_convergence_spec();

/// Appends one more halving level to a spec (for rate-stability checks).
void append_refinement_level(ConvergenceStudySpec& spec);

struct ConvergenceReport {
    std::vector<double> h_values;  ///< strictly decreasing
    std::vector<double> errors;    ///< discrete H1 distance over the exclusion region
    double fitted_rate = 0.0;      ///< log-log least-squares slope
    double exclusion_radius = 0.0;
};

/// For each level solves both electrode models with gamma = 1 on independent
/// meshes, transfers the point-model field onto the complete-model mesh,
/// re-gauges both to the zero weighted boundary mean, and integrates the
/// squared H1 difference over triangles fully outside the drive exclusion
/// disks. Fits the log-log rate across levels.
ConvergenceReport run_convergence_study(const ConvergenceStudySpec& spec);

}  // namespace eit
