#include "eit/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace eit {

void validate_disk(const DiskSpec& disk) {
    require(disk.radius > 0, ErrorKind::Geometry, "disk radius must be positive");
    require(disk.count() >= 2, ErrorKind::Config, "disk needs at least two electrode positions");
    const double circ = kTwoPi * disk.radius;
    for (int i = 0; i < disk.count(); ++i) {
        require(disk.arc_positions[i] >= 0 && disk.arc_positions[i] < circ + 1e-12,
                ErrorKind::Config, "arc positions must lie within one circumference");
        if (i > 0)
            require(disk.arc_positions[i] > disk.arc_positions[i - 1], ErrorKind::Config,
                    "arc positions must be strictly increasing");
    }
}

double disk_neumann_kernel(const Vec2& x, const Vec2& y) {
    double d = (x - y).norm();
    require(d > 0, ErrorKind::Degenerate, "Neumann kernel at coincident points");
    return -std::log(d) / kPi;
}

namespace {

Vec2 disk_point(const DiskSpec& disk, int label) {
    double th = disk.arc_positions[label - 1] / disk.radius;
    return {disk.radius * std::cos(th), disk.radius * std::sin(th)};
}

void check_pattern_labels(const DiskSpec& disk, const Pattern& p) {
    validate_disk(disk);
    for (int lab : {p.k_plus, p.k_minus, p.l_plus, p.l_minus})
        require(lab >= 1 && lab <= disk.count(), ErrorKind::Pattern,
                "electrode label out of range");
    const int labs[4] = {p.k_plus, p.k_minus, p.l_plus, p.l_minus};
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            require(labs[i] != labs[j], ErrorKind::Degenerate,
                    "coincident electrode points in closed-form voltage");
}

}  // namespace

double disk_voltage_homogeneous(const DiskSpec& disk, double gamma, double current,
                                const Pattern& pattern) {
    check_pattern_labels(disk, pattern);
    require(gamma > 0, ErrorKind::Config, "admittivity must be positive");
    auto d = [&](int i, int j) { return (disk_point(disk, i) - disk_point(disk, j)).norm(); };
    double ratio = (d(pattern.k_plus, pattern.l_minus) * d(pattern.k_minus, pattern.l_plus)) /
                   (d(pattern.k_plus, pattern.l_plus) * d(pattern.k_minus, pattern.l_minus));
    return current / (gamma * kPi) * std::log(ratio);
}

double disk_voltage_homogeneous_arc(const DiskSpec& disk, double gamma, double current,
                                    const Pattern& pattern) {
    check_pattern_labels(disk, pattern);
    require(gamma > 0, ErrorKind::Config, "admittivity must be positive");
    const double s = disk.radius;
    const double circ = kTwoPi * s;
    auto chord = [&](int i, int j) {
        double arc = std::abs(disk.arc_positions[i - 1] - disk.arc_positions[j - 1]);
        arc = std::min(arc, circ - arc);
        return 2.0 * s * std::sin(arc / (2.0 * s));
    };
    double ratio = (chord(pattern.k_plus, pattern.l_minus) * chord(pattern.k_minus, pattern.l_plus)) /
                   (chord(pattern.k_plus, pattern.l_plus) * chord(pattern.k_minus, pattern.l_minus));
    return current / (gamma * kPi) * std::log(ratio);
}

double gamma_from_voltage(const DiskSpec& disk, double voltage, double current,
                          const Pattern& pattern) {
    check_pattern_labels(disk, pattern);
    require(voltage != 0, ErrorKind::Degenerate, "zero voltage cannot determine admittivity");
    auto d = [&](int i, int j) { return (disk_point(disk, i) - disk_point(disk, j)).norm(); };
    double ratio = (d(pattern.k_plus, pattern.l_minus) * d(pattern.k_minus, pattern.l_plus)) /
                   (d(pattern.k_plus, pattern.l_plus) * d(pattern.k_minus, pattern.l_minus));
    return current / (voltage * kPi) * std::log(ratio);
}

double constant_gamma_from_neumann(const std::array<double, 4>& neumann_values, double voltage,
                                   double current) {
    require(voltage != 0, ErrorKind::Degenerate,
            "zero voltage in constant-admittivity recovery (degenerate pattern)");
    double comb = neumann_values[0] - neumann_values[1] - neumann_values[2] + neumann_values[3];
    return current / voltage * comb;
}

double harmonic_average_1d(double a, double gamma1, double gamma2) {
    require(a > 0 && a < 1, ErrorKind::Config, "layer fraction must lie in (0,1)");
    require(gamma1 > 0 && gamma2 > 0, ErrorKind::Config, "admittivities must be positive");
    return 1.0 / (a / gamma1 + (1.0 - a) / gamma2);
}

// ---------------------------------------------------------------------------
// Model-agreement convergence study
// ---------------------------------------------------------------------------

ConvergenceLevel make_convergence_level(double h) {
    ConvergenceLevel lvl;
    lvl.h = h;
    lvl.cem_mesh = {4.0 * h, h / 2.2, 0.5};
    lvl.pem_mesh = {4.4 * h, h / 2.1, 0.55};
    return lvl;
}

ConvergenceStudySpec default_convergence_spec() {
    ConvergenceStudySpec spec;
    spec.radius = 1.0;
    spec.electrode_count = 8;
    spec.contact_impedance = 0.01;
    spec.current = 1.0;
    spec.drive = {1, 5};
    spec.exclusion_radius = 0.35;
    for (double h : {0.16, 0.08, 0.04, 0.02, 0.01}) spec.levels.push_back(make_convergence_level(h));
    return spec;
}

void append_refinement_level(ConvergenceStudySpec& spec) {
    require(!spec.levels.empty(), ErrorKind::Config, "no levels to refine");
    spec.levels.push_back(make_convergence_level(spec.levels.back().h / 2.0));
}

ConvergenceReport run_convergence_study(const ConvergenceStudySpec& spec) {
    require(!spec.levels.empty(), ErrorKind::Config,
            "convergence study needs at least one level");
    require(spec.radius > 0, ErrorKind::Geometry, "radius must be positive");
    double finest_edge = std::numeric_limits<double>::max();
    double smallest_h = std::numeric_limits<double>::max();
    for (std::size_t i = 0; i < spec.levels.size(); ++i) {
        const ConvergenceLevel& lvl = spec.levels[i];
        require(lvl.h > 0, ErrorKind::Config, "half-widths must be positive");
        if (i > 0)
            require(lvl.h < spec.levels[i - 1].h, ErrorKind::Config,
                    "half-widths must be strictly decreasing");
        require(2 * lvl.h < spec.exclusion_radius, ErrorKind::Config,
                "exclusion radius must exceed twice the electrode half-width");
        for (const MeshOptions* mo : {&lvl.cem_mesh, &lvl.pem_mesh}) {
            double band = mo->band_len > 0 ? mo->band_len : mo->edge_len;
            finest_edge = std::min(finest_edge, band);
        }
        smallest_h = std::min(smallest_h, lvl.h);
    }
    require(smallest_h >= 2.0 * finest_edge, ErrorKind::Resolution,
            "electrode half-width below mesh resolution (need h >= 2x finest edge)");

    BoundaryShape shape = BoundaryShape::circle(spec.radius);
    ConvergenceReport report;
    report.exclusion_radius = spec.exclusion_radius;

    for (const ConvergenceLevel& lvl : spec.levels) {
        ElectrodeConfig elec = equispaced_electrodes(shape, spec.electrode_count, lvl.h,
                                                     spec.contact_impedance, spec.current);
        Mesh mesh_u = generate_boundary_mesh(shape, elec, lvl.cem_mesh);
        Mesh mesh_v = generate_boundary_mesh(shape, elec, lvl.pem_mesh);
        for (const Mesh* m : {&mesh_u, &mesh_v})
            for (const auto& edges : m->electrode_edges)
                require(edges.size() >= 4, ErrorKind::Resolution,
                        "electrode arc resolved by fewer than 4 boundary edges");

        std::vector<double> ones_u(mesh_u.tri_count(), 1.0);
        std::vector<double> ones_v(mesh_v.tri_count(), 1.0);
        PotentialField fu = CemSolver(mesh_u, ones_u, elec).solve(spec.drive);
        PotentialField fv = PemSolver(mesh_v, ones_v, elec).solve(spec.drive);

        P1Interpolator interp(mesh_v);
        std::vector<double> vt = interp.evaluate_many(fv.nodal, mesh_u.nodes);

        std::vector<double> w = boundary_node_weights(mesh_u);
        double wsum = 0.0;
        for (double x : w) wsum += x;
        auto regauge = [&](std::vector<double>& f) {
            double shift = 0.0;
            for (std::size_t i = 0; i < f.size(); ++i) shift += w[i] * f[i];
            shift /= wsum;
            for (double& x : f) x -= shift;
        };
        std::vector<double> u = fu.nodal;
        regauge(u);
        regauge(vt);
        std::vector<double> diff(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) diff[i] = u[i] - vt[i];

        Vec2 cp = shape.point_at_arclength(elec.centers[spec.drive.plus - 1]);
        Vec2 cm = shape.point_at_arclength(elec.centers[spec.drive.minus - 1]);
        const double R = spec.exclusion_radius;
        TriGeometry geom = triangle_geometry(mesh_u);
        double acc = 0.0;
        for (std::size_t t = 0; t < mesh_u.tri_count(); ++t) {
            const auto& tr = mesh_u.triangles[t];
            bool keep = true;
            for (int i = 0; i < 3 && keep; ++i) {
                const Vec2& p = mesh_u.nodes[tr[i]];
                keep = (p - cp).norm() >= R && (p - cm).norm() >= R;
            }
            if (!keep) continue;
            Vec2 g = diff[tr[0]] * geom.grad[t][0] + diff[tr[1]] * geom.grad[t][1] +
                     diff[tr[2]] * geom.grad[t][2];
            double w0 = diff[tr[0]], w1 = diff[tr[1]], w2 = diff[tr[2]];
            double val2 = (geom.area[t] / 6.0) *
                          (w0 * w0 + w1 * w1 + w2 * w2 + w0 * w1 + w0 * w2 + w1 * w2);
            acc += geom.area[t] * g.squared_norm() + val2;
        }
        report.h_values.push_back(lvl.h);
        report.errors.push_back(std::sqrt(acc));
    }

    // least-squares slope of log(error) against log(h)
    const std::size_t n = report.errors.size();
    double mx = 0, my = 0;
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        require(report.errors[i] > 0, ErrorKind::Internal, "nonpositive study error");
        lx[i] = std::log(report.h_values[i]);
        ly[i] = std::log(report.errors[i]);
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double num = 0, den = 0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    // a single level carries no rate information
    report.fitted_rate = den > 0 ? num / den : std::numeric_limits<double>::quiet_NaN();
    return report;
}

}  // namespace eit
