// Tests for the closed-form disk voltages, the constant-admittivity inverse,
// the one-dimensional layered average, and the model-agreement study.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "eit/analytic.hpp"
#include "eit/core.hpp"
#include "eit/forward.hpp"
#include "eit/geometry.hpp"

using namespace eit;

namespace {

DiskSpec uniform_disk(double radius, int count, double s0 = 0.0) {
    DiskSpec d;
    d.radius = radius;
    double circ = kTwoPi * radius;
    for (int i = 0; i < count; ++i) d.arc_positions.push_back(s0 + circ * i / count);
    return d;
}

// Independent 1D oracle: finite-volume solve of (gamma u')' = 0 on [0,1] with
// u(0)=0, u(1)=1 on an interface-aligned grid; the effective admittivity is
// the (constant) flux gamma * u'.
double layered_effective_fd(double a, double gamma1, double gamma2, int cells) {
    int k = std::max(1, std::min(cells - 1, static_cast<int>(std::lround(a * cells))));
    std::vector<double> x(cells + 1), g(cells);
    for (int i = 0; i <= cells; ++i)
        x[i] = (i <= k) ? a * i / k : a + (1.0 - a) * (i - k) / (cells - k);
    for (int i = 0; i < cells; ++i) g[i] = (i < k) ? gamma1 : gamma2;

    // Thomas solve of the flux-continuity system for interior nodes.
    int n = cells - 1;
    std::vector<double> diag(n), lower(n), upper(n), rhs(n, 0.0);
    auto cond = [&](int i) { return g[i] / (x[i + 1] - x[i]); };
    for (int i = 0; i < n; ++i) {
        double cl = cond(i), cr = cond(i + 1);
        diag[i] = cl + cr;
        lower[i] = -cl;
        upper[i] = -cr;
    }
    rhs[n - 1] += cond(n);  // u(1) = 1
    for (int i = 1; i < n; ++i) {
        double m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    std::vector<double> u(n);
    u[n - 1] = rhs[n - 1] / diag[n - 1];
    for (int i = n - 2; i >= 0; --i) u[i] = (rhs[i] - upper[i] * u[i + 1]) / diag[i];
    return cond(0) * (u[0] - 0.0);  // flux through the first cell
}

}  // namespace

TEST_CASE("disk spec validation") {
    CHECK_NOTHROW(validate_disk(uniform_disk(1.0, 8)));
    DiskSpec bad = uniform_disk(0.0, 8);
    CHECK_THROWS_AS(validate_disk(bad), Error);
    bad = uniform_disk(1.0, 8);
    bad.arc_positions[3] = bad.arc_positions[2];  // not strictly increasing
    CHECK_THROWS_AS(validate_disk(bad), Error);
    bad = uniform_disk(1.0, 8);
    bad.arc_positions[7] = 10.0;  // beyond the circumference
    CHECK_THROWS_AS(validate_disk(bad), Error);
}

TEST_CASE("chord-form and arc-form voltages agree to 1e-12") {
    DiskSpec d = uniform_disk(0.8, 10, 0.37);
    std::mt19937 rng(12345);
    std::uniform_int_distribution<int> pick(1, 10);
    int tested = 0;
    while (tested < 50) {
        Pattern p{pick(rng), pick(rng), pick(rng), pick(rng)};
        int labs[4] = {p.k_plus, p.k_minus, p.l_plus, p.l_minus};
        bool distinct = true;
        for (int i = 0; i < 4; ++i)
            for (int j = i + 1; j < 4; ++j)
                if (labs[i] == labs[j]) distinct = false;
        if (!distinct) continue;
        double u1 = disk_voltage_homogeneous(d, 2.5, 1.3, p);
        double u2 = disk_voltage_homogeneous_arc(d, 2.5, 1.3, p);
        CHECK(std::abs(u1 - u2) <= 1e-12 * std::max(1.0, std::abs(u1)));
        ++tested;
    }
}

TEST_CASE("closed-form roundtrip recovers the admittivity exactly") {
    // Three layouts: uniform 8, uniform 16 rotated, non-uniform 10.
    DiskSpec layouts[3] = {uniform_disk(1.0, 8), uniform_disk(1.0, 16, 0.21),
                           uniform_disk(0.8, 10)};
    // Perturb the third layout into non-uniform positions.
    for (int i = 0; i < 10; ++i) layouts[2].arc_positions[i] += 0.04 * ((i * 7) % 3);
    for (const DiskSpec& d : layouts) {
        validate_disk(d);
        for (Pattern p : {Pattern{1, 5, 2, 4}, Pattern{1, 4, 6, 8}, Pattern{2, 7, 3, 6}}) {
            double u = disk_voltage_homogeneous(d, 3.0, 1.0, p);
            if (std::abs(u) < 1e-14) continue;
            CHECK(std::abs(gamma_from_voltage(d, u, 1.0, p) - 3.0) < 1e-12);
        }
    }
}

TEST_CASE("symmetric pattern yields zero voltage; inverting it is degenerate") {
    DiskSpec d = uniform_disk(1.0, 8);
    Pattern p{1, 5, 3, 7};  // mirror-symmetric about the drive axis
    double u = disk_voltage_homogeneous(d, 1.0, 1.0, p);
    CHECK(std::abs(u) < 1e-15);
    CHECK_THROWS_AS(gamma_from_voltage(d, 0.0, 1.0, p), Error);
    try {
        gamma_from_voltage(d, 0.0, 1.0, p);
    } catch (const Error& err) {
        CHECK(err.kind() == ErrorKind::Degenerate);
    }
}

TEST_CASE("swapping the measure pair negates the closed-form voltage exactly") {
    DiskSpec d = uniform_disk(1.0, 16, 0.1);
    Pattern p{1, 9, 4, 12};
    Pattern q{1, 9, 12, 4};
    CHECK(disk_voltage_homogeneous(d, 2.0, 1.0, p) == -disk_voltage_homogeneous(d, 2.0, 1.0, q));
}

TEST_CASE("degenerate patterns are rejected") {
    DiskSpec d = uniform_disk(1.0, 8);
    CHECK_THROWS_AS(disk_voltage_homogeneous(d, 1.0, 1.0, Pattern{1, 1, 2, 3}), Error);
    CHECK_THROWS_AS(disk_voltage_homogeneous(d, 1.0, 1.0, Pattern{1, 5, 2, 2}), Error);
    CHECK_THROWS_AS(disk_voltage_homogeneous(d, 1.0, 1.0, Pattern{0, 5, 2, 3}), Error);
    CHECK_THROWS_AS(disk_voltage_homogeneous(d, 1.0, 1.0, Pattern{1, 5, 2, 9}), Error);
    CHECK_THROWS_AS(disk_voltage_homogeneous(d, 0.0, 1.0, Pattern{1, 5, 2, 4}), Error);
}

TEST_CASE("constant admittivity from Neumann kernel values matches the chord form") {
    DiskSpec d = uniform_disk(1.0, 8, 0.05);
    Pattern p{1, 5, 2, 4};
    double gamma = 2.2;
    double u = disk_voltage_homogeneous(d, gamma, 1.0, p);

    auto point = [&](int label) {
        double theta = d.arc_positions[label - 1] / d.radius;
        return Vec2{d.radius * std::cos(theta), d.radius * std::sin(theta)};
    };
    // The kernel combination is evaluated on the unit disk; rescale positions.
    Vec2 kp = point(p.k_plus) * (1.0 / d.radius);
    Vec2 km = point(p.k_minus) * (1.0 / d.radius);
    Vec2 lp = point(p.l_plus) * (1.0 / d.radius);
    Vec2 lm = point(p.l_minus) * (1.0 / d.radius);
    std::array<double, 4> n = {disk_neumann_kernel(kp, lp), disk_neumann_kernel(kp, lm),
                               disk_neumann_kernel(km, lp), disk_neumann_kernel(km, lm)};
    double recovered = constant_gamma_from_neumann(n, u, 1.0);
    CHECK(std::abs(recovered - gamma) < 1e-12);
    // Unit admittivity is a fixed point of the identity.
    double u1 = disk_voltage_homogeneous(d, 1.0, 1.0, p);
    CHECK(std::abs(constant_gamma_from_neumann(n, u1, 1.0) - 1.0) < 1e-12);
    CHECK_THROWS_AS(constant_gamma_from_neumann(n, 0.0, 1.0), Error);
}

TEST_CASE("finite-element voltage ratio recovers a constant admittivity within 1%") {
    // General (elliptical) domain: the chord formula does not apply, but the
    // ratio of unit-admittivity to measured voltage still recovers gamma.
    BoundaryShape shape = BoundaryShape::ellipse(1.15, 0.85);
    ElectrodeConfig e = equispaced_electrodes(shape, 8, 0.04);
    Mesh mesh = generate_boundary_mesh(shape, e, MeshOptions{0.06, 0.03, 0.4});
    double gamma = 2.0;
    std::vector<double> unit(mesh.tri_count(), 1.0), scaled(mesh.tri_count(), gamma);
    Pattern p{1, 5, 2, 4};
    double v = measure(solve_pem(mesh, unit, e, p.drive()), p.l_plus, p.l_minus);
    double u = measure(solve_pem(mesh, scaled, e, p.drive()), p.l_plus, p.l_minus);
    CHECK(std::abs(v / u - gamma) < 0.01 * gamma);
}

TEST_CASE("harmonic layered average: closed form, limits, and FD oracle") {
    CHECK(harmonic_average_1d(0.5, 1.0, 3.0) == doctest::Approx(1.5).epsilon(1e-15));
    // Thin first layer: the average tends to the second admittivity.
    CHECK(std::abs(harmonic_average_1d(1e-9, 2.0, 5.0) - 5.0) < 1e-6);
    // Thick first layer: the average tends to the first admittivity.
    CHECK(std::abs(harmonic_average_1d(1.0 - 1e-9, 2.0, 5.0) - 2.0) < 1e-6);
    CHECK_THROWS_AS(harmonic_average_1d(0.0, 1.0, 1.0), Error);
    CHECK_THROWS_AS(harmonic_average_1d(1.0, 1.0, 1.0), Error);
    CHECK_THROWS_AS(harmonic_average_1d(0.5, -1.0, 1.0), Error);

    std::mt19937 rng(777);
    std::uniform_real_distribution<double> frac(0.05, 0.95);
    std::uniform_real_distribution<double> logg(std::log(0.1), std::log(10.0));
    for (int trial = 0; trial < 20; ++trial) {
        double a = frac(rng);
        double g1 = std::exp(logg(rng));
        double g2 = std::exp(logg(rng));
        double expect = harmonic_average_1d(a, g1, g2);
        double oracle = layered_effective_fd(a, g1, g2, 100);
        CHECK(std::abs(expect - oracle) <= 1e-6 * expect);
    }
}

TEST_CASE("study spec validation: ordering, exclusion radius, resolvability") {
    ConvergenceStudySpec spec = default_convergence_spec();
    CHECK(spec.levels.size() == 5);
    for (std::size_t i = 1; i < spec.levels.size(); ++i)
        CHECK(spec.levels[i].h < spec.levels[i - 1].h);

    ConvergenceStudySpec bad = spec;
    std::swap(bad.levels[0], bad.levels[1]);  // increasing h
    CHECK_THROWS_AS(run_convergence_study(bad), Error);

    bad = spec;
    bad.exclusion_radius = 0.1;  // 2h not below R at the coarsest level
    CHECK_THROWS_AS(run_convergence_study(bad), Error);

    bad = spec;
    bad.levels = {make_convergence_level(0.16)};
    bad.levels[0].pem_mesh.band_len = 0.16;  // band too coarse to resolve h
    CHECK_THROWS_AS(run_convergence_study(bad), Error);
    try {
        run_convergence_study(bad);
    } catch (const Error& err) {
        CHECK(err.kind() == ErrorKind::Resolution);
    }
}

TEST_CASE("model-agreement study: errors fall at first order, rate is stable") {
    ConvergenceStudySpec spec = default_convergence_spec();
    spec.levels = {make_convergence_level(0.16), make_convergence_level(0.08),
                   make_convergence_level(0.04), make_convergence_level(0.02)};
    ConvergenceReport four = run_convergence_study(spec);
    REQUIRE(four.errors.size() == 4);
    for (std::size_t i = 1; i < four.errors.size(); ++i) CHECK(four.errors[i] < four.errors[i - 1]);
    CHECK(four.fitted_rate > 0.5);
    CHECK(four.fitted_rate < 1.5);
    CHECK(four.exclusion_radius == spec.exclusion_radius);

    append_refinement_level(spec);
    CHECK(spec.levels.size() == 5);
    CHECK(spec.levels.back().h == doctest::Approx(0.01).epsilon(1e-12));
    ConvergenceReport five = run_convergence_study(spec);
    CHECK(std::abs(five.fitted_rate - four.fitted_rate) <= 0.1);
}

TEST_CASE("single-level study: defined errors, undefined rate") {
    ConvergenceStudySpec spec = default_convergence_spec();
    spec.levels = {make_convergence_level(0.08)};
    ConvergenceReport report = run_convergence_study(spec);
    REQUIRE(report.errors.size() == 1);
    CHECK(report.errors[0] > 0);
    CHECK(std::isnan(report.fitted_rate));
}

TEST_CASE("point model tracks the chord formula for separated patterns") {
    // All physical patterns of the 8-electrode window whose chord voltage is
    // comfortably nonzero stay within 1% of the closed form.
    BoundaryShape shape = BoundaryShape::circle(1.0);
    ElectrodeConfig e = equispaced_electrodes(shape, 8, 0.05);
    Mesh mesh = generate_disk_mesh(1.0, 0.05, e);
    std::vector<double> sigma(mesh.tri_count(), 1.0);
    PemSolver solver(mesh, sigma, e);
    DiskSpec d = uniform_disk(1.0, 8);

    // Mesh at edge 0.05 is coarse; check a 3% envelope here (the acceptance
    // gate re-runs this on a fine mesh at 1%).
    int checked = 0;
    for (int kp = 1; kp <= 8; ++kp)
        for (int km = kp + 1; km <= 8; ++km) {
            PotentialField field = solver.solve({kp, km});
            for (int lp = 1; lp <= 8; ++lp)
                for (int lm = lp + 1; lm <= 8; ++lm) {
                    if (lp == kp || lp == km || lm == kp || lm == km) continue;
                    Pattern p{kp, km, lp, lm};
                    double exact = disk_voltage_homogeneous(d, 1.0, 1.0, p);
                    double ratio = exact * kPi;  // log chord ratio at gamma=I=1
                    if (std::abs(ratio) < 0.1) continue;  // null-adjacent patterns excluded
                    double u = measure(field, lp, lm);
                    CHECK(std::abs(u - exact) < 0.03 * std::abs(exact));
                    ++checked;
                }
        }
    CHECK(checked > 100);
}
