// Tests for the finite-element forward solvers (complete and point electrode
// models) against closed-form disk voltages and structural identities.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "eit/analytic.hpp"
#include "eit/core.hpp"
#include "eit/forward.hpp"
#include "eit/geometry.hpp"

using namespace eit;

namespace {

struct DiskSetup {
    BoundaryShape shape = BoundaryShape::circle(1.0);
    ElectrodeConfig electrodes;
    Mesh mesh;
};

DiskSetup make_disk(int electrode_count, double half_width, const MeshOptions& options) {
    DiskSetup s;
    s.electrodes = equispaced_electrodes(s.shape, electrode_count, half_width);
    s.mesh = generate_boundary_mesh(s.shape, s.electrodes, options);
    return s;
}

DiskSpec disk_spec_of(const ElectrodeConfig& electrodes, double radius) {
    DiskSpec d;
    d.radius = radius;
    d.arc_positions = electrodes.centers;
    return d;
}

}  // namespace

TEST_CASE("complete model: electrode currents are +I, -I, 0 to 1e-10") {
    DiskSetup s = make_disk(16, 0.05, MeshOptions{0.08, 0.04, 0.4});
    std::vector<double> sigma(s.mesh.tri_count(), 3.0);
    CemSolver solver(s.mesh, sigma, s.electrodes);
    PotentialField field = solver.solve({3, 11});
    auto currents = solver.electrode_currents(field);
    REQUIRE(static_cast<int>(currents.size()) == 16);
    double total = 0.0;
    for (int l = 0; l < 16; ++l) {
        double expect = (l == 2) ? 1.0 : (l == 10) ? -1.0 : 0.0;
        CHECK(std::abs(currents[l] - expect) < 1e-10);
        total += currents[l];
    }
    CHECK(std::abs(total) < 1e-10);
}

TEST_CASE("complete model matches the closed-form disk voltage within 2%") {
    // Small electrodes (half-width 0.01 on a unit disk) with a matching
    // boundary band; conductivity 3 everywhere.
    DiskSetup s = make_disk(16, 0.01, MeshOptions{0.05, 0.01, 0.3});
    std::vector<double> sigma(s.mesh.tri_count(), 3.0);
    CemSolver solver(s.mesh, sigma, s.electrodes);
    DiskSpec disk = disk_spec_of(s.electrodes, 1.0);

    Pattern p{1, 9, 4, 12};
    PotentialField field = solver.solve(p.drive());
    double u_fem = measure(field, p.l_plus, p.l_minus);
    double u_exact = disk_voltage_homogeneous(disk, 3.0, 1.0, p);
    CHECK(std::abs(u_fem - u_exact) < 0.02 * std::abs(u_exact));
}

TEST_CASE("point model matches the closed-form disk voltage within 1%") {
    ElectrodeConfig e = equispaced_electrodes(BoundaryShape::circle(1.0), 8, 0.05);
    Mesh mesh = generate_disk_mesh(1.0, 0.02, e);
    std::vector<double> sigma(mesh.tri_count(), 1.0);
    PemSolver solver(mesh, sigma, e);
    DiskSpec disk = disk_spec_of(e, 1.0);

    for (Pattern p : {Pattern{1, 5, 2, 4}, Pattern{1, 5, 3, 7}, Pattern{2, 6, 4, 8}}) {
        double u_fem = measure(solver.solve(p.drive()), p.l_plus, p.l_minus);
        double u_exact = disk_voltage_homogeneous(disk, 1.0, 1.0, p);
        if (std::abs(u_exact) < 1e-12) continue;  // symmetric null pattern
        CHECK(std::abs(u_fem - u_exact) < 0.01 * std::abs(u_exact));
    }
}

TEST_CASE("point-model voltage error shrinks with mesh refinement") {
    ElectrodeConfig e = equispaced_electrodes(BoundaryShape::circle(1.0), 8, 0.1);
    DiskSpec disk = disk_spec_of(e, 1.0);
    Pattern p{1, 5, 2, 4};
    double u_exact = disk_voltage_homogeneous(disk, 1.0, 1.0, p);

    std::vector<double> errors;
    for (double edge : {0.08, 0.04, 0.02}) {
        Mesh mesh = generate_disk_mesh(1.0, edge, e);
        std::vector<double> sigma(mesh.tri_count(), 1.0);
        double u = measure(solve_pem(mesh, sigma, e, p.drive()), p.l_plus, p.l_minus);
        errors.push_back(std::abs(u - u_exact));
    }
    CHECK(errors[1] < errors[0]);
    CHECK(errors[2] < errors[1]);
    CHECK(errors[2] < 1e-3 * std::abs(u_exact));
}

TEST_CASE("swapping the drive pair negates the field exactly") {
    DiskSetup s = make_disk(8, 0.05, MeshOptions{0.1, 0.05, 0.4});
    std::vector<double> sigma(s.mesh.tri_count(), 2.0);

    CemSolver cem(s.mesh, sigma, s.electrodes);
    PotentialField a = cem.solve({2, 6});
    PotentialField b = cem.solve({6, 2});
    REQUIRE(a.nodal.size() == b.nodal.size());
    for (std::size_t i = 0; i < a.nodal.size(); ++i) CHECK(a.nodal[i] == -b.nodal[i]);
    for (std::size_t i = 0; i < a.electrode.size(); ++i) CHECK(a.electrode[i] == -b.electrode[i]);

    PemSolver pem(s.mesh, sigma, s.electrodes);
    PotentialField c = pem.solve({2, 6});
    PotentialField d = pem.solve({6, 2});
    for (std::size_t i = 0; i < c.nodal.size(); ++i) CHECK(c.nodal[i] == -d.nodal[i]);
}

TEST_CASE("point model: scaling sigma by 2 halves the potential bitwise") {
    DiskSetup s = make_disk(8, 0.05, MeshOptions{0.1, 0.05, 0.4});
    std::vector<double> sigma1(s.mesh.tri_count(), 1.0);
    std::vector<double> sigma2(s.mesh.tri_count(), 2.0);
    PotentialField u1 = solve_pem(s.mesh, sigma1, s.electrodes, {1, 5});
    PotentialField u2 = solve_pem(s.mesh, sigma2, s.electrodes, {1, 5});
    REQUIRE(u1.nodal.size() == u2.nodal.size());
    for (std::size_t i = 0; i < u1.nodal.size(); ++i) CHECK(u2.nodal[i] == 0.5 * u1.nodal[i]);
}

TEST_CASE("doubling the drive current doubles the solution bitwise") {
    DiskSetup s = make_disk(8, 0.05, MeshOptions{0.1, 0.05, 0.4});
    std::vector<double> sigma(s.mesh.tri_count(), 1.5);
    ElectrodeConfig e2 = s.electrodes;
    e2.current = 2.0;

    PotentialField a = solve_cem(s.mesh, sigma, s.electrodes, {1, 5});
    PotentialField b = solve_cem(s.mesh, sigma, e2, {1, 5});
    for (std::size_t i = 0; i < a.nodal.size(); ++i) CHECK(b.nodal[i] == 2.0 * a.nodal[i]);
    for (std::size_t i = 0; i < a.electrode.size(); ++i)
        CHECK(b.electrode[i] == 2.0 * a.electrode[i]);
}

TEST_CASE("reciprocity: swapping drive and measure pairs agrees to 1e-8") {
    DiskSetup s = make_disk(16, 0.03, MeshOptions{0.07, 0.03, 0.4});
    std::vector<double> sigma(s.mesh.tri_count(), 1.0);
    // Mildly inhomogeneous conductivity keeps the check non-trivial.
    auto centroids = triangle_centroids(s.mesh);
    for (std::size_t t = 0; t < sigma.size(); ++t)
        sigma[t] = 1.0 + 0.5 * (centroids[t].x > 0 ? 1.0 : 0.0);

    CemSolver cem(s.mesh, sigma, s.electrodes);
    double u_forward = measure(cem.solve({1, 9}), 5, 12);
    double u_reverse = measure(cem.solve({5, 12}), 1, 9);
    CHECK(std::abs(u_forward - u_reverse) < 1e-8 * std::abs(u_forward));

    PemSolver pem(s.mesh, sigma, s.electrodes);
    double v_forward = measure(pem.solve({1, 9}), 5, 12);
    double v_reverse = measure(pem.solve({5, 12}), 1, 9);
    CHECK(std::abs(v_forward - v_reverse) < 1e-8 * std::abs(v_forward));
}

TEST_CASE("energy identity: I*U equals the conductive bilinear form within 0.5%") {
    DiskSetup s = make_disk(16, 0.03, MeshOptions{0.06, 0.03, 0.4});
    std::vector<double> sigma(s.mesh.tri_count(), 2.0);
    TriGeometry geom = triangle_geometry(s.mesh);

    PemSolver pem(s.mesh, sigma, s.electrodes);
    PotentialField pk = pem.solve({1, 9});
    PotentialField pl = pem.solve({5, 12});
    double u_pem = measure(pk, 5, 12);
    double energy_pem = dirichlet_energy(s.mesh, geom, sigma, pk.nodal, pl.nodal);
    CHECK(std::abs(1.0 * u_pem - energy_pem) < 0.005 * std::abs(u_pem));

    CemSolver cem(s.mesh, sigma, s.electrodes);
    PotentialField ck = cem.solve({1, 9});
    PotentialField cl = cem.solve({5, 12});
    double u_cem = measure(ck, 5, 12);
    double energy_cem = dirichlet_energy(s.mesh, geom, sigma, ck.nodal, cl.nodal);
    CHECK(std::abs(1.0 * u_cem - energy_cem) < 0.005 * std::abs(u_cem));
}

TEST_CASE("measure: trivial pair gives exact zero, drive overlap is a pattern error") {
    DiskSetup s = make_disk(8, 0.05, MeshOptions{0.1, 0.05, 0.4});
    std::vector<double> sigma(s.mesh.tri_count(), 1.0);
    PotentialField field = solve_cem(s.mesh, sigma, s.electrodes, {1, 5});

    CHECK(measure(field, 3, 3) == 0.0);
    CHECK_THROWS_AS(measure(field, 1, 3), Error);  // l+ is a drive electrode
    CHECK_THROWS_AS(measure(field, 3, 5), Error);  // l- is a drive electrode
    CHECK_THROWS_AS(measure(field, 0, 3), Error);  // label out of range
    CHECK_THROWS_AS(measure(field, 3, 9), Error);
    try {
        measure(field, 1, 3);
    } catch (const Error& err) {
        CHECK(err.kind() == ErrorKind::Pattern);
    }
}

TEST_CASE("solvers reject invalid drive pairs") {
    DiskSetup s = make_disk(8, 0.05, MeshOptions{0.1, 0.05, 0.4});
    std::vector<double> sigma(s.mesh.tri_count(), 1.0);
    CemSolver cem(s.mesh, sigma, s.electrodes);
    CHECK_THROWS_AS(cem.solve({3, 3}), Error);
    CHECK_THROWS_AS(cem.solve({0, 3}), Error);
    CHECK_THROWS_AS(cem.solve({1, 9}), Error);
    PemSolver pem(s.mesh, sigma, s.electrodes);
    CHECK_THROWS_AS(pem.solve({3, 3}), Error);
    CHECK_THROWS_AS(pem.solve({1, 12}), Error);
}

TEST_CASE("solver construction rejects mismatched sigma") {
    DiskSetup s = make_disk(8, 0.05, MeshOptions{0.1, 0.05, 0.4});
    std::vector<double> wrong(s.mesh.tri_count() + 1, 1.0);
    CHECK_THROWS_AS(CemSolver(s.mesh, wrong, s.electrodes), Error);
    std::vector<double> negative(s.mesh.tri_count(), -1.0);
    CHECK_THROWS_AS(CemSolver(s.mesh, negative, s.electrodes), Error);
}

TEST_CASE("triangle geometry: basis gradients reproduce affine fields") {
    DiskSetup s = make_disk(8, 0.05, MeshOptions{0.1, 0.05, 0.4});
    TriGeometry geom = triangle_geometry(s.mesh);
    REQUIRE(geom.area.size() == s.mesh.tri_count());
    for (std::size_t t = 0; t < s.mesh.tri_count(); ++t) {
        CHECK(geom.area[t] == doctest::Approx(s.mesh.signed_area(t)).epsilon(1e-14));
        Vec2 sum = geom.grad[t][0] + geom.grad[t][1] + geom.grad[t][2];
        CHECK(std::abs(sum.x) < 1e-10);
        CHECK(std::abs(sum.y) < 1e-10);
    }
    std::vector<double> nodal(s.mesh.node_count());
    for (std::size_t i = 0; i < s.mesh.node_count(); ++i)
        nodal[i] = 3.0 * s.mesh.nodes[i].x - 2.0 * s.mesh.nodes[i].y + 0.5;
    auto grads = element_gradients(s.mesh, geom, nodal);
    for (const Vec2& g : grads) {
        CHECK(g.x == doctest::Approx(3.0).epsilon(1e-10));
        CHECK(g.y == doctest::Approx(-2.0).epsilon(1e-10));
    }
}

TEST_CASE("stiffness values: local rows sum to zero, scaling in sigma is exact") {
    DiskSetup s = make_disk(8, 0.05, MeshOptions{0.12, 0.06, 0.4});
    TriGeometry geom = triangle_geometry(s.mesh);
    std::vector<double> sigma(s.mesh.tri_count(), 1.0);
    auto values = stiffness_values(s.mesh, geom, sigma);
    REQUIRE(values.size() == 9 * s.mesh.tri_count());
    for (std::size_t t = 0; t < s.mesh.tri_count(); ++t) {
        for (int i = 0; i < 3; ++i) {
            double row = values[9 * t + 3 * i] + values[9 * t + 3 * i + 1] +
                         values[9 * t + 3 * i + 2];
            CHECK(std::abs(row) < 1e-12);
        }
    }
    std::vector<double> sigma2(s.mesh.tri_count(), 2.0);
    auto values2 = stiffness_values(s.mesh, geom, sigma2);
    for (std::size_t i = 0; i < values.size(); ++i) CHECK(values2[i] == 2.0 * values[i]);
}

TEST_CASE("boundary node weights integrate the boundary polyline") {
    DiskSetup s = make_disk(8, 0.05, MeshOptions{0.1, 0.05, 0.4});
    auto weights = boundary_node_weights(s.mesh);
    REQUIRE(weights.size() == s.mesh.node_count());
    double total = 0.0, polyline = 0.0;
    for (double w : weights) total += w;
    for (const auto& be : s.mesh.boundary_edges)
        polyline += (s.mesh.nodes[be[0]] - s.mesh.nodes[be[1]]).norm();
    CHECK(total == doctest::Approx(polyline).epsilon(1e-12));
    for (std::size_t i = s.mesh.boundary_node_count; i < weights.size(); ++i)
        CHECK(weights[i] == 0.0);
}

TEST_CASE("complete and point models agree better as electrodes shrink") {
    BoundaryShape c = BoundaryShape::circle(1.0);
    Pattern p{1, 5, 3, 7};
    std::vector<double> gaps;
    for (double half : {0.08, 0.04}) {
        ElectrodeConfig e = equispaced_electrodes(c, 8, half);
        Mesh mesh = generate_boundary_mesh(c, e, MeshOptions{0.06, half / 2, 0.4});
        std::vector<double> sigma(mesh.tri_count(), 1.0);
        double u_cem = measure(solve_cem(mesh, sigma, e, p.drive()), p.l_plus, p.l_minus);
        double u_pem = measure(solve_pem(mesh, sigma, e, p.drive()), p.l_plus, p.l_minus);
        gaps.push_back(std::abs(u_cem - u_pem));
    }
    CHECK(gaps[1] < 0.8 * gaps[0]);
}
