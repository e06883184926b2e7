// Benchmarks the OpenMP kernels against their serial reference
// implementations and checks that both produce bitwise-identical results.

#include <omp.h>

#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "eit/data.hpp"
#include "eit/forward.hpp"
#include "eit/geometry.hpp"
#include "eit/parallel.hpp"
#include "eit/reconstruct.hpp"

namespace {

template <typename F>
double time_best_of(int reps, F&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        double t0 = omp_get_wtime();
        fn();
        best = std::min(best, omp_get_wtime() - t0);
    }
    return best;
}

bool bits_equal(const double* a, const double* b, std::size_t n) {
    return std::memcmp(a, b, n * sizeof(double)) == 0;
}

void report(const char* name, double serial_s, double parallel_s, bool identical) {
    std::printf("%-22s serial %8.3f ms   parallel %8.3f ms   speedup %5.2fx   %s\n", name,
                serial_s * 1e3, parallel_s * 1e3, serial_s / parallel_s,
                identical ? "bitwise-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    bool quick = false;
    for (int i = 1; i < argc; ++i)
        if (std::string(argv[i]) == "--quick") quick = true;

    const double edge = quick ? 0.02 : 0.008;
    eit::BoundaryShape disk = eit::BoundaryShape::circle(1.0);
    eit::ElectrodeConfig electrodes = eit::equispaced_electrodes(disk, 16, 0.02);
    eit::Mesh mesh = eit::generate_boundary_mesh(disk, electrodes, {edge, edge, 0.0});
    std::printf("mesh: %zu nodes, %zu triangles, %d threads\n", mesh.node_count(),
                mesh.tri_count(), eit::thread_count());

    const int reps = quick ? 2 : 5;
    std::vector<double> sigma(mesh.tri_count(), 1.0);
    for (std::size_t t = 0; t < sigma.size(); ++t) sigma[t] = 1.0 + 0.25 * ((t * 31) % 7);

    // triangle geometry
    eit::TriGeometry gs, gp;
    double ts = time_best_of(reps, [&] { gs = eit::triangle_geometry_serial(mesh); });
    double tp = time_best_of(reps, [&] { gp = eit::triangle_geometry(mesh); });
    bool ok = bits_equal(gs.area.data(), gp.area.data(), gs.area.size()) &&
              bits_equal(&gs.grad[0][0].x, &gp.grad[0][0].x, gs.grad.size() * 6);
    report("triangle_geometry", ts, tp, ok);

    // stiffness values
    std::vector<double> ss, sp;
    ts = time_best_of(reps, [&] { ss = eit::stiffness_values_serial(mesh, gs, sigma); });
    tp = time_best_of(reps, [&] { sp = eit::stiffness_values(mesh, gs, sigma); });
    report("stiffness_values", ts, tp, bits_equal(ss.data(), sp.data(), ss.size()));

    // element gradients of a smooth nodal field
    std::vector<double> nodal(mesh.node_count());
    for (std::size_t i = 0; i < nodal.size(); ++i)
        nodal[i] = mesh.nodes[i].x * mesh.nodes[i].x - mesh.nodes[i].y;
    std::vector<eit::Vec2> egs, egp;
    ts = time_best_of(reps, [&] { egs = eit::element_gradients_serial(mesh, gs, nodal); });
    tp = time_best_of(reps, [&] { egp = eit::element_gradients(mesh, gs, nodal); });
    report("element_gradients", ts, tp,
           bits_equal(&egs[0].x, &egp[0].x, egs.size() * 2));

    // distance to boundary for every centroid
    std::vector<eit::Vec2> cent = eit::triangle_centroids(mesh);
    std::vector<double> ds, dp;
    ts = time_best_of(reps, [&] { ds = eit::distance_to_boundary_serial(mesh, cent); });
    tp = time_best_of(reps, [&] { dp = eit::distance_to_boundary(mesh, cent); });
    report("distance_to_boundary", ts, tp, bits_equal(ds.data(), dp.data(), ds.size()));

    // sensitivity assembly on a frame (smaller mesh so the solves stay cheap)
    eit::ElectrodeConfig elec8 = eit::equispaced_electrodes(disk, 8, 0.02);
    eit::MeshOptions small{quick ? 0.06 : 0.03, quick ? 0.06 : 0.03, 0.0};
    eit::Mesh mesh_u = eit::generate_boundary_mesh(disk, elec8, small);
    eit::Mesh mesh_v = eit::generate_boundary_mesh(
        disk, elec8, {small.edge_len * 1.1, small.band_len * 1.1, 0.0});
    std::vector<double> sig_u(mesh_u.tri_count(), 2.0);
    eit::PatternSet patterns = eit::enumerate_patterns(4, 8);
    eit::MeasurementFrame frame =
        eit::simulate_frame(mesh_u, sig_u, mesh_v, elec8, patterns);
    std::vector<eit::PotentialField> fields;
    {
        std::vector<double> unit(mesh_v.tri_count(), 1.0);
        eit::PemSolver pem(mesh_v, unit, elec8);
        for (const eit::DrivePair& d : eit::required_field_pairs(patterns))
            fields.push_back(pem.solve(d));
    }
    eit::ReconDomain domain = eit::extract_recon_domain(mesh_v, 4);
    eit::SensitivitySystem sys_s, sys_p;
    ts = time_best_of(reps, [&] {
        sys_s = eit::assemble_sensitivity_serial(domain, mesh_v, fields, frame);
    });
    tp = time_best_of(
        reps, [&] { sys_p = eit::assemble_sensitivity(domain, mesh_v, fields, frame); });
    report("assemble_sensitivity", ts, tp,
           sys_s.S.rows() == sys_p.S.rows() &&
               bits_equal(sys_s.S.data(), sys_p.S.data(),
                          static_cast<std::size_t>(sys_s.S.size())));
    return 0;
}
