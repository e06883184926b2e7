#include "eit/forward.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

#include "eit/parallel.hpp"

namespace eit {

namespace {

void check_sigma(const Mesh& mesh, const std::vector<double>& sigma) {
    require(sigma.size() == mesh.tri_count(), ErrorKind::Config,
            "conductivity field size does not match the mesh");
    for (double s : sigma)
        require(s > 0 && std::isfinite(s), ErrorKind::Solver,
                "conductivity must be strictly positive and finite");
}

void check_drive(DrivePair d, int nl) {
    require(d.plus >= 1 && d.plus <= nl && d.minus >= 1 && d.minus <= nl, ErrorKind::Pattern,
            "drive electrode label out of range");
    require(d.plus != d.minus, ErrorKind::Pattern, "drive electrodes must differ");
}

void tri_geom_one(const Mesh& mesh, std::size_t t, double& area, std::array<Vec2, 3>& grad) {
    const auto& tr = mesh.triangles[t];
    const Vec2& a = mesh.nodes[tr[0]];
    const Vec2& b = mesh.nodes[tr[1]];
    const Vec2& c = mesh.nodes[tr[2]];
    double area2 = (b - a).cross(c - a);
    area = 0.5 * area2;
    // gradient of barycentric basis i from the opposite edge (p, q)
    constexpr int kOpposite[3][2] = {{1, 2}, {2, 0}, {0, 1}};
    for (int i = 0; i < 3; ++i) {
        Vec2 e = mesh.nodes[tr[kOpposite[i][1]]] - mesh.nodes[tr[kOpposite[i][0]]];
        grad[i] = {-e.y / area2, e.x / area2};
    }
}

}  // namespace

TriGeometry triangle_geometry_serial(const Mesh& mesh) {
    TriGeometry g;
    g.area.resize(mesh.tri_count());
    g.grad.resize(mesh.tri_count());
    for (std::size_t t = 0; t < mesh.tri_count(); ++t) tri_geom_one(mesh, t, g.area[t], g.grad[t]);
    return g;
}

TriGeometry triangle_geometry(const Mesh& mesh) {
    TriGeometry g;
    g.area.resize(mesh.tri_count());
    g.grad.resize(mesh.tri_count());
    const std::int64_t n = static_cast<std::int64_t>(mesh.tri_count());
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t t = 0; t < n; ++t) tri_geom_one(mesh, t, g.area[t], g.grad[t]);
    return g;
}

std::vector<double> stiffness_values_serial(const Mesh& mesh, const TriGeometry& geom,
                                            const std::vector<double>& sigma) {
    std::vector<double> out(9 * mesh.tri_count());
    for (std::size_t t = 0; t < mesh.tri_count(); ++t)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                out[9 * t + 3 * i + j] = sigma[t] * geom.area[t] * geom.grad[t][i].dot(geom.grad[t][j]);
    return out;
}

std::vector<double> stiffness_values(const Mesh& mesh, const TriGeometry& geom,
                                     const std::vector<double>& sigma) {
    std::vector<double> out(9 * mesh.tri_count());
    const std::int64_t n = static_cast<std::int64_t>(mesh.tri_count());
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t t = 0; t < n; ++t)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                out[9 * t + 3 * i + j] = sigma[t] * geom.area[t] * geom.grad[t][i].dot(geom.grad[t][j]);
    return out;
}

std::vector<Vec2> element_gradients_serial(const Mesh& mesh, const TriGeometry& geom,
                                           const std::vector<double>& nodal) {
    std::vector<Vec2> out(mesh.tri_count());
    for (std::size_t t = 0; t < mesh.tri_count(); ++t) {
        const auto& tr = mesh.triangles[t];
        out[t] = nodal[tr[0]] * geom.grad[t][0] + nodal[tr[1]] * geom.grad[t][1] +
                 nodal[tr[2]] * geom.grad[t][2];
    }
    return out;
}

std::vector<Vec2> element_gradients(const Mesh& mesh, const TriGeometry& geom,
                                    const std::vector<double>& nodal) {
    std::vector<Vec2> out(mesh.tri_count());
    const std::int64_t n = static_cast<std::int64_t>(mesh.tri_count());
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t t = 0; t < n; ++t) {
        const auto& tr = mesh.triangles[t];
        out[t] = nodal[tr[0]] * geom.grad[t][0] + nodal[tr[1]] * geom.grad[t][1] +
                 nodal[tr[2]] * geom.grad[t][2];
    }
    return out;
}

std::vector<double> boundary_node_weights(const Mesh& mesh) {
    std::vector<double> w(mesh.node_count(), 0.0);
    for (const auto& e : mesh.boundary_edges) {
        double le = (mesh.nodes[e[0]] - mesh.nodes[e[1]]).norm();
        w[e[0]] += 0.5 * le;
        w[e[1]] += 0.5 * le;
    }
    return w;
}

double dirichlet_energy(const Mesh& mesh, const TriGeometry& geom,
                        const std::vector<double>& sigma, const std::vector<double>& nodal_k,
                        const std::vector<double>& nodal_l) {
    std::vector<Vec2> gk = element_gradients(mesh, geom, nodal_k);
    std::vector<Vec2> gl = element_gradients(mesh, geom, nodal_l);
    double acc = 0.0;
    for (std::size_t t = 0; t < mesh.tri_count(); ++t)
        acc += sigma[t] * geom.area[t] * gk[t].dot(gl[t]);
    return acc;
}

double measure(const PotentialField& field, int l_plus, int l_minus) {
    const int nl = static_cast<int>(field.electrode.size());
    require(l_plus >= 1 && l_plus <= nl && l_minus >= 1 && l_minus <= nl, ErrorKind::Pattern,
            "measurement electrode label out of range");
    require(l_plus != field.drive.plus && l_plus != field.drive.minus &&
                l_minus != field.drive.plus && l_minus != field.drive.minus,
            ErrorKind::Pattern, "measurement on a drive electrode");
    return field.electrode[l_plus - 1] - field.electrode[l_minus - 1];
}

// ---------------------------------------------------------------------------
// Complete electrode model
// ---------------------------------------------------------------------------

CemSolver::CemSolver(const Mesh& mesh, std::vector<double> sigma,
                     const ElectrodeConfig& electrodes) {
    check_sigma(mesh, sigma);
    nn_ = static_cast<int>(mesh.node_count());
    nl_ = electrodes.count();
    current_ = electrodes.current;
    contact_impedance_ = electrodes.contact_impedance;
    require(static_cast<int>(mesh.electrode_edges.size()) == nl_, ErrorKind::Config,
            "mesh was generated for a different electrode layout");
    for (const auto& edges : mesh.electrode_edges)
        require(!edges.empty(), ErrorKind::Resolution, "electrode arc not resolved by the mesh");

    TriGeometry geom = triangle_geometry(mesh);
    std::vector<double> vals = stiffness_values(mesh, geom, sigma);

    const int pin = nn_ + nl_ - 1;  // last electrode dof fixed; any gauge cancels in differences
    const int dim = nn_ + nl_ - 1;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(9 * mesh.tri_count() + 8 * mesh.boundary_edges.size());
    for (std::size_t t = 0; t < mesh.tri_count(); ++t) {
        const auto& tr = mesh.triangles[t];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                trip.emplace_back(tr[i], tr[j], vals[9 * t + 3 * i + j]);
    }
    electrode_edge_nodes_.resize(nl_);
    electrode_edge_len_.resize(nl_);
    const double z = contact_impedance_;
    for (int l = 0; l < nl_; ++l) {
        const int pl = nn_ + l;
        double dl = 0.0;
        for (int e : mesh.electrode_edges[l]) {
            const int i = mesh.boundary_edges[e][0];
            const int j = mesh.boundary_edges[e][1];
            const double le = (mesh.nodes[i] - mesh.nodes[j]).norm();
            electrode_edge_nodes_[l].push_back({i, j});
            electrode_edge_len_[l].push_back(le);
            trip.emplace_back(i, i, le / (3 * z));
            trip.emplace_back(j, j, le / (3 * z));
            trip.emplace_back(i, j, le / (6 * z));
            trip.emplace_back(j, i, le / (6 * z));
            if (pl != pin) {
                trip.emplace_back(i, pl, -le / (2 * z));
                trip.emplace_back(j, pl, -le / (2 * z));
                trip.emplace_back(pl, i, -le / (2 * z));
                trip.emplace_back(pl, j, -le / (2 * z));
            }
            dl += le / z;
        }
        if (pl != pin) trip.emplace_back(pl, pl, dl);
    }
    Eigen::SparseMatrix<double> M(dim, dim);
    M.setFromTriplets(trip.begin(), trip.end());
    ldlt_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    ldlt_->compute(M);
    require(ldlt_->info() == Eigen::Success, ErrorKind::Solver,
            "complete-model system factorization failed (singular system)");
}

PotentialField CemSolver::solve(DrivePair drive) const {
    check_drive(drive, nl_);
    const int dim = nn_ + nl_ - 1;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
    const int ip = nn_ + (drive.plus - 1);
    const int im = nn_ + (drive.minus - 1);
    // the pinned electrode's row is dropped; the block system stays consistent
    // because the electrode equations sum to zero
    if (ip < dim) rhs[ip] = current_;
    if (im < dim) rhs[im] = -current_;
    Eigen::VectorXd x = ldlt_->solve(rhs);
    require(ldlt_->info() == Eigen::Success, ErrorKind::Solver, "complete-model solve failed");

    PotentialField f;
    f.kind = PotentialField::Kind::Cem;
    f.drive = drive;
    f.nodal.resize(nn_);
    f.electrode.resize(nl_);
    for (int i = 0; i < nn_; ++i) f.nodal[i] = x[i];
    for (int l = 0; l + 1 < nl_; ++l) f.electrode[l] = x[nn_ + l];
    f.electrode[nl_ - 1] = 0.0;
    double shift = 0.0;
    for (double p : f.electrode) shift += p;
    shift /= nl_;  // zero-sum-of-electrode-potentials gauge
    for (double& v : f.nodal) v -= shift;
    for (double& p : f.electrode) p -= shift;
    return f;
}

std::vector<double> CemSolver::electrode_currents(const PotentialField& field) const {
    require(field.kind == PotentialField::Kind::Cem, ErrorKind::Config,
            "electrode currents are defined for complete-model fields");
    std::vector<double> out(nl_, 0.0);
    const double z = contact_impedance_;
    for (int l = 0; l < nl_; ++l) {
        double acc = 0.0;
        for (std::size_t e = 0; e < electrode_edge_nodes_[l].size(); ++e) {
            const auto [i, j] = electrode_edge_nodes_[l][e];
            const double le = electrode_edge_len_[l][e];
            const double trace = 0.5 * (field.nodal[i] + field.nodal[j]);
            acc += le * (field.electrode[l] - trace) / z;
        }
        out[l] = acc;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Point electrode model
// ---------------------------------------------------------------------------

PemSolver::PemSolver(const Mesh& mesh, std::vector<double> sigma,
                     const ElectrodeConfig& electrodes) {
    check_sigma(mesh, sigma);
    nn_ = static_cast<int>(mesh.node_count());
    current_ = electrodes.current;
    center_node_ = mesh.electrode_center_node;
    require(static_cast<int>(center_node_.size()) == electrodes.count(), ErrorKind::Config,
            "mesh was generated for a different electrode layout");
    for (int c : center_node_)
        require(c >= 0 && c < mesh.boundary_node_count, ErrorKind::Config,
                "electrode centers must be boundary mesh nodes");
    require(mesh.center_node >= 0, ErrorKind::Config, "mesh lacks an interior ground node");
    pin_ = mesh.center_node;

    weight_ = boundary_node_weights(mesh);
    weight_sum_ = 0.0;
    for (double w : weight_) weight_sum_ += w;

    TriGeometry geom = triangle_geometry(mesh);
    std::vector<double> vals = stiffness_values(mesh, geom, sigma);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(9 * mesh.tri_count());
    auto reduced = [this](int i) { return i < pin_ ? i : i - 1; };
    for (std::size_t t = 0; t < mesh.tri_count(); ++t) {
        const auto& tr = mesh.triangles[t];
        for (int i = 0; i < 3; ++i) {
            if (tr[i] == pin_) continue;
            for (int j = 0; j < 3; ++j) {
                if (tr[j] == pin_) continue;
                trip.emplace_back(reduced(tr[i]), reduced(tr[j]), vals[9 * t + 3 * i + j]);
            }
        }
    }
    Eigen::SparseMatrix<double> A(nn_ - 1, nn_ - 1);
    A.setFromTriplets(trip.begin(), trip.end());
    ldlt_ = std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    ldlt_->compute(A);
    require(ldlt_->info() == Eigen::Success, ErrorKind::Solver,
            "point-model system factorization failed (singular system)");
}

PotentialField PemSolver::solve(DrivePair drive) const {
    check_drive(drive, electrode_count());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nn_ - 1);
    auto reduced = [this](int i) { return i < pin_ ? i : i - 1; };
    const int np = center_node_[drive.plus - 1];
    const int nm = center_node_[drive.minus - 1];
    require(np != pin_ && nm != pin_, ErrorKind::Internal, "drive node coincides with ground");
    rhs[reduced(np)] = current_;
    rhs[reduced(nm)] = -current_;
    Eigen::VectorXd x = ldlt_->solve(rhs);
    require(ldlt_->info() == Eigen::Success, ErrorKind::Solver, "point-model solve failed");

    PotentialField f;
    f.kind = PotentialField::Kind::Pem;
    f.drive = drive;
    f.nodal.resize(nn_);
    for (int i = 0; i < nn_; ++i) f.nodal[i] = (i == pin_) ? 0.0 : x[reduced(i)];
    // shift to the zero weighted boundary mean (discrete integral of u ds = 0)
    double shift = 0.0;
    for (int i = 0; i < nn_; ++i) shift += weight_[i] * f.nodal[i];
    shift /= weight_sum_;
    for (double& v : f.nodal) v -= shift;
    f.electrode.resize(center_node_.size());
    for (std::size_t l = 0; l < center_node_.size(); ++l) f.electrode[l] = f.nodal[center_node_[l]];
    return f;
}

PotentialField solve_cem(const Mesh& mesh, const std::vector<double>& sigma,
                         const ElectrodeConfig& electrodes, DrivePair drive) {
    return CemSolver(mesh, sigma, electrodes).solve(drive);
}

PotentialField solve_pem(const Mesh& mesh, const std::vector<double>& sigma,
                         const ElectrodeConfig& electrodes, DrivePair drive) {
    return PemSolver(mesh, sigma, electrodes).solve(drive);
}

}  // namespace eit
