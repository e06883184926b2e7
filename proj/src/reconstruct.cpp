#include "eit/reconstruct.hpp"

#include <omp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <unordered_map>

#include "eit/parallel.hpp"

namespace eit {

namespace {

constexpr double kDegenerateV = 1e-14;

double positive_mod(double x, double m) {
    double r = std::fmod(x, m);
    return r < 0 ? r + m : r;
}

/// Cumulative arc position of each boundary node along the boundary polyline.
std::vector<double> boundary_arc_positions(const Mesh& mesh, double* total) {
    const int nb = mesh.boundary_node_count;
    std::vector<double> s(nb, 0.0);
    double acc = 0.0;
    for (int i = 0; i + 1 < nb; ++i) {
        acc += (mesh.nodes[i + 1] - mesh.nodes[i]).norm();
        s[i + 1] = acc;
    }
    acc += (mesh.nodes[0] - mesh.nodes[nb - 1]).norm();
    if (total) *total = acc;
    return s;
}

}  // namespace

ReconDomain extract_recon_domain(const Mesh& mesh, int n, double depth) {
    const int nl = static_cast<int>(mesh.electrode_center_node.size());
    require(nl >= 8, ErrorKind::Config, "reconstruction needs at least 8 electrodes");
    require(n >= 1 && n <= nl, ErrorKind::Config, "center electrode index out of range");
    require(mesh.boundary_node_count >= 3, ErrorKind::Geometry, "mesh has no boundary ring");

    double perimeter = 0.0;
    std::vector<double> s_node = boundary_arc_positions(mesh, &perimeter);
    const double pitch = perimeter / nl;
    if (depth <= 0) depth = 2.0 * pitch;
    const double inradius = distance_to_boundary(mesh, {Vec2{0.0, 0.0}})[0];
    require(depth < inradius, ErrorKind::Geometry,
            "reconstruction depth reaches past the domain inradius");

    // arc window: electrode n-3 minus one pitch, spanning the 8-electrode
    // neighborhood plus one pitch of margin on each side
    const int lead = ((n - 4) % nl + nl) % nl;  // electrode n-3, 0-based
    const double lo = s_node[mesh.electrode_center_node[lead]] - pitch;
    const double span = 9.0 * pitch;

    // boundary-node polar angles are ascending in ring order by construction
    const int nb = mesh.boundary_node_count;
    std::vector<double> theta(nb);
    for (int i = 0; i < nb; ++i)
        theta[i] = positive_mod(std::atan2(mesh.nodes[i].y, mesh.nodes[i].x), kTwoPi);
    auto arc_of_theta = [&](double th) {
        if (th < theta[0] || th >= theta[nb - 1]) {
            // wrap segment between the last and first ring nodes
            double span_th = theta[0] + kTwoPi - theta[nb - 1];
            double rel = positive_mod(th - theta[nb - 1], kTwoPi);
            double f = span_th > 0 ? rel / span_th : 0.0;
            return s_node[nb - 1] + f * (perimeter - s_node[nb - 1]);
        }
        auto it = std::upper_bound(theta.begin(), theta.end(), th);
        int hi = static_cast<int>(it - theta.begin());
        int lo_i = hi - 1;
        double dth = theta[hi] - theta[lo_i];
        double f = dth > 0 ? (th - theta[lo_i]) / dth : 0.0;
        return s_node[lo_i] + f * (s_node[hi] - s_node[lo_i]);
    };

    std::vector<Vec2> cent = triangle_centroids(mesh);
    std::vector<double> dist = distance_to_boundary(mesh, cent);
    std::vector<char> selected(mesh.tri_count(), 0);
    for (std::size_t t = 0; t < mesh.tri_count(); ++t) {
        if (dist[t] > depth) continue;
        double th = positive_mod(std::atan2(cent[t].y, cent[t].x), kTwoPi);
        double rel = positive_mod(arc_of_theta(th) - lo, perimeter);
        if (rel <= span) selected[t] = 1;
    }

    // keep the largest edge-connected component
    std::unordered_map<std::uint64_t, std::array<int, 2>> edge_tri;
    edge_tri.reserve(mesh.tri_count() * 2);
    auto edge_key = [](int a, int b) {
        if (a > b) std::swap(a, b);
        return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
    };
    std::vector<std::vector<int>> neighbors(mesh.tri_count());
    for (std::size_t t = 0; t < mesh.tri_count(); ++t) {
        if (!selected[t]) continue;
        const auto& tr = mesh.triangles[t];
        for (int e = 0; e < 3; ++e) {
            std::uint64_t key = edge_key(tr[e], tr[(e + 1) % 3]);
            auto [it, inserted] = edge_tri.try_emplace(key, std::array<int, 2>{static_cast<int>(t), -1});
            if (!inserted && it->second[1] < 0 && it->second[0] != static_cast<int>(t)) {
                it->second[1] = static_cast<int>(t);
                neighbors[it->second[0]].push_back(static_cast<int>(t));
                neighbors[t].push_back(it->second[0]);
            }
        }
    }
    std::vector<int> component(mesh.tri_count(), -1);
    int best_comp = -1;
    std::size_t best_size = 0;
    int n_comp = 0;
    for (std::size_t t = 0; t < mesh.tri_count(); ++t) {
        if (!selected[t] || component[t] >= 0) continue;
        std::size_t size = 0;
        std::queue<int> q;
        q.push(static_cast<int>(t));
        component[t] = n_comp;
        while (!q.empty()) {
            int cur = q.front();
            q.pop();
            ++size;
            for (int nb_t : neighbors[cur]) {
                if (component[nb_t] < 0) {
                    component[nb_t] = n_comp;
                    q.push(nb_t);
                }
            }
        }
        if (size > best_size) {
            best_size = size;
            best_comp = n_comp;
        }
        ++n_comp;
    }
    ReconDomain domain;
    domain.n = n;
    domain.depth = depth;
    for (std::size_t t = 0; t < mesh.tri_count(); ++t)
        if (selected[t] && component[t] == best_comp) domain.elements.push_back(static_cast<int>(t));
    require(!domain.elements.empty(), ErrorKind::Geometry,
            "reconstruction domain selection is empty");
    domain.mesh_id = mesh_content_id(mesh);
    return domain;
}

std::vector<DrivePair> required_field_pairs(const PatternSet& patterns) {
    // swapped orientations share one field (with a sign flip), so dedupe on
    // the unordered electrode pair and keep the first orientation seen
    std::set<std::pair<int, int>> seen;
    std::vector<DrivePair> out;
    auto add = [&](int a, int b) {
        auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
        if (seen.insert(key).second) out.push_back({a, b});
    };
    std::vector<Pattern> all = patterns.patterns;
    all.push_back(patterns.reference);
    for (const Pattern& p : all) {
        if (!pattern_is_physical(p)) continue;
        add(p.k_plus, p.k_minus);
        add(p.l_plus, p.l_minus);
    }
    return out;
}

namespace {

struct FieldLookup {
    const std::vector<PotentialField>* fields;
    std::map<std::pair<int, int>, int> index;

    explicit FieldLookup(const std::vector<PotentialField>& f) : fields(&f) {
        for (std::size_t i = 0; i < f.size(); ++i)
            index.emplace(std::make_pair(f[i].drive.plus, f[i].drive.minus),
                          static_cast<int>(i));
    }

    /// Field index and orientation sign for the requested pair.
    std::pair<int, double> get(int plus, int minus) const {
        auto it = index.find({plus, minus});
        if (it != index.end()) return {it->second, 1.0};
        it = index.find({minus, plus});
        if (it != index.end()) return {it->second, -1.0};
        fail(ErrorKind::DataMismatch, "missing unit-admittivity field for drive pair (" +
                                          std::to_string(plus) + "," + std::to_string(minus) + ")");
    }
};

struct AssemblyPlan {
    std::vector<int> rows;           ///< record indices forming rows
    std::vector<int> field_k;        ///< field index of the drive pair
    std::vector<int> field_l;        ///< field index of the measure pair
    std::vector<double> sign;        ///< combined orientation sign
    std::vector<double> inv_v;       ///< 1/V per row
    int ref_k = -1, ref_l = -1;
    double ref_sign = 1.0;
    double ref_inv_v = 0.0;
    int dropped = 0;
};

AssemblyPlan plan_assembly(const FieldLookup& lookup, const MeasurementFrame& frame) {
    const FrameRecord& ref = frame.reference();
    require(ref.valid, ErrorKind::Degenerate, "frame reference record is invalid");
    AssemblyPlan plan;
    auto [rk, rks] = lookup.get(ref.pattern.k_plus, ref.pattern.k_minus);
    auto [rl, rls] = lookup.get(ref.pattern.l_plus, ref.pattern.l_minus);
    plan.ref_k = rk;
    plan.ref_l = rl;
    plan.ref_sign = rks * rls;
    plan.ref_inv_v = 1.0 / ref.V;
    for (std::size_t i = 0; i < frame.records.size(); ++i) {
        const FrameRecord& rec = frame.records[i];
        if (rec.is_reference || !rec.valid) continue;
        if (std::abs(rec.V) < kDegenerateV) {
            ++plan.dropped;
            continue;
        }
        auto [fk, sk] = lookup.get(rec.pattern.k_plus, rec.pattern.k_minus);
        auto [fl, sl] = lookup.get(rec.pattern.l_plus, rec.pattern.l_minus);
        plan.rows.push_back(static_cast<int>(i));
        plan.field_k.push_back(fk);
        plan.field_l.push_back(fl);
        plan.sign.push_back(sk * sl);
        plan.inv_v.push_back(1.0 / rec.V);
    }
    return plan;
}

/// Gradients of one nodal field on the domain elements only.
std::vector<Vec2> domain_gradients(const Mesh& mesh, const TriGeometry& geom,
                                   const std::vector<double>& nodal,
                                   const std::vector<int>& elements) {
    std::vector<Vec2> out(elements.size());
    const std::int64_t n = static_cast<std::int64_t>(elements.size());
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t m = 0; m < n; ++m) {
        int t = elements[m];
        const auto& tr = mesh.triangles[t];
        out[m] = nodal[tr[0]] * geom.grad[t][0] + nodal[tr[1]] * geom.grad[t][1] +
                 nodal[tr[2]] * geom.grad[t][2];
    }
    return out;
}

SensitivitySystem assemble_impl(const ReconDomain& domain, const Mesh& mesh,
                                const std::vector<PotentialField>& v_fields,
                                const MeasurementFrame& frame, bool parallel_rows) {
    require(domain.mesh_id == mesh_content_id(mesh), ErrorKind::DataMismatch,
            "reconstruction domain belongs to a different mesh");
    for (const PotentialField& f : v_fields)
        require(f.nodal.size() == mesh.node_count(), ErrorKind::DataMismatch,
                "unit-admittivity field does not match the mesh");
    FieldLookup lookup(v_fields);
    AssemblyPlan plan = plan_assembly(lookup, frame);
    require(!domain.elements.empty(), ErrorKind::Geometry, "empty reconstruction domain");

    // consistency guard: the frame's V values must come from these fields
    {
        const FrameRecord& ref = frame.reference();
        auto [rk, rks] = lookup.get(ref.pattern.k_plus, ref.pattern.k_minus);
        double v_check =
            rks * measure(v_fields[rk], ref.pattern.l_plus, ref.pattern.l_minus);
        require(std::abs(v_check - ref.V) <= 1e-9 * std::max(1.0, std::abs(ref.V)),
                ErrorKind::DataMismatch,
                "frame reference voltage does not match the supplied fields");
    }

    const std::size_t nt = domain.elements.size();
    const std::size_t nrows = plan.rows.size();
    TriGeometry geom = triangle_geometry(mesh);

    // domain gradients for every distinct field used
    std::vector<int> used_fields;
    {
        std::vector<char> mark(v_fields.size(), 0);
        auto touch = [&](int f) {
            if (!mark[f]) {
                mark[f] = 1;
                used_fields.push_back(f);
            }
        };
        touch(plan.ref_k);
        touch(plan.ref_l);
        for (std::size_t r = 0; r < nrows; ++r) {
            touch(plan.field_k[r]);
            touch(plan.field_l[r]);
        }
    }
    std::vector<std::vector<Vec2>> grads(v_fields.size());
    for (int f : used_fields)
        grads[f] = domain_gradients(mesh, geom, v_fields[f].nodal, domain.elements);

    SensitivitySystem sys;
    sys.domain = domain;
    sys.dropped_degenerate = plan.dropped;
    sys.gamma0 = estimate_gamma0(frame);
    sys.current = frame.provenance.current > 0 ? frame.provenance.current : 1.0;
    sys.S.resize(nrows, nt);
    sys.b.resize(nrows);
    sys.row_patterns.resize(nrows);

    const std::vector<Vec2>& gr1 = grads[plan.ref_k];
    const std::vector<Vec2>& gr2 = grads[plan.ref_l];
    auto fill_row = [&](std::size_t r) {
        const std::vector<Vec2>& gk = grads[plan.field_k[r]];
        const std::vector<Vec2>& gl = grads[plan.field_l[r]];
        const double scale = plan.sign[r] * plan.inv_v[r];
        const double ref_scale = plan.ref_sign * plan.ref_inv_v;
        for (std::size_t m = 0; m < nt; ++m) {
            double area = geom.area[domain.elements[m]];
            sys.S(r, m) = area * (scale * gk[m].dot(gl[m]) - ref_scale * gr1[m].dot(gr2[m]));
        }
        const FrameRecord& rec = frame.records[plan.rows[r]];
        sys.b(r) = rec.B;
        sys.row_patterns[r] = rec.pattern;
    };
    if (parallel_rows) {
        const std::int64_t nr = static_cast<std::int64_t>(nrows);
#pragma omp parallel for schedule(static) num_threads(thread_count())
        for (std::int64_t r = 0; r < nr; ++r) fill_row(static_cast<std::size_t>(r));
    } else {
        for (std::size_t r = 0; r < nrows; ++r) fill_row(r);
    }
    sys.alpha = nt > 0 ? 1e-2 * sys.S.squaredNorm() / static_cast<double>(nt) : 0.0;
    return sys;
}

}  // namespace

SensitivitySystem assemble_sensitivity(const ReconDomain& domain, const Mesh& mesh,
                                       const std::vector<PotentialField>& v_fields,
                                       const MeasurementFrame& frame) {
    return assemble_impl(domain, mesh, v_fields, frame, true);
}

SensitivitySystem assemble_sensitivity_serial(const ReconDomain& domain, const Mesh& mesh,
                                              const std::vector<PotentialField>& v_fields,
                                              const MeasurementFrame& frame) {
    return assemble_impl(domain, mesh, v_fields, frame, false);
}

double estimate_gamma0(const MeasurementFrame& frame) {
    const FrameRecord& ref = frame.reference();
    require(ref.valid && std::isfinite(ref.G), ErrorKind::Degenerate,
            "background estimation needs a valid reference record");
    return ref.G;
}

namespace {

ReconImage image_from_kappa(const SensitivitySystem& sys, const Eigen::VectorXd& kappa,
                            double alpha) {
    ReconImage img;
    img.n = sys.domain.n;
    img.elements = sys.domain.elements;
    img.mesh_id = sys.domain.mesh_id;
    img.gamma0 = sys.gamma0;
    img.alpha = alpha;
    img.kappa.resize(kappa.size());
    img.gamma.resize(kappa.size());
    const double g0 = sys.gamma0;
    const double cur = sys.current;
    for (Eigen::Index m = 0; m < kappa.size(); ++m) {
        img.kappa[m] = kappa[m];
        img.gamma[m] = g0 - cur * g0 * g0 * kappa[m];
        require(std::isfinite(img.gamma[m]), ErrorKind::Solver,
                "non-finite reconstructed admittivity");
    }
    return img;
}

}  // namespace

ReconImage solve_tikhonov(const SensitivitySystem& system, double alpha) {
    require(alpha > 0 && std::isfinite(alpha), ErrorKind::Config,
            "regularization parameter must be positive and finite");
    const Eigen::Index rows = system.S.rows();
    const Eigen::Index nt = system.S.cols();
    require(rows >= 1, ErrorKind::Degenerate, "sensitivity system has no usable rows");
    require(nt >= 1, ErrorKind::Degenerate, "sensitivity system has no elements");

    const Eigen::VectorXd stb = system.S.transpose() * system.b;
    Eigen::VectorXd kappa = Eigen::VectorXd::Zero(nt);
    const double target = 1e-10 * stb.norm();
    if (stb.norm() == 0.0) return image_from_kappa(system, kappa, alpha);

    auto normal_residual = [&](const Eigen::VectorXd& k) {
        return (stb - system.S.transpose() * (system.S * k) - alpha * k).eval();
    };

    if (rows < nt) {
        // dual form: kappa = S^T (S S^T + alpha I)^{-1} b
        Eigen::MatrixXd M = system.S * system.S.transpose();
        M.diagonal().array() += alpha;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
        require(ldlt.info() == Eigen::Success, ErrorKind::Solver,
                "regularized normal system factorization failed");
        kappa = system.S.transpose() * ldlt.solve(system.b).eval();
        for (int it = 0; it < 4; ++it) {
            Eigen::VectorXd r = normal_residual(kappa);
            if (r.norm() <= target) break;
            // (S^T S + aI)^{-1} r == (r - S^T (S S^T + aI)^{-1} S r) / a
            Eigen::VectorXd sr = system.S * r;
            kappa += (r - system.S.transpose() * ldlt.solve(sr).eval()) / alpha;
        }
    } else {
        Eigen::MatrixXd A = system.S.transpose() * system.S;
        A.diagonal().array() += alpha;
        Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
        require(ldlt.info() == Eigen::Success, ErrorKind::Solver,
                "regularized normal system factorization failed");
        kappa = ldlt.solve(stb);
        for (int it = 0; it < 4; ++it) {
            Eigen::VectorXd r = normal_residual(kappa);
            if (r.norm() <= target) break;
            kappa += ldlt.solve(r).eval();
        }
    }
    require(normal_residual(kappa).norm() <= 10 * target + 1e-300, ErrorKind::Solver,
            "regularized solve did not reach the residual tolerance");
    return image_from_kappa(system, kappa, alpha);
}

ReconImage solve_tikhonov(const SensitivitySystem& system) {
    return solve_tikhonov(system, system.alpha);
}

double kappa_amplification_norm(const SensitivitySystem& system, double alpha) {
    require(alpha > 0 && std::isfinite(alpha), ErrorKind::Config,
            "regularization parameter must be positive and finite");
    const Eigen::Index rows = system.S.rows();
    const Eigen::Index nt = system.S.cols();
    require(rows >= 1 && nt >= 1, ErrorKind::Degenerate, "empty sensitivity system");
    Eigen::MatrixXd M = system.S * system.S.transpose();
    M.diagonal().array() += alpha;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    require(ldlt.info() == Eigen::Success, ErrorKind::Solver,
            "regularized normal system factorization failed");
    Eigen::MatrixXd minv = ldlt.solve(Eigen::MatrixXd::Identity(rows, rows));
    // push-through identity: (S^T S + aI)^{-1} S^T = S^T (S S^T + aI)^{-1};
    // max-abs-row-sum over the nt x rows product, computed in blocks
    double norm = 0.0;
    const Eigen::Index block = 4096;
    for (Eigen::Index m0 = 0; m0 < nt; m0 += block) {
        Eigen::Index mb = std::min(block, nt - m0);
        Eigen::MatrixXd t = system.S.middleCols(m0, mb).transpose() * minv;
        norm = std::max(norm, t.cwiseAbs().rowwise().sum().maxCoeff());
    }
    return norm;
}

MergedImage merge_images(const std::vector<ReconImage>& images, std::size_t tri_count) {
    require(!images.empty(), ErrorKind::Config, "no images to merge");
    for (const ReconImage& img : images) {
        require(img.mesh_id == images.front().mesh_id, ErrorKind::DataMismatch,
                "images reconstructed on different meshes cannot be merged");
        require(img.elements.size() == img.gamma.size(), ErrorKind::DataMismatch,
                "image element/value size mismatch");
    }
    MergedImage out;
    out.gamma.assign(tri_count, std::numeric_limits<double>::quiet_NaN());
    out.coverage.assign(tri_count, 0);
    std::vector<double> acc(tri_count, 0.0);
    for (const ReconImage& img : images) {
        for (std::size_t m = 0; m < img.elements.size(); ++m) {
            int t = img.elements[m];
            require(t >= 0 && static_cast<std::size_t>(t) < tri_count, ErrorKind::DataMismatch,
                    "image element id outside the parent mesh");
            acc[t] += img.gamma[m];
            out.coverage[t] += 1;
        }
    }
    for (std::size_t t = 0; t < tri_count; ++t)
        if (out.coverage[t] > 0) out.gamma[t] = acc[t] / out.coverage[t];
    return out;
}

std::vector<double> column_correlation(const SensitivitySystem& system, int i) {
    const Eigen::Index nt = system.S.cols();
    require(i >= 0 && i < nt, ErrorKind::Config, "column index out of range");
    std::vector<double> out(nt, std::numeric_limits<double>::quiet_NaN());
    Eigen::VectorXd norms(nt);
    for (Eigen::Index j = 0; j < nt; ++j) norms[j] = system.S.col(j).norm();
    if (norms[i] == 0) return out;  // zero column: excluded with nulls
    for (Eigen::Index j = 0; j < nt; ++j) {
        if (norms[j] == 0) continue;
        if (j == i) {
            out[j] = 1.0;  // self-correlation is 1 by definition
            continue;
        }
        double c = system.S.col(i).dot(system.S.col(j)) / (norms[i] * norms[j]);
        out[j] = std::clamp(c, -1.0, 1.0);
    }
    return out;
}

DecayDiagnostic decay_diagnostic(const PotentialField& v_k, const PotentialField& v_l,
                                 const Mesh& mesh, const ElectrodeConfig& electrodes) {
    require(v_k.nodal.size() == mesh.node_count() && v_l.nodal.size() == mesh.node_count(),
            ErrorKind::DataMismatch, "fields do not match the mesh");
    const double current = electrodes.current;
    TriGeometry geom = triangle_geometry(mesh);
    std::vector<Vec2> gk = element_gradients(mesh, geom, v_k.nodal);
    std::vector<Vec2> gl = element_gradients(mesh, geom, v_l.nodal);

    std::vector<Vec2> poles;
    for (int lab : {v_k.drive.plus, v_k.drive.minus, v_l.drive.plus, v_l.drive.minus}) {
        require(lab >= 1 && lab <= static_cast<int>(mesh.electrode_center_node.size()),
                ErrorKind::Pattern, "drive label out of range");
        poles.push_back(mesh.nodes[mesh.electrode_center_node[lab - 1]]);
    }
    std::vector<Vec2> cent = triangle_centroids(mesh);

    DecayDiagnostic diag;
    diag.weight.resize(mesh.tri_count());
    diag.element_dist.resize(mesh.tri_count());
    double max_w = -1.0;
    double max_dist = 0.0;
    for (std::size_t t = 0; t < mesh.tri_count(); ++t) {
        diag.weight[t] = gk[t].dot(gl[t]) / (current * current);
        double d = std::numeric_limits<double>::max();
        for (const Vec2& p : poles) d = std::min(d, (cent[t] - p).norm());
        diag.element_dist[t] = d;
        max_dist = std::max(max_dist, d);
        if (std::abs(diag.weight[t]) > max_w) {
            max_w = std::abs(diag.weight[t]);
            diag.argmax_element = static_cast<int>(t);
        }
    }

    // geometric shells starting at twice the electrode half-width; shells are
    // widened until they hold at least 5 elements
    const double start = 2.0 * electrodes.half_width;
    constexpr double kGrowth = 1.35;
    constexpr int kMinPerShell = 5;
    std::vector<std::size_t> order;
    for (std::size_t t = 0; t < mesh.tri_count(); ++t)
        if (diag.element_dist[t] >= start) order.push_back(t);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return diag.element_dist[a] < diag.element_dist[b];
    });
    double lo = start;
    std::size_t idx = 0;
    std::vector<std::size_t> shell_n;
    while (idx < order.size()) {
        double hi = lo * kGrowth;
        std::size_t begin = idx;
        double acc = 0.0;
        while (idx < order.size() && diag.element_dist[order[idx]] < hi) {
            acc += std::abs(diag.weight[order[idx]]);
            ++idx;
        }
        // widen a sparse shell until it holds enough elements
        while (idx < order.size() && idx - begin < kMinPerShell) {
            hi = std::nextafter(diag.element_dist[order[idx]],
                                std::numeric_limits<double>::max());
            acc += std::abs(diag.weight[order[idx]]);
            ++idx;
        }
        std::size_t count = idx - begin;
        if (count == 0) {
            lo = hi;
            continue;
        }
        if (count < kMinPerShell && !diag.shell_mean.empty()) {
            // fold a sparse trailing shell into the previous one
            double prev_n = static_cast<double>(shell_n.back());
            diag.shell_mean.back() =
                (diag.shell_mean.back() * prev_n + acc) / (prev_n + count);
            diag.shell_hi.back() = hi;
            shell_n.back() += count;
        } else {
            diag.shell_lo.push_back(lo);
            diag.shell_hi.push_back(hi);
            diag.shell_mean.push_back(acc / count);
            shell_n.push_back(count);
        }
        lo = hi;
    }
    return diag;
}

InterfaceScore score_interface_depth(const Mesh& mesh, const std::vector<double>& merged_gamma,
                                     const std::vector<int>& coverage, double fat_depth,
                                     int sectors, double max_err_layers) {
    require(merged_gamma.size() == mesh.tri_count() && coverage.size() == mesh.tri_count(),
            ErrorKind::DataMismatch, "merged image does not match the mesh");
    require(sectors > 0, ErrorKind::Config, "sector count must be positive");
    std::vector<Vec2> cent = triangle_centroids(mesh);
    std::vector<double> dist = distance_to_boundary(mesh, cent);
    std::vector<double> theta(mesh.tri_count());
    for (std::size_t t = 0; t < mesh.tri_count(); ++t)
        theta[t] = positive_mod(std::atan2(cent[t].y, cent[t].x), kTwoPi);

    InterfaceScore score;
    for (int s = 0; s < sectors; ++s) {
        double lo = kTwoPi * s / sectors;
        double hi = kTwoPi * (s + 1) / sectors;
        std::vector<std::size_t> sel;
        for (std::size_t t = 0; t < mesh.tri_count(); ++t)
            if (theta[t] >= lo && theta[t] < hi && coverage[t] > 0 &&
                std::isfinite(merged_gamma[t]))
                sel.push_back(t);
        if (sel.size() < 4) continue;
        std::map<int, std::pair<double, double>> ring_acc;  // ring -> (sum d, sum g)
        std::map<int, int> ring_cnt;
        for (std::size_t t : sel) {
            int r = mesh.ring_of_tri[t];
            ring_acc[r].first += dist[t];
            ring_acc[r].second += merged_gamma[t];
            ring_cnt[r] += 1;
        }
        std::vector<std::pair<double, double>> prof;  // (depth, gamma), sorted by depth
        for (const auto& [r, acc] : ring_acc) {
            int c = ring_cnt[r];
            prof.push_back({acc.first / c, acc.second / c});
        }
        std::sort(prof.begin(), prof.end());
        const int np = static_cast<int>(prof.size());
        if (np < 4) continue;
        ++score.sectors_scored;

        int n_deep = std::max(2, np / 4);
        double deep = 0.0;
        for (int i = np - n_deep; i < np; ++i) deep += prof[i].second;
        deep /= n_deep;
        int n_shallow = std::max(2, np / 2);
        int imin = 0;
        for (int i = 1; i < n_shallow; ++i)
            if (prof[i].second < prof[imin].second) imin = i;
        double tau = 0.5 * (prof[imin].second + deep);
        double dstar = std::numeric_limits<double>::quiet_NaN();
        for (int i = imin; i < np; ++i) {
            if (prof[i].second >= tau) {
                if (i == 0) {
                    dstar = prof[0].first;
                } else {
                    double f = (tau - prof[i - 1].second) /
                               (prof[i].second - prof[i - 1].second + 1e-300);
                    dstar = prof[i - 1].first + f * (prof[i].first - prof[i - 1].first);
                }
                break;
            }
        }
        if (!std::isfinite(dstar)) continue;
        std::vector<double> gaps;
        for (int i = 1; i < np; ++i) gaps.push_back(prof[i].first - prof[i - 1].first);
        std::sort(gaps.begin(), gaps.end());
        double layer = gaps.size() % 2 == 1
                           ? gaps[gaps.size() / 2]
                           : 0.5 * (gaps[gaps.size() / 2 - 1] + gaps[gaps.size() / 2]);
        double err = std::abs(dstar - fat_depth) / layer;
        score.errors_layers.push_back(err);
        if (err <= max_err_layers) ++score.sectors_ok;
    }
    return score;
}

}  // namespace eit
