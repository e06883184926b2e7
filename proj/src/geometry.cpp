#include "eit/geometry.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <set>

#include "eit/parallel.hpp"

namespace eit {

const char* region_tag_name(RegionTag tag) {
    switch (tag) {
        case RegionTag::Fat: return "fat";
        case RegionTag::Muscle: return "muscle";
        case RegionTag::Bone: return "bone";
        case RegionTag::Internal: return "internal";
        default: return "other";
    }
}

RegionTag region_tag_from_name(const std::string& name) {
    if (name == "fat") return RegionTag::Fat;
    if (name == "muscle") return RegionTag::Muscle;
    if (name == "bone") return RegionTag::Bone;
    if (name == "internal") return RegionTag::Internal;
    if (name == "other") return RegionTag::Other;
    fail(ErrorKind::Config, "unknown region tag: " + name);
}

namespace {

double positive_mod(double x, double m) {
    double r = std::fmod(x, m);
    return r < 0 ? r + m : r;
}

}  // namespace

// ---------------------------------------------------------------------------
// BoundaryShape
// ---------------------------------------------------------------------------

BoundaryShape BoundaryShape::circle(double radius) {
    require(radius > 0, ErrorKind::Geometry, "circle radius must be positive");
    BoundaryShape s;
    s.kind_ = Kind::Circle;
    s.radius_ = radius;
    s.build_table();
    return s;
}

BoundaryShape BoundaryShape::ellipse(double a, double b) {
    require(a > 0 && b > 0, ErrorKind::Geometry, "ellipse semi-axes must be positive");
    BoundaryShape s;
    s.kind_ = Kind::Ellipse;
    s.a_ = a;
    s.b_ = b;
    s.build_table();
    return s;
}

BoundaryShape BoundaryShape::smooth(std::vector<double> control_radii) {
    require(control_radii.size() >= 3, ErrorKind::Geometry,
            "smooth boundary needs at least 3 control radii");
    for (double r : control_radii)
        require(r > 0, ErrorKind::Geometry, "control radii must be positive");
    BoundaryShape s;
    s.kind_ = Kind::Smooth;
    s.control_ = std::move(control_radii);
    s.build_table();
    return s;
}

BoundaryShape BoundaryShape::polygon(std::vector<Vec2> vertices) {
    require(vertices.size() >= 3, ErrorKind::Geometry, "polygon needs at least 3 vertices");
    double area2 = 0.0;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        const Vec2& a = vertices[i];
        const Vec2& b = vertices[(i + 1) % vertices.size()];
        area2 += a.cross(b);
    }
    require(area2 > 0, ErrorKind::Geometry, "polygon vertices must be counterclockwise");
    // star-shaped about the origin: vertex angles cyclically increasing
    std::vector<double> ang(vertices.size());
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        require(vertices[i].norm() > 0, ErrorKind::Geometry, "polygon vertex at the origin");
        ang[i] = positive_mod(std::atan2(vertices[i].y, vertices[i].x), kTwoPi);
    }
    int wraps = 0;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        if (ang[(i + 1) % vertices.size()] <= ang[i]) ++wraps;
    }
    require(wraps == 1, ErrorKind::Geometry,
            "polygon boundary must be star-shaped about the origin");
    BoundaryShape s;
    s.kind_ = Kind::Polygon;
    s.verts_ = std::move(vertices);
    s.build_table();
    return s;
}

double BoundaryShape::radius_at(double theta) const {
    theta = positive_mod(theta, kTwoPi);
    switch (kind_) {
        case Kind::Circle:
            return radius_;
        case Kind::Ellipse: {
            double c = std::cos(theta), s = std::sin(theta);
            return (a_ * b_) / std::sqrt(b_ * b_ * c * c + a_ * a_ * s * s);
        }
        case Kind::Smooth: {
            std::size_t n = control_.size();
            double dth = kTwoPi / static_cast<double>(n);
            double pos = theta / dth;
            std::size_t i = static_cast<std::size_t>(std::floor(pos)) % n;
            double t = pos - std::floor(pos);
            double rm1 = control_[(i + n - 1) % n];
            double r0 = control_[i];
            double r1 = control_[(i + 1) % n];
            double r2 = control_[(i + 2) % n];
            double m0 = 0.5 * (r1 - rm1);
            double m1 = 0.5 * (r2 - r0);
            double h00 = (1 + 2 * t) * (1 - t) * (1 - t);
            double h10 = t * (1 - t) * (1 - t);
            double h01 = t * t * (3 - 2 * t);
            double h11 = t * t * (t - 1);
            return h00 * r0 + h10 * m0 + h01 * r1 + h11 * m1;
        }
        case Kind::Polygon: {
            std::size_t n = verts_.size();
            Vec2 d{std::cos(theta), std::sin(theta)};
            for (std::size_t i = 0; i < n; ++i) {
                const Vec2& a = verts_[i];
                const Vec2& b = verts_[(i + 1) % n];
                Vec2 e = b - a;
                double den = d.cross(e);
                if (std::abs(den) < 1e-300) continue;
                double t = a.cross(e) / den;
                double u = (t * d - a).dot(e) / e.squared_norm();
                if (t > 0 && u >= -1e-12 && u <= 1.0 + 1e-12) return t;
            }
            fail(ErrorKind::Geometry, "polygon ray cast failed (not star-shaped?)");
        }
    }
    return radius_;
}

void BoundaryShape::build_table() {
    constexpr int kSamples = 1 << 15;
    theta_table_.resize(kSamples + 1);
    s_table_.resize(kSamples + 1);
    Vec2 prev;
    double acc = 0.0;
    for (int i = 0; i <= kSamples; ++i) {
        double th = kTwoPi * static_cast<double>(i) / kSamples;
        theta_table_[i] = th;
        double r = radius_at(th);
        Vec2 p{r * std::cos(th), r * std::sin(th)};
        if (i > 0) acc += (p - prev).norm();
        s_table_[i] = acc;
        prev = p;
    }
    perimeter_ = acc;
    // The chord sum carries an O(1/kSamples^2) defect; circles have an exact
    // arc-length parameterization, so use it.
    if (kind_ == Kind::Circle) perimeter_ = kTwoPi * radius_;
}

double BoundaryShape::theta_of_arclength(double s) const {
    if (kind_ == Kind::Circle) return positive_mod(s, perimeter_) / radius_;
    s = positive_mod(s, perimeter_);
    auto it = std::upper_bound(s_table_.begin(), s_table_.end(), s);
    std::size_t hi = std::min<std::size_t>(it - s_table_.begin(), s_table_.size() - 1);
    if (hi == 0) hi = 1;
    std::size_t lo = hi - 1;
    double span = s_table_[hi] - s_table_[lo];
    double f = span > 0 ? (s - s_table_[lo]) / span : 0.0;
    return theta_table_[lo] + f * (theta_table_[hi] - theta_table_[lo]);
}

double BoundaryShape::arclength_of_theta(double theta) const {
    theta = positive_mod(theta, kTwoPi);
    if (kind_ == Kind::Circle) return theta * radius_;
    auto it = std::upper_bound(theta_table_.begin(), theta_table_.end(), theta);
    std::size_t hi = std::min<std::size_t>(it - theta_table_.begin(), theta_table_.size() - 1);
    if (hi == 0) hi = 1;
    std::size_t lo = hi - 1;
    double span = theta_table_[hi] - theta_table_[lo];
    double f = span > 0 ? (theta - theta_table_[lo]) / span : 0.0;
    return s_table_[lo] + f * (s_table_[hi] - s_table_[lo]);
}

Vec2 BoundaryShape::point_at_theta(double theta) const {
    double r = radius_at(theta);
    return {r * std::cos(theta), r * std::sin(theta)};
}

Vec2 BoundaryShape::point_at_arclength(double s) const {
    return point_at_theta(theta_of_arclength(s));
}

double BoundaryShape::mean_radius() const {
    constexpr int kN = 512;
    double acc = 0.0;
    for (int i = 0; i < kN; ++i) acc += radius_at(kTwoPi * i / kN);
    return acc / kN;
}

// ---------------------------------------------------------------------------
// Electrodes
// ---------------------------------------------------------------------------

ElectrodeConfig equispaced_electrodes(const BoundaryShape& shape, int count, double half_width,
                                      double contact_impedance, double current, double s0) {
    ElectrodeConfig e;
    e.centers.resize(count);
    double L = shape.perimeter();
    for (int i = 0; i < count; ++i)
        e.centers[i] = positive_mod(s0 + L * static_cast<double>(i) / count, L);
    e.half_width = half_width;
    e.contact_impedance = contact_impedance;
    e.current = current;
    validate_electrodes(shape, e);
    return e;
}

void validate_electrodes(const BoundaryShape& shape, const ElectrodeConfig& e) {
    require(e.count() >= 8, ErrorKind::Config,
            "at least 8 electrodes are required (local pattern set)");
    require(e.half_width > 0, ErrorKind::Config, "electrode half-width must be positive");
    require(e.contact_impedance > 0, ErrorKind::Config, "contact impedance must be positive");
    require(e.current > 0, ErrorKind::Config, "drive current must be positive");
    double L = shape.perimeter();
    std::vector<double> c = e.centers;
    for (double& s : c) s = positive_mod(s, L);
    std::sort(c.begin(), c.end());
    for (int i = 0; i < e.count(); ++i) {
        double gap = (i + 1 < e.count()) ? c[i + 1] - c[i] : c[0] + L - c[i];
        require(gap > 2 * e.half_width, ErrorKind::Config, "electrode arcs overlap");
    }
}

// ---------------------------------------------------------------------------
// Ring mesher
// ---------------------------------------------------------------------------

namespace {

/// Graded positions strictly inside (s0, s1), walking from both ends.
/// Interior sample points of (s0, s1), uniformly spaced at the largest step
/// not exceeding min(size, lmax). Guarantees every resulting sub-interval
/// (including those against the endpoints) is <= the step budget.
std::vector<double> fill_graded(double s0, double s1, double size, double lmax) {
    std::vector<double> pts;
    const double len = s1 - s0;
    if (len <= 0) return pts;
    const double step = std::min(lmax, size);
    const int n = std::max(1, static_cast<int>(std::ceil(len / step - 1e-9)));
    pts.reserve(static_cast<std::size_t>(n - 1));
    for (int k = 1; k < n; ++k) pts.push_back(s0 + len * static_cast<double>(k) / n);
    return pts;
}

struct BoundarySample {
    double s;
    int electrode;  ///< original electrode index, -1 for gap nodes
    bool is_center;
};

}  // namespace

Mesh generate_boundary_mesh(const BoundaryShape& shape, const ElectrodeConfig& electrodes,
                            const MeshOptions& options) {
    validate_electrodes(shape, electrodes);
    require(options.edge_len > 0, ErrorKind::Resolution, "edge length must be positive");
    const double L = shape.perimeter();
    const double h = electrodes.half_width;
    const double lmax = options.edge_len;
    const double band = options.band_len > 0 ? options.band_len : options.edge_len;
    const double grade = options.grade;
    require(band <= lmax, ErrorKind::Resolution, "boundary band length exceeds edge length");

    auto size_depth = [&](double d) { return std::clamp(band + grade * d, band, lmax); };

    // --- boundary samples: electrode arcs, then gap fill ---
    const int ne = electrodes.count();
    std::vector<int> order(ne);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> centers = electrodes.centers;
    for (double& c : centers) c = positive_mod(c, L);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return centers[a] < centers[b]; });

    std::vector<BoundarySample> samples;
    double arc_l = std::min(band, h / 2.0);
    for (int oi = 0; oi < ne; ++oi) {
        int original = order[oi];
        double c = centers[original];
        int m = std::max(2, static_cast<int>(std::ceil(h / arc_l)));
        for (int i = -m; i <= m; ++i) {
            samples.push_back(
                {positive_mod(c + h * static_cast<double>(i) / m, L), original, i == 0});
        }
    }
    for (int oi = 0; oi < ne; ++oi) {
        double a = centers[order[oi]] + h;
        double b = centers[order[(oi + 1) % ne]] + (oi + 1 == ne ? L : 0.0) - h;
        require(b - a > 0, ErrorKind::Config, "electrode arcs overlap");
        for (double g : fill_graded(a, b, band, band))
            samples.push_back({positive_mod(g, L), -1, false});
    }
    std::stable_sort(samples.begin(), samples.end(),
                     [](const BoundarySample& a, const BoundarySample& b) { return a.s < b.s; });

    // rotate so the ring starts at the smallest polar angle (cyclic order is
    // unchanged; ring indices stay aligned with boundary edge ids)
    const std::size_t nb = samples.size();
    std::vector<double> btheta(nb);
    {
        std::size_t rot = 0;
        double best = std::numeric_limits<double>::max();
        for (std::size_t i = 0; i < nb; ++i) {
            Vec2 p = shape.point_at_arclength(samples[i].s);
            btheta[i] = positive_mod(std::atan2(p.y, p.x), kTwoPi);
            if (btheta[i] < best) {
                best = btheta[i];
                rot = i;
            }
        }
        std::rotate(samples.begin(), samples.begin() + rot, samples.end());
        std::rotate(btheta.begin(), btheta.begin() + rot, btheta.end());
    }

    Mesh mesh;
    mesh.nodes.reserve(nb * 4);
    for (std::size_t i = 0; i < nb; ++i) mesh.nodes.push_back(shape.point_at_arclength(samples[i].s));
    mesh.boundary_node_count = static_cast<int>(nb);

    mesh.electrode_center_node.assign(ne, -1);
    std::vector<std::set<int>> arc_nodes(ne);
    for (std::size_t i = 0; i < nb; ++i) {
        if (samples[i].electrode >= 0) {
            arc_nodes[samples[i].electrode].insert(static_cast<int>(i));
            if (samples[i].is_center)
                mesh.electrode_center_node[samples[i].electrode] = static_cast<int>(i);
        }
    }
    for (int l = 0; l < ne; ++l)
        require(mesh.electrode_center_node[l] >= 0, ErrorKind::Internal,
                "electrode center node missing");

    // --- concentric rings, thinned to stay isotropic ---
    const double rmean = shape.mean_radius();
    std::vector<std::vector<int>> rings;
    std::vector<std::vector<double>> ring_theta;
    {
        std::vector<int> first(nb);
        std::iota(first.begin(), first.end(), 0);
        rings.push_back(std::move(first));
        ring_theta.push_back(btheta);
    }
    double t = 1.0;
    double depth = 0.0;
    for (;;) {
        double step = size_depth(depth);
        double tn = t - step / rmean;
        if (tn * rmean < 0.7 * size_depth(depth + step)) break;
        depth += step;
        double target = size_depth(depth);
        const std::vector<double>& prev = ring_theta.back();
        std::vector<double> kept;
        bool have_last = false;
        Vec2 last_kept, first_pt;
        for (std::size_t j = 0; j < prev.size(); ++j) {
            Vec2 p = shape.point_at_theta(prev[j]);
            Vec2 pt = tn * p;
            if (!have_last) {
                kept.push_back(prev[j]);
                last_kept = pt;
                first_pt = pt;
                have_last = true;
                continue;
            }
            double want = 0.8 * target;
            if ((pt - last_kept).norm() >= want) {
                if (j == prev.size() - 1 && (pt - first_pt).norm() < 0.5 * want) continue;
                kept.push_back(prev[j]);
                last_kept = pt;
            }
        }
        if (kept.size() < 8) {
            kept.clear();
            for (int i = 0; i < 8; ++i) kept.push_back(kTwoPi * i / 8.0);
        }
        std::vector<int> ring;
        ring.reserve(kept.size());
        for (double th : kept) {
            ring.push_back(static_cast<int>(mesh.nodes.size()));
            mesh.nodes.push_back(tn * shape.point_at_theta(th));
        }
        rings.push_back(std::move(ring));
        ring_theta.push_back(std::move(kept));
        t = tn;
    }
    const int center_idx = static_cast<int>(mesh.nodes.size());
    mesh.nodes.push_back({0.0, 0.0});
    mesh.center_node = center_idx;

    // --- zipper triangulation between consecutive rings ---
    std::vector<std::array<int, 3>> tris;
    std::vector<int> tri_ring;
    auto zipper = [&](const std::vector<int>& outer, const std::vector<double>& outer_th,
                      const std::vector<int>& inner, const std::vector<double>& inner_th,
                      int ring_id) {
        const int p = static_cast<int>(outer.size());
        const int q = static_cast<int>(inner.size());
        const double start = outer_th[0];
        // inner start: node with the smallest angle relative to `start`
        int b0 = 0;
        {
            double best = std::numeric_limits<double>::max();
            for (int i = 0; i < q; ++i) {
                double a = positive_mod(inner_th[i] - start, kTwoPi);
                if (a < best) {
                    best = a;
                    b0 = i;
                }
            }
        }
        // unwrapped, nondecreasing angle sequences
        std::vector<double> oang(p + 1), iang(q + 1);
        for (int i = 0; i < p; ++i) oang[i] = positive_mod(outer_th[i] - start, kTwoPi);
        oang[0] = 0.0;
        for (int i = 1; i < p; ++i)
            while (oang[i] < oang[i - 1]) oang[i] += kTwoPi;
        oang[p] = kTwoPi;
        for (int i = 0; i < q; ++i) iang[i] = positive_mod(inner_th[(b0 + i) % q] - start, kTwoPi);
        for (int i = 1; i < q; ++i)
            while (iang[i] < iang[i - 1]) iang[i] += kTwoPi;
        iang[q] = iang[0] + kTwoPi;

        auto onode = [&](int i) { return outer[i % p]; };
        auto inode = [&](int i) { return inner[(b0 + i) % q]; };
        int a = 0, b = 0;
        while (a < p || b < q) {
            bool advance_outer = false;
            if (a < p && b < q)
                advance_outer = oang[a + 1] <= iang[b + 1];
            else if (a < p)
                advance_outer = true;
            if (advance_outer) {
                tris.push_back({onode(a), onode(a + 1), inode(b)});
                ++a;
            } else {
                tris.push_back({onode(a), inode(b + 1), inode(b)});
                ++b;
            }
            tri_ring.push_back(ring_id);
        }
    };
    for (std::size_t j = 0; j + 1 < rings.size(); ++j)
        zipper(rings[j], ring_theta[j], rings[j + 1], ring_theta[j + 1], static_cast<int>(j));
    {
        const std::vector<int>& last = rings.back();
        const int ql = static_cast<int>(last.size());
        for (int i = 0; i < ql; ++i) {
            tris.push_back({center_idx, last[i], last[(i + 1) % ql]});
            tri_ring.push_back(static_cast<int>(rings.size()) - 1);
        }
    }

    // orientation fix + degenerate drop
    mesh.triangles.reserve(tris.size());
    mesh.ring_of_tri.reserve(tris.size());
    for (std::size_t i = 0; i < tris.size(); ++i) {
        auto tr = tris[i];
        const Vec2& a = mesh.nodes[tr[0]];
        const Vec2& b = mesh.nodes[tr[1]];
        const Vec2& c = mesh.nodes[tr[2]];
        double area2 = (b - a).cross(c - a);
        if (area2 < 0) {
            std::swap(tr[1], tr[2]);
            area2 = -area2;
        }
        if (area2 <= 1e-14) continue;
        mesh.triangles.push_back(tr);
        mesh.ring_of_tri.push_back(tri_ring[i]);
    }
    mesh.region.assign(mesh.triangles.size(), RegionTag::Other);

    mesh.boundary_edges.reserve(nb);
    for (std::size_t i = 0; i < nb; ++i)
        mesh.boundary_edges.push_back(
            {static_cast<int>(i), static_cast<int>((i + 1) % nb)});

    mesh.electrode_edges.assign(ne, {});
    for (int l = 0; l < ne; ++l) {
        for (std::size_t e = 0; e < nb; ++e) {
            if (arc_nodes[l].count(mesh.boundary_edges[e][0]) &&
                arc_nodes[l].count(mesh.boundary_edges[e][1]))
                mesh.electrode_edges[l].push_back(static_cast<int>(e));
        }
        require(!mesh.electrode_edges[l].empty(), ErrorKind::Resolution,
                "electrode arc not resolved by boundary edges");
    }
    return mesh;
}

Mesh generate_disk_mesh(double radius, double target_edge_len, const ElectrodeConfig& electrodes) {
    require(radius > 0, ErrorKind::Geometry, "disk radius must be positive");
    require(target_edge_len > 0 && target_edge_len < radius / 4, ErrorKind::Resolution,
            "target edge length must be positive and below radius/4");
    require(electrodes.half_width >= target_edge_len, ErrorKind::Resolution,
            "electrode arcs unresolvable: half-width below target edge length");
    MeshOptions opt;
    opt.edge_len = target_edge_len;
    opt.band_len = target_edge_len;
    opt.grade = 0.0;
    return generate_boundary_mesh(BoundaryShape::circle(radius), electrodes, opt);
}

// ---------------------------------------------------------------------------
// Phantoms
// ---------------------------------------------------------------------------

std::map<RegionTag, double> default_conductivities() {
    return {
        {RegionTag::Fat, 1.0 / 15.0},
        {RegionTag::Muscle, 1.0 / 3.0},
        {RegionTag::Bone, 1.0 / 150.0},
        {RegionTag::Internal, 0.5 * (1.0 / 15.0 + 1.0 / 0.65)},
        {RegionTag::Other, 1.0},
    };
}

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly) {
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        if ((poly[i].y > p.y) != (poly[j].y > p.y)) {
            double xint =
                poly[j].x + (p.y - poly[j].y) / (poly[i].y - poly[j].y) * (poly[i].x - poly[j].x);
            if (p.x < xint) inside = !inside;
        }
    }
    return inside;
}

LayeredPhantom build_layered_phantom(const BoundaryShape& boundary,
                                     const ElectrodeConfig& electrodes, const MeshOptions& options,
                                     double fat_depth,
                                     const std::map<RegionTag, double>& conductivities,
                                     const std::vector<Inclusion>& inclusions) {
    double rmin = std::numeric_limits<double>::max();
    for (int i = 0; i < 720; ++i) rmin = std::min(rmin, boundary.radius_at(kTwoPi * i / 720.0));
    require(fat_depth >= 0, ErrorKind::Geometry, "fat depth must be nonnegative");
    require(fat_depth < rmin, ErrorKind::Geometry, "fat depth reaches past the boundary inradius");

    LayeredPhantom out;
    out.mesh = generate_boundary_mesh(boundary, electrodes, options);
    Mesh& mesh = out.mesh;
    std::vector<Vec2> cent = triangle_centroids(mesh);
    std::vector<double> dist = distance_to_boundary(mesh, cent);
    for (std::size_t t = 0; t < mesh.tri_count(); ++t) {
        if (dist[t] <= fat_depth) {
            mesh.region[t] = RegionTag::Fat;
        } else {
            mesh.region[t] = RegionTag::Muscle;
            for (const Inclusion& inc : inclusions) {
                if (point_in_polygon(cent[t], inc.polygon)) {
                    mesh.region[t] = inc.tag;
                    break;
                }
            }
        }
    }
    out.sigma.resize(mesh.tri_count());
    for (std::size_t t = 0; t < mesh.tri_count(); ++t) {
        auto it = conductivities.find(mesh.region[t]);
        require(it != conductivities.end(), ErrorKind::Config,
                std::string("no conductivity for region ") + region_tag_name(mesh.region[t]));
        require(it->second > 0 && std::isfinite(it->second), ErrorKind::Config,
                "conductivities must be positive and finite");
        out.sigma[t] = it->second;
    }
    return out;
}

std::array<int, 8> electrode_neighborhood(int n, int electrode_count) {
    require(electrode_count >= 8, ErrorKind::Config,
            "electrode neighborhood needs at least 8 electrodes");
    require(n >= 1 && n <= electrode_count, ErrorKind::Config, "electrode index out of range");
    std::array<int, 8> out{};
    for (int i = 0; i < 8; ++i) {
        int k = n - 3 + i;
        out[i] = ((k - 1) % electrode_count + electrode_count) % electrode_count + 1;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Distances / centroids / interpolation
// ---------------------------------------------------------------------------

namespace {

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
    Vec2 ab = b - a;
    double den = ab.squared_norm();
    double t = den > 0 ? std::clamp((p - a).dot(ab) / den, 0.0, 1.0) : 0.0;
    Vec2 proj = a + t * ab;
    return (p - proj).norm();
}

double min_distance_to_boundary(const Mesh& mesh, const Vec2& p) {
    double best = std::numeric_limits<double>::max();
    for (const auto& e : mesh.boundary_edges)
        best = std::min(best, point_segment_distance(p, mesh.nodes[e[0]], mesh.nodes[e[1]]));
    return best;
}

}  // namespace

std::vector<double> distance_to_boundary_serial(const Mesh& mesh,
                                                const std::vector<Vec2>& points) {
    std::vector<double> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) out[i] = min_distance_to_boundary(mesh, points[i]);
    return out;
}

std::vector<double> distance_to_boundary(const Mesh& mesh, const std::vector<Vec2>& points) {
    std::vector<double> out(points.size());
    const std::int64_t n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t i = 0; i < n; ++i) out[i] = min_distance_to_boundary(mesh, points[i]);
    return out;
}

std::vector<Vec2> triangle_centroids(const Mesh& mesh) {
    std::vector<Vec2> out(mesh.tri_count());
    for (std::size_t t = 0; t < mesh.tri_count(); ++t) {
        const auto& tr = mesh.triangles[t];
        Vec2 c = mesh.nodes[tr[0]] + mesh.nodes[tr[1]] + mesh.nodes[tr[2]];
        out[t] = (1.0 / 3.0) * c;
    }
    return out;
}

P1Interpolator::P1Interpolator(const Mesh& mesh) : mesh_(mesh) {
    centroids_ = triangle_centroids(mesh);
    double max_edge = 0.0;
    Vec2 lo{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()};
    Vec2 hi{-std::numeric_limits<double>::max(), -std::numeric_limits<double>::max()};
    for (const auto& tr : mesh.triangles) {
        for (int i = 0; i < 3; ++i) {
            const Vec2& a = mesh.nodes[tr[i]];
            const Vec2& b = mesh.nodes[tr[(i + 1) % 3]];
            max_edge = std::max(max_edge, (a - b).norm());
            lo.x = std::min(lo.x, a.x);
            lo.y = std::min(lo.y, a.y);
            hi.x = std::max(hi.x, a.x);
            hi.y = std::max(hi.y, a.y);
        }
    }
    cell_ = std::max(max_edge, 1e-12);
    lo_ = lo;
    nx_ = std::max(1, static_cast<int>(std::ceil((hi.x - lo.x) / cell_)) + 1);
    ny_ = std::max(1, static_cast<int>(std::ceil((hi.y - lo.y) / cell_)) + 1);
    grid_.assign(static_cast<std::size_t>(nx_) * ny_, {});
    for (std::size_t t = 0; t < centroids_.size(); ++t) {
        int ix = std::clamp(static_cast<int>((centroids_[t].x - lo_.x) / cell_), 0, nx_ - 1);
        int iy = std::clamp(static_cast<int>((centroids_[t].y - lo_.y) / cell_), 0, ny_ - 1);
        grid_[static_cast<std::size_t>(iy) * nx_ + ix].push_back(static_cast<int>(t));
    }
}

P1Interpolator::Locate P1Interpolator::search(const Vec2& p) const {
    int ix = std::clamp(static_cast<int>((p.x - lo_.x) / cell_), 0, nx_ - 1);
    int iy = std::clamp(static_cast<int>((p.y - lo_.y) / cell_), 0, ny_ - 1);
    Locate best{-1, 0, 0, 0, -std::numeric_limits<double>::max()};
    double best_min = -std::numeric_limits<double>::max();
    const int rmax = std::max(nx_, ny_);
    for (int r = 0; r <= rmax; ++r) {
        bool any = false;
        for (int dy = -r; dy <= r; ++dy) {
            for (int dx = -r; dx <= r; ++dx) {
                if (std::max(std::abs(dx), std::abs(dy)) != r) continue;  // ring only
                int cx = ix + dx, cy = iy + dy;
                if (cx < 0 || cy < 0 || cx >= nx_ || cy >= ny_) continue;
                any = true;
                for (int t : grid_[static_cast<std::size_t>(cy) * nx_ + cx]) {
                    const auto& tr = mesh_.triangles[t];
                    const Vec2& a = mesh_.nodes[tr[0]];
                    Vec2 v0 = mesh_.nodes[tr[1]] - a;
                    Vec2 v1 = mesh_.nodes[tr[2]] - a;
                    Vec2 v2 = p - a;
                    double den = v0.cross(v1);
                    if (den == 0) continue;
                    double l1 = v2.cross(v1) / den;
                    double l2 = v0.cross(v2) / den;
                    double l0 = 1.0 - l1 - l2;
                    double mn = std::min({l0, l1, l2});
                    if (mn > best_min) {
                        best_min = mn;
                        best = {t, l0, l1, l2, mn};
                    }
                }
            }
        }
        if (best.tri >= 0 && best_min >= -1e-12) break;
        // keep expanding one extra ring after the first nonempty one so a
        // containing triangle in a neighbor cell is not missed
        if (best.tri >= 0 && r >= 2 && best_min > -0.5) break;
        (void)any;
    }
    return best;
}

P1Interpolator::Locate P1Interpolator::locate(const Vec2& p) const {
    Locate best = search(p);
    require(best.tri >= 0, ErrorKind::Internal, "interpolation query found no candidate triangle");
    return best;
}

int P1Interpolator::find_triangle(const Vec2& p) const {
    Locate best = search(p);
    if (best.tri < 0 || best.min_bary < -1e-9) return -1;
    return best.tri;
}

double P1Interpolator::evaluate(const std::vector<double>& nodal, const Vec2& p) const {
    Locate loc = locate(p);
    const auto& tr = mesh_.triangles[loc.tri];
    return loc.l0 * nodal[tr[0]] + loc.l1 * nodal[tr[1]] + loc.l2 * nodal[tr[2]];
}

std::vector<double> P1Interpolator::evaluate_many(const std::vector<double>& nodal,
                                                  const std::vector<Vec2>& points) const {
    std::vector<double> out(points.size());
    const std::int64_t n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t i = 0; i < n; ++i) out[i] = evaluate(nodal, points[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Content hashes
// ---------------------------------------------------------------------------

namespace {

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t hash) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        hash ^= p[i];
        hash *= 0x100000001B3ull;
    }
    return hash;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace

std::string mesh_content_id(const Mesh& mesh) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (const Vec2& p : mesh.nodes) {
        h = fnv1a(&p.x, sizeof(double), h);
        h = fnv1a(&p.y, sizeof(double), h);
    }
    for (const auto& t : mesh.triangles) h = fnv1a(t.data(), sizeof(int) * 3, h);
    return hex64(h);
}

std::string sigma_content_id(const std::vector<double>& sigma) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    if (!sigma.empty()) h = fnv1a(sigma.data(), sigma.size() * sizeof(double), h);
    return hex64(h);
}

std::string electrodes_content_id(const ElectrodeConfig& electrodes) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    if (!electrodes.centers.empty())
        h = fnv1a(electrodes.centers.data(), electrodes.centers.size() * sizeof(double), h);
    h = fnv1a(&electrodes.half_width, sizeof(double), h);
    h = fnv1a(&electrodes.contact_impedance, sizeof(double), h);
    h = fnv1a(&electrodes.current, sizeof(double), h);
    return hex64(h);
}

}  // namespace eit
