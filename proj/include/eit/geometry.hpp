#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "eit/core.hpp"

namespace eit {

/// Closed boundary curve given in star-shaped radial form r(theta) around the
/// origin. Circles, ellipses, smooth closed curves through control radii, and
/// star-shaped polygons are all expressed this way; arc-length queries go
/// through a dense precomputed table.
class BoundaryShape {
  public:
    enum class Kind { Circle, Ellipse, Smooth, Polygon };

    static BoundaryShape circle(double radius);
    static BoundaryShape ellipse(double semi_axis_x, double semi_axis_y);
    /// Periodic Catmull-Rom interpolation of control radii at uniform angles.
    static BoundaryShape smooth(std::vector<double> control_radii);
    /// Simple polygon, counterclockwise, star-shaped with respect to the
    /// origin (every boundary point visible from the origin).
    static BoundaryShape polygon(std::vector<Vec2> vertices);

    Kind kind() const { return kind_; }
    double perimeter() const { return perimeter_; }
    double radius_at(double theta) const;
    double mean_radius() const;

    double theta_of_arclength(double s) const;
    double arclength_of_theta(double theta) const;
    Vec2 point_at_theta(double theta) const;
    Vec2 point_at_arclength(double s) const;

    // parameters, for serialization
    double circle_radius() const { return radius_; }
    double ellipse_a() const { return a_; }
    double ellipse_b() const { return b_; }
    const std::vector<double>& control_radii() const { return control_; }
    const std::vector<Vec2>& polygon_vertices() const { return verts_; }

  private:
    BoundaryShape() = default;
    void build_table();

    Kind kind_ = Kind::Circle;
    double radius_ = 1.0;
    double a_ = 1.0, b_ = 1.0;
    std::vector<double> control_;
    std::vector<Vec2> verts_;
    std::vector<double> theta_table_;
    std::vector<double> s_table_;
    double perimeter_ = 0.0;
};

/// Electrode layout on a boundary: arc-length center positions, common arc
/// half-width, contact impedance and drive current.
struct ElectrodeConfig {
    std::vector<double> centers;  ///< arc-length positions along the boundary (m)
    double half_width = 0.0;      ///< arc half-length h (m)
    double contact_impedance = 0.01;  ///< z (Ohm*m)
    double current = 1.0;             ///< injected current I (mA)

    int count() const { return static_cast<int>(centers.size()); }
};

/// Equispaced electrode layout starting at arc position s0.
ElectrodeConfig equispaced_electrodes(const BoundaryShape& shape, int count, double half_width,
                                      double contact_impedance = 0.01, double current = 1.0,
                                      double s0 = 0.0);

/// Validates electrode invariants against a boundary (count >= 8, positive
/// widths/impedance/current, pairwise disjoint arcs). Throws Error on failure.
void validate_electrodes(const BoundaryShape& shape, const ElectrodeConfig& electrodes);

/// Conforming triangle mesh of a boundary shape. Nodes [0, boundary_node_count)
/// are the boundary ring in counterclockwise order; boundary edge i connects
/// ring nodes i and i+1 (mod ring size). Electrode arcs are resolved exactly:
/// arc endpoints and centers are mesh nodes.
struct Mesh {
    std::vector<Vec2> nodes;
    std::vector<std::array<int, 3>> triangles;  ///< counterclockwise
    std::vector<std::array<int, 2>> boundary_edges;
    std::vector<RegionTag> region;   ///< per-triangle tag
    std::vector<int> ring_of_tri;    ///< generator layer index, 0 = outermost
    int boundary_node_count = 0;
    int center_node = -1;  ///< innermost node (interior); used to ground point-source solves

    std::vector<int> electrode_center_node;         ///< per electrode
    std::vector<std::vector<int>> electrode_edges;  ///< per electrode: boundary-edge ids

    std::size_t node_count() const { return nodes.size(); }
    std::size_t tri_count() const { return triangles.size(); }

    double signed_area(std::size_t t) const {
        const Vec2& a = nodes[triangles[t][0]];
        const Vec2& b = nodes[triangles[t][1]];
        const Vec2& c = nodes[triangles[t][2]];
        return 0.5 * (b - a).cross(c - a);
    }
};

/// Mesh resolution controls. `edge_len` caps the interior edge length;
/// `band_len` is the target length at the boundary (defaults to edge_len),
/// growing inward at `grade` per unit depth until it reaches edge_len.
struct MeshOptions {
    double edge_len = 0.05;
    double band_len = 0.0;  ///< 0 means "same as edge_len"
    double grade = 0.4;
};

/// Structured ring mesher for star-shaped boundaries. Postconditions:
/// electrode centers and arc endpoints are boundary nodes, triangles are
/// counterclockwise, boundary edges form one closed loop, and the boundary
/// polyline sags below band_len^2 / (8 * local radius) from the true curve.
Mesh generate_boundary_mesh(const BoundaryShape& shape, const ElectrodeConfig& electrodes,
                            const MeshOptions& options);

/// Uniform-resolution disk mesh. Preconditions: target_edge_len < radius / 4
/// and electrode arcs resolvable (half_width >= target_edge_len); violations
/// raise a Resolution error.
Mesh generate_disk_mesh(double radius, double target_edge_len, const ElectrodeConfig& electrodes);

/// Inclusion: a polygon overriding the layer tag of elements whose centroid
/// falls inside it.
struct Inclusion {
    std::vector<Vec2> polygon;  ///< simple, counterclockwise
    RegionTag tag = RegionTag::Other;
};

struct LayeredPhantom {
    Mesh mesh;
    std::vector<double> sigma;  ///< per-triangle conductivity (S/m)
};

/// Reference tissue conductivities (S/m).
std::map<RegionTag, double> default_conductivities();

/// Builds a mesh of `boundary` and tags each triangle: centroids within
/// fat_depth of the boundary are Fat, deeper centroids are Muscle unless an
/// inclusion polygon contains them. Conductivity is assigned per tag.
/// fat_depth must be smaller than the boundary inradius.
LayeredPhantom build_layered_phantom(const BoundaryShape& boundary,
                                     const ElectrodeConfig& electrodes,
                                     const MeshOptions& options, double fat_depth,
                                     const std::map<RegionTag, double>& conductivities,
                                     const std::vector<Inclusion>& inclusions = {});

/// The 8-electrode window Z_n = (n-3, ..., n+4) reduced into 1..N_E,
/// preserving cyclic order. Electrode labels are 1-based.
std::array<int, 8> electrode_neighborhood(int n, int electrode_count);

/// Exact minimal distance from each point to the mesh boundary polyline.
/// OpenMP-parallel; `distance_to_boundary_serial` is the reference twin.
std::vector<double> distance_to_boundary(const Mesh& mesh, const std::vector<Vec2>& points);
std::vector<double> distance_to_boundary_serial(const Mesh& mesh, const std::vector<Vec2>& points);

/// Per-triangle centroids.
std::vector<Vec2> triangle_centroids(const Mesh& mesh);

/// Point-in-polygon (even-odd rule) for inclusion tagging.
bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& polygon);

/// Locates points in a mesh and evaluates piecewise-linear nodal fields.
/// Queries outside the mesh clamp to the best (least-exterior) candidate.
class P1Interpolator {
  public:
    explicit P1Interpolator(const Mesh& mesh);

    /// Evaluate the nodal field at one point.
    double evaluate(const std::vector<double>& nodal, const Vec2& p) const;

    /// Evaluate at many points (OpenMP-parallel, deterministic).
    std::vector<double> evaluate_many(const std::vector<double>& nodal,
                                      const std::vector<Vec2>& points) const;

    /// Triangle containing p (within a small tolerance), or -1 when p lies
    /// outside the meshed domain.
    int find_triangle(const Vec2& p) const;

  private:
    struct Locate {
        int tri;
        double l0, l1, l2;
        double min_bary;
    };
    Locate search(const Vec2& p) const;
    Locate locate(const Vec2& p) const;

    const Mesh& mesh_;
    std::vector<Vec2> centroids_;
    double cell_ = 0.0;
    Vec2 lo_;
    int nx_ = 0, ny_ = 0;
    std::vector<std::vector<int>> grid_;
};

/// FNV-1a content hash of a mesh (nodes + triangles), hex-encoded; used as a
/// provenance id to detect frame/mesh mismatches.
std::string mesh_content_id(const Mesh& mesh);

/// Hash of a conductivity vector, hex-encoded.
std::string sigma_content_id(const std::vector<double>& sigma);

/// Hash of an electrode layout (centers, half-width, impedance, current).
std::string electrodes_content_id(const ElectrodeConfig& electrodes);

}  // namespace eit
