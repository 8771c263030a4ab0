#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace adjflow {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

enum class BoundaryTag { Inflow, Outflow, Wall, Free };

std::string_view to_string(BoundaryTag tag);
/// Parses "inflow" | "outflow" | "wall" | "free".
std::optional<BoundaryTag> parse_boundary_tag(std::string_view text);

using Triangle = std::array<std::size_t, 3>;

struct BoundaryEdge {
    std::array<std::size_t, 2> nodes;
    BoundaryTag tag;

    friend bool operator==(const BoundaryEdge&, const BoundaryEdge&) = default;
};

/// Triangulated fluid domain with a tagged boundary.
///
/// The constructor validates every structural invariant: counter-clockwise
/// triangles with positive area, conforming edges (each shared by one or two
/// triangles), and a boundary edge list that tags the topological boundary
/// exactly once. Instances are immutable.
class Mesh2D {
public:
    Mesh2D(std::vector<Vec2> nodes, std::vector<Triangle> triangles,
           std::vector<BoundaryEdge> boundary);

    const std::vector<Vec2>& nodes() const noexcept { return nodes_; }
    const std::vector<Triangle>& triangles() const noexcept { return triangles_; }
    const std::vector<BoundaryEdge>& boundary() const noexcept { return boundary_; }

    std::size_t num_nodes() const noexcept { return nodes_.size(); }
    std::size_t num_triangles() const noexcept { return triangles_.size(); }

    double signed_area(std::size_t t) const;

    /// Triangles incident to each node.
    const std::vector<std::vector<std::size_t>>& node_triangles() const noexcept {
        return node_triangles_;
    }

    /// Triangle owning boundary edge i.
    std::size_t boundary_owner(std::size_t i) const { return boundary_owner_.at(i); }

    /// Nodes touching at least one edge with the given tag, ascending.
    std::vector<std::size_t> tagged_nodes(BoundaryTag tag) const;
    bool has_tag(BoundaryTag tag) const;

    /// Nodes on Inflow, Outflow or Wall edges; these never move.
    std::vector<bool> fixed_node_mask() const;

    /// Unit outward normal (with respect to the fluid domain) of boundary edge i.
    Vec2 edge_normal(std::size_t i) const;
    double edge_length(std::size_t i) const;

    friend bool operator==(const Mesh2D& a, const Mesh2D& b) {
        return a.nodes_ == b.nodes_ && a.triangles_ == b.triangles_ &&
               a.boundary_ == b.boundary_;
    }

private:
    std::vector<Vec2> nodes_;
    std::vector<Triangle> triangles_;
    std::vector<BoundaryEdge> boundary_;
    std::vector<std::vector<std::size_t>> node_triangles_;
    std::vector<std::size_t> boundary_owner_;
};

/// Per-node displacement; must vanish on Inflow, Outflow and Wall nodes.
struct DisplacementField {
    std::vector<Vec2> values;

    static DisplacementField zero(std::size_t n) { return {std::vector<Vec2>(n)}; }
    std::size_t size() const noexcept { return values.size(); }
};

/// Throws ValidationError if d has the wrong size or moves a fixed node.
void validate_displacement(const Mesh2D& mesh, const DisplacementField& d);

/// Reads the JSON mesh format. Throws ParseError or ValidationError.
Mesh2D load_mesh(std::string_view content);
std::string save_mesh(const Mesh2D& mesh);

Mesh2D read_mesh_file(const std::string& path);
void write_mesh_file(const Mesh2D& mesh, const std::string& path);

/// Area of the fluid domain.
double volume(const Mesh2D& mesh);

struct NodalNormal {
    std::size_t node;
    Vec2 normal;
};

/// Unit outward normals at the nodes of the given tag, ordered by node index.
/// Each is the bisector of the adjacent same-tag edge normals.
std::vector<NodalNormal> boundary_normals(const Mesh2D& mesh, BoundaryTag tag);

/// nodes + step * d, revalidated. Throws InvertedElement when some triangle's
/// area drops to 1e-12 of its original value or below.
Mesh2D deform(const Mesh2D& mesh, const DisplacementField& d, double step);

/// Structured grid of [0,length]x[0,height], two triangles per cell with the
/// diagonal direction alternating in a checkerboard pattern. Left edge Inflow,
/// right Outflow, top/bottom Wall.
Mesh2D gen_channel(double length, double height, std::size_t nx, std::size_t ny);

struct RectWithHoleOptions {
    /// Radial layers between the circle and the rectangle; 0 picks resolution/8.
    std::size_t layers = 0;
    /// Thickness of the first layer at the circle; 0 picks half the
    /// circumferential spacing.
    double first_layer = 0.0;
};

struct HoleMesh {
    Mesh2D mesh;
    /// pi r^2 minus the area of the inscribed polygon.
    double area_defect;
};

/// O-grid triangulation of the rectangle (x0,y0,x1,y1) minus a disk
/// polygonized with `resolution` segments. Outer left edge Inflow, right
/// Outflow, top/bottom Wall, circle Free.
HoleMesh gen_rect_with_hole(std::array<double, 4> rect, Vec2 center, double radius,
                            std::size_t resolution, RectWithHoleOptions opts = {});

struct CannulaOptions {
    double width = 0.35;
    /// Lower wall height of the horizontal inlet leg.
    double inlet_y = 2.0;
    double inlet_length = 1.0;
    /// Centerline radius of the 90 degree bend.
    double bend_radius = 0.35;
    double outlet_length = 1.5;
    std::size_t n_along = 32;
    std::size_t n_across = 7;
    /// Cells at each end whose side walls are tagged Wall instead of Free.
    std::size_t wall_cells = 0;
};

/// Bent channel: horizontal inlet leg starting at x = 0, a clockwise quarter
/// bend, then a vertical leg down to the outlet. Inflow at x = 0, Outflow at
/// the bottom end, side walls Free.
Mesh2D gen_cannula(const CannulaOptions& opts);

} // namespace adjflow
