#include "adjflow/error.hpp"
#include "adjflow/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace adjflow {

namespace {

// Appends the two triangles of quad (a,b,c,d), split along the shorter
// diagonal, each made counter-clockwise.
void split_quad(const std::vector<Vec2>& nodes, std::size_t a, std::size_t b, std::size_t c,
                std::size_t d, std::vector<Triangle>& out) {
    auto push = [&](std::size_t i, std::size_t j, std::size_t k) {
        if (cross(nodes[j] - nodes[i], nodes[k] - nodes[i]) < 0.0) std::swap(j, k);
        out.push_back({i, j, k});
    };
    if (norm(nodes[c] - nodes[a]) <= norm(nodes[d] - nodes[b])) {
        push(a, b, c);
        push(a, c, d);
    } else {
        push(a, b, d);
        push(b, c, d);
    }
}

// Ratio q with first * (q^m - 1) / (q - 1) == total; 1 when uniform spacing
// already gives a first layer no thicker than requested.
double growth_ratio(double first, double total, std::size_t m) {
    if (first * static_cast<double>(m) >= total) return 1.0;
    auto sum = [&](double q) { return first * (std::pow(q, static_cast<double>(m)) - 1.0) / (q - 1.0); };
    double lo = 1.0 + 1e-12, hi = 2.0;
    while (sum(hi) < total) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (sum(mid) < total ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

Mesh2D gen_channel(double length, double height, std::size_t nx, std::size_t ny) {
    if (nx < 1 || ny < 1) throw ValidationError("gen_channel: nx and ny must be >= 1");
    if (!(length > 0.0) || !(height > 0.0))
        throw ValidationError("gen_channel: length and height must be positive");
    const auto id = [nx](std::size_t i, std::size_t j) { return j * (nx + 1) + i; };

    std::vector<Vec2> nodes;
    nodes.reserve((nx + 1) * (ny + 1));
    for (std::size_t j = 0; j <= ny; ++j)
        for (std::size_t i = 0; i <= nx; ++i)
            nodes.push_back({length * static_cast<double>(i) / static_cast<double>(nx),
                             height * static_cast<double>(j) / static_cast<double>(ny)});

    std::vector<Triangle> tris;
    tris.reserve(2 * nx * ny);
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            const std::size_t a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
            if ((i + j) % 2 == 0) {
                tris.push_back({a, b, c});
                tris.push_back({a, c, d});
            } else {
                tris.push_back({a, b, d});
                tris.push_back({b, c, d});
            }
        }
    }

    std::vector<BoundaryEdge> edges;
    for (std::size_t i = 0; i < nx; ++i) edges.push_back({{id(i, 0), id(i + 1, 0)}, BoundaryTag::Wall});
    for (std::size_t j = 0; j < ny; ++j)
        edges.push_back({{id(nx, j), id(nx, j + 1)}, BoundaryTag::Outflow});
    for (std::size_t i = nx; i-- > 0;)
        edges.push_back({{id(i + 1, ny), id(i, ny)}, BoundaryTag::Wall});
    for (std::size_t j = ny; j-- > 0;)
        edges.push_back({{id(0, j + 1), id(0, j)}, BoundaryTag::Inflow});
    return Mesh2D(std::move(nodes), std::move(tris), std::move(edges));
}

HoleMesh gen_rect_with_hole(std::array<double, 4> rect, Vec2 center, double radius,
                            std::size_t resolution, RectWithHoleOptions opts) {
    const auto [x0, y0, x1, y1] = rect;
    if (!(radius > 0.0)) throw ValidationError("gen_rect_with_hole: radius must be positive");
    if (!(center.x - radius > x0 && center.x + radius < x1 && center.y - radius > y0 &&
          center.y + radius < y1))
        throw ValidationError("gen_rect_with_hole: disk must lie strictly inside the rectangle");
    if (resolution < 8) throw ValidationError("gen_rect_with_hole: resolution must be >= 8");

    constexpr double two_pi = 2.0 * std::numbers::pi;
    const std::size_t n = resolution;
    const std::size_t m = opts.layers > 0 ? opts.layers : std::max<std::size_t>(2, n / 8);
    const double first = opts.first_layer > 0.0 ? opts.first_layer
                                                : 0.5 * two_pi * radius / static_cast<double>(n);

    // Corners sorted by polar angle about the center, each pinned to the
    // circle node with the nearest angle.
    struct Corner {
        Vec2 p;
        double angle;
        std::size_t index;
    };
    std::array<Corner, 4> corners{{{{x1, y0}, 0, 0}, {{x1, y1}, 0, 0}, {{x0, y1}, 0, 0}, {{x0, y0}, 0, 0}}};
    for (auto& c : corners) {
        c.angle = std::atan2(c.p.y - center.y, c.p.x - center.x);
        if (c.angle < 0.0) c.angle += two_pi;
        c.index = static_cast<std::size_t>(std::llround(c.angle / two_pi * static_cast<double>(n))) % n;
    }
    std::sort(corners.begin(), corners.end(),
              [](const Corner& a, const Corner& b) { return a.index < b.index; });
    for (std::size_t c = 0; c < 4; ++c) {
        if (corners[c].index == corners[(c + 1) % 4].index)
            throw ValidationError("gen_rect_with_hole: resolution too low for this rectangle");
    }

    auto outer_point = [&](std::size_t j) -> Vec2 {
        // Corner interval [c, c+1) (cyclic) that contains index j.
        std::size_t c = 3;
        for (std::size_t k = 0; k < 4; ++k) {
            if (corners[k].index <= j) c = k;
        }
        const Corner& a = corners[c];
        const Corner& b = corners[(c + 1) % 4];
        const std::size_t span = (b.index + n - a.index) % n;
        const std::size_t off = (j + n - a.index) % n;
        if (off == 0) return a.p;
        double a1 = a.angle, a2 = b.angle;
        if (a2 <= a1) a2 += two_pi;
        const double phi = a1 + (a2 - a1) * static_cast<double>(off) / static_cast<double>(span);
        const double cx = std::cos(phi), sy = std::sin(phi);
        // a and b share one rectangle side.
        if (a.p.x == b.p.x) return {a.p.x, center.y + (a.p.x - center.x) / cx * sy};
        return {center.x + (a.p.y - center.y) / sy * cx, a.p.y};
    };

    std::vector<Vec2> nodes(n * (m + 1));
    for (std::size_t j = 0; j < n; ++j) {
        const double theta = two_pi * static_cast<double>(j) / static_cast<double>(n);
        const Vec2 inner{center.x + radius * std::cos(theta), center.y + radius * std::sin(theta)};
        const Vec2 outer = outer_point(j);
        const double len = norm(outer - inner);
        const double q = growth_ratio(first, len, m);
        nodes[j] = inner;
        nodes[m * n + j] = outer;
        for (std::size_t k = 1; k < m; ++k) {
            const double s = q == 1.0 ? static_cast<double>(k) / static_cast<double>(m)
                                      : first * (std::pow(q, static_cast<double>(k)) - 1.0) /
                                            (q - 1.0) / len;
            nodes[k * n + j] = inner + s * (outer - inner);
        }
    }

    std::vector<Triangle> tris;
    tris.reserve(2 * n * m);
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t jn = (j + 1) % n;
            split_quad(nodes, k * n + j, k * n + jn, (k + 1) * n + jn, (k + 1) * n + j, tris);
        }
    }

    std::vector<BoundaryEdge> edges;
    for (std::size_t j = 0; j < n; ++j) edges.push_back({{j, (j + 1) % n}, BoundaryTag::Free});
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t a = m * n + j, b = m * n + (j + 1) % n;
        BoundaryTag tag = BoundaryTag::Wall;
        if (nodes[a].x == x0 && nodes[b].x == x0) tag = BoundaryTag::Inflow;
        if (nodes[a].x == x1 && nodes[b].x == x1) tag = BoundaryTag::Outflow;
        edges.push_back({{a, b}, tag});
    }

    const double polygon = 0.5 * static_cast<double>(n) * radius * radius *
                           std::sin(two_pi / static_cast<double>(n));
    const double defect = std::numbers::pi * radius * radius - polygon;
    return {Mesh2D(std::move(nodes), std::move(tris), std::move(edges)), defect};
}

Mesh2D gen_cannula(const CannulaOptions& o) {
    if (!(o.width > 0.0) || !(o.bend_radius > 0.5 * o.width))
        throw ValidationError("gen_cannula: bend radius must exceed half the width");
    if (o.n_along < 3 || o.n_across < 1)
        throw ValidationError("gen_cannula: need n_along >= 3 and n_across >= 1");
    if (2 * o.wall_cells >= o.n_along)
        throw ValidationError("gen_cannula: wall_cells leaves no free wall");

    const double half_pi = 0.5 * std::numbers::pi;
    const double yc = o.inlet_y + 0.5 * o.width;
    const double a = o.inlet_length, r = o.bend_radius;
    const double arc = half_pi * r;
    const double total = a + arc + o.outlet_length;

    auto place = [&](double s, double t) -> Vec2 {
        if (s <= a) return {s, yc + t};
        if (s <= a + arc) {
            const double alpha = (s - a) / r;
            return {a + (r + t) * std::sin(alpha), yc - r + (r + t) * std::cos(alpha)};
        }
        return {a + r + t, yc - r - (s - a - arc)};
    };

    const std::size_t na = o.n_along, nc = o.n_across;
    const auto id = [nc](std::size_t i, std::size_t j) { return i * (nc + 1) + j; };
    std::vector<Vec2> nodes;
    nodes.reserve((na + 1) * (nc + 1));
    for (std::size_t i = 0; i <= na; ++i) {
        const double s = total * static_cast<double>(i) / static_cast<double>(na);
        for (std::size_t j = 0; j <= nc; ++j) {
            const double t = o.width * (static_cast<double>(j) / static_cast<double>(nc) - 0.5);
            nodes.push_back(place(s, t));
        }
    }
    // Pin the straight legs exactly.
    for (std::size_t j = 0; j <= nc; ++j) nodes[id(0, j)].x = 0.0;

    std::vector<Triangle> tris;
    for (std::size_t i = 0; i < na; ++i) {
        for (std::size_t j = 0; j < nc; ++j) {
            const std::size_t p = id(i, j), q = id(i + 1, j), u = id(i + 1, j + 1), v = id(i, j + 1);
            auto push = [&](std::size_t x, std::size_t y, std::size_t z) {
                if (cross(nodes[y] - nodes[x], nodes[z] - nodes[x]) < 0.0) std::swap(y, z);
                tris.push_back({x, y, z});
            };
            if ((i + j) % 2 == 0) {
                push(p, q, u);
                push(p, u, v);
            } else {
                push(p, q, v);
                push(q, u, v);
            }
        }
    }

    std::vector<BoundaryEdge> edges;
    for (std::size_t j = 0; j < nc; ++j) edges.push_back({{id(0, j), id(0, j + 1)}, BoundaryTag::Inflow});
    for (std::size_t j = 0; j < nc; ++j)
        edges.push_back({{id(na, j), id(na, j + 1)}, BoundaryTag::Outflow});
    for (std::size_t i = 0; i < na; ++i) {
        const bool stub = i < o.wall_cells || i >= na - o.wall_cells;
        const BoundaryTag tag = stub ? BoundaryTag::Wall : BoundaryTag::Free;
        edges.push_back({{id(i, 0), id(i + 1, 0)}, tag});
        edges.push_back({{id(i, nc), id(i + 1, nc)}, tag});
    }
    return Mesh2D(std::move(nodes), std::move(tris), std::move(edges));
}

} // namespace adjflow
