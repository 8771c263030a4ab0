#include "adjflow/mesh.hpp"

#include "adjflow/error.hpp"
#include "io_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <map>
#include <utility>

namespace adjflow {

namespace {

using EdgeKey = std::pair<std::size_t, std::size_t>;

EdgeKey edge_key(std::size_t a, std::size_t b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

double tri_signed_area(Vec2 a, Vec2 b, Vec2 c) { return 0.5 * cross(b - a, c - a); }

} // namespace

std::string_view to_string(BoundaryTag tag) {
    switch (tag) {
    case BoundaryTag::Inflow: return "inflow";
    case BoundaryTag::Outflow: return "outflow";
    case BoundaryTag::Wall: return "wall";
    case BoundaryTag::Free: return "free";
    }
    return "?";
}

std::optional<BoundaryTag> parse_boundary_tag(std::string_view text) {
    if (text == "inflow") return BoundaryTag::Inflow;
    if (text == "outflow") return BoundaryTag::Outflow;
    if (text == "wall") return BoundaryTag::Wall;
    if (text == "free") return BoundaryTag::Free;
    return std::nullopt;
}

Mesh2D::Mesh2D(std::vector<Vec2> nodes, std::vector<Triangle> triangles,
               std::vector<BoundaryEdge> boundary)
    : nodes_(std::move(nodes)), triangles_(std::move(triangles)), boundary_(std::move(boundary)) {
    const std::size_t n = nodes_.size();
    if (triangles_.empty()) throw ValidationError("mesh has no triangles");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(nodes_[i].x) || !std::isfinite(nodes_[i].y))
            throw ValidationError("node " + std::to_string(i) + " has a non-finite coordinate");
    }

    // edge -> (owning triangle, use count)
    std::map<EdgeKey, std::pair<std::size_t, int>> edges;
    node_triangles_.assign(n, {});
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
        const auto& tri = triangles_[t];
        for (std::size_t k = 0; k < 3; ++k) {
            if (tri[k] >= n)
                throw ValidationError("triangle " + std::to_string(t) + " references node " +
                                      std::to_string(tri[k]) + " out of range");
        }
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
            throw ValidationError("triangle " + std::to_string(t) + " has repeated nodes");
        if (!(signed_area(t) > 0.0))
            throw ValidationError("triangle " + std::to_string(t) + " has non-positive area");
        for (std::size_t k = 0; k < 3; ++k) {
            node_triangles_[tri[k]].push_back(t);
            auto [it, inserted] = edges.try_emplace(edge_key(tri[k], tri[(k + 1) % 3]), t, 0);
            if (++it->second.second > 2)
                throw ValidationError("edge (" + std::to_string(it->first.first) + "," +
                                      std::to_string(it->first.second) +
                                      ") is shared by more than two triangles");
        }
    }

    std::map<EdgeKey, std::size_t> tagged;
    boundary_owner_.reserve(boundary_.size());
    for (std::size_t i = 0; i < boundary_.size(); ++i) {
        const auto [a, b] = boundary_[i].nodes;
        const auto key = edge_key(a, b);
        auto it = edges.find(key);
        if (it == edges.end())
            throw ValidationError("boundary edge " + std::to_string(i) +
                                  " is not an edge of any triangle");
        if (it->second.second != 1)
            throw ValidationError("boundary edge " + std::to_string(i) + " is an interior edge");
        if (!tagged.emplace(key, i).second)
            throw ValidationError("boundary edge " + std::to_string(i) + " is tagged twice");
        boundary_owner_.push_back(it->second.first);
    }
    for (const auto& [key, use] : edges) {
        if (use.second == 1 && !tagged.contains(key))
            throw ValidationError("boundary edge (" + std::to_string(key.first) + "," +
                                  std::to_string(key.second) + ") has no tag");
    }
}

double Mesh2D::signed_area(std::size_t t) const {
    const auto& tri = triangles_.at(t);
    return tri_signed_area(nodes_[tri[0]], nodes_[tri[1]], nodes_[tri[2]]);
}

std::vector<std::size_t> Mesh2D::tagged_nodes(BoundaryTag tag) const {
    std::vector<std::size_t> out;
    for (const auto& e : boundary_) {
        if (e.tag != tag) continue;
        out.push_back(e.nodes[0]);
        out.push_back(e.nodes[1]);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

bool Mesh2D::has_tag(BoundaryTag tag) const {
    return std::any_of(boundary_.begin(), boundary_.end(),
                       [tag](const BoundaryEdge& e) { return e.tag == tag; });
}

std::vector<bool> Mesh2D::fixed_node_mask() const {
    std::vector<bool> fixed(nodes_.size(), false);
    for (const auto& e : boundary_) {
        if (e.tag == BoundaryTag::Free) continue;
        fixed[e.nodes[0]] = true;
        fixed[e.nodes[1]] = true;
    }
    return fixed;
}

Vec2 Mesh2D::edge_normal(std::size_t i) const {
    const auto [a, b] = boundary_.at(i).nodes;
    const auto& tri = triangles_[boundary_owner_[i]];
    // Orient the edge as it is traversed by its counter-clockwise owner.
    std::size_t from = a, to = b;
    for (std::size_t k = 0; k < 3; ++k) {
        if (tri[k] == b && tri[(k + 1) % 3] == a) {
            from = b;
            to = a;
        }
    }
    const Vec2 d = nodes_[to] - nodes_[from];
    const double len = norm(d);
    return {d.y / len, -d.x / len};
}

double Mesh2D::edge_length(std::size_t i) const {
    const auto [a, b] = boundary_.at(i).nodes;
    return norm(nodes_[b] - nodes_[a]);
}

void validate_displacement(const Mesh2D& mesh, const DisplacementField& d) {
    if (d.size() != mesh.num_nodes())
        throw ValidationError("displacement has " + std::to_string(d.size()) +
                              " entries, mesh has " + std::to_string(mesh.num_nodes()) +
                              " nodes");
    const auto fixed = mesh.fixed_node_mask();
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (fixed[i] && (d.values[i].x != 0.0 || d.values[i].y != 0.0))
            throw ValidationError("displacement moves fixed node " + std::to_string(i));
    }
}

Mesh2D load_mesh(std::string_view content) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(content.begin(), content.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("mesh: ") + e.what());
    }
    try {
        if (!doc.is_object()) throw ParseError("mesh: top level must be an object");
        for (const auto& [key, _] : doc.items()) {
            if (key != "nodes" && key != "triangles" && key != "boundary")
                throw ParseError("mesh: unknown key '" + key + "'");
        }
        std::vector<Vec2> nodes;
        for (const auto& p : doc.at("nodes")) {
            if (!p.is_array() || p.size() != 2) throw ParseError("mesh: node must be [x,y]");
            nodes.push_back({p[0].get<double>(), p[1].get<double>()});
        }
        std::vector<Triangle> tris;
        for (const auto& t : doc.at("triangles")) {
            if (!t.is_array() || t.size() != 3) throw ParseError("mesh: triangle must be [i,j,k]");
            tris.push_back({t[0].get<std::size_t>(), t[1].get<std::size_t>(),
                            t[2].get<std::size_t>()});
        }
        std::vector<BoundaryEdge> edges;
        for (const auto& e : doc.at("boundary")) {
            if (!e.is_array() || e.size() != 3)
                throw ParseError("mesh: boundary entry must be [i,j,tag]");
            const auto tag = parse_boundary_tag(e[2].get<std::string>());
            if (!tag) throw ParseError("mesh: unknown boundary tag '" + e[2].get<std::string>() + "'");
            edges.push_back({{e[0].get<std::size_t>(), e[1].get<std::size_t>()}, *tag});
        }
        return Mesh2D(std::move(nodes), std::move(tris), std::move(edges));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("mesh: ") + e.what());
    }
}

std::string save_mesh(const Mesh2D& mesh) {
    std::string out = "{\"nodes\":[\n";
    const auto& nodes = mesh.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        out += '[';
        append_double(out, nodes[i].x);
        out += ',';
        append_double(out, nodes[i].y);
        out += i + 1 < nodes.size() ? "],\n" : "]\n";
    }
    out += "],\"triangles\":[\n";
    const auto& tris = mesh.triangles();
    for (std::size_t i = 0; i < tris.size(); ++i) {
        out += '[' + std::to_string(tris[i][0]) + ',' + std::to_string(tris[i][1]) + ',' +
               std::to_string(tris[i][2]);
        out += i + 1 < tris.size() ? "],\n" : "]\n";
    }
    out += "],\"boundary\":[\n";
    const auto& edges = mesh.boundary();
    for (std::size_t i = 0; i < edges.size(); ++i) {
        out += '[' + std::to_string(edges[i].nodes[0]) + ',' + std::to_string(edges[i].nodes[1]) +
               ",\"" + std::string(to_string(edges[i].tag)) + '"';
        out += i + 1 < edges.size() ? "],\n" : "]\n";
    }
    out += "]}\n";
    return out;
}

Mesh2D read_mesh_file(const std::string& path) { return load_mesh(read_text_file(path)); }

void write_mesh_file(const Mesh2D& mesh, const std::string& path) {
    write_file_atomic(path, save_mesh(mesh));
}

double volume(const Mesh2D& mesh) {
    double v = 0.0;
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) v += mesh.signed_area(t);
    return v;
}

std::vector<NodalNormal> boundary_normals(const Mesh2D& mesh, BoundaryTag tag) {
    std::map<std::size_t, Vec2> acc;
    const auto& edges = mesh.boundary();
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (edges[i].tag != tag) continue;
        const Vec2 n = mesh.edge_normal(i);
        for (auto node : edges[i].nodes) acc[node] = acc[node] + n;
    }
    if (acc.empty())
        throw ValidationError("mesh has no '" + std::string(to_string(tag)) + "' boundary");
    std::vector<NodalNormal> out;
    out.reserve(acc.size());
    for (const auto& [node, sum] : acc) {
        const double len = norm(sum);
        out.push_back({node, len > 0.0 ? (1.0 / len) * sum : sum});
    }
    return out;
}

Mesh2D deform(const Mesh2D& mesh, const DisplacementField& d, double step) {
    validate_displacement(mesh, d);
    std::vector<Vec2> nodes = mesh.nodes();
    for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = nodes[i] + step * d.values[i];
    const auto& tris = mesh.triangles();
    for (std::size_t t = 0; t < tris.size(); ++t) {
        const double before = mesh.signed_area(t);
        const double after = tri_signed_area(nodes[tris[t][0]], nodes[tris[t][1]], nodes[tris[t][2]]);
        if (!(after > 1e-12 * before))
            throw InvertedElement("triangle " + std::to_string(t) + " inverted by deformation", t);
    }
    return Mesh2D(std::move(nodes), tris, mesh.boundary());
}

} // namespace adjflow
