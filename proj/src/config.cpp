#include "adjflow/config.hpp"

#include "adjflow/error.hpp"
#include "io_util.hpp"

#include <json.hpp>

#include <filesystem>
#include <set>

namespace adjflow {

namespace {

using nlohmann::json;

// Typed, path-aware view of one JSON object. finish() rejects keys that were
// never read.
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ParseError(label() + " must be an object");
    }

    std::string at(std::string_view key) const {
        return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
    }
    bool has(const std::string& key) { return j_.contains(key); }

    const json* get(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void number(const std::string& key, double& out) {
        if (const json* v = get(key)) {
            if (!v->is_number()) throw ParseError(at(key) + " must be a number");
            out = v->get<double>();
        }
    }
    template <class Int>
    void integer(const std::string& key, Int& out) {
        if (const json* v = get(key)) {
            if (!v->is_number_integer()) throw ParseError(at(key) + " must be an integer");
            const auto raw = v->get<long long>();
            if (std::is_unsigned_v<Int> && raw < 0) throw ValidationError(at(key) + " must be >= 0");
            out = static_cast<Int>(raw);
        }
    }
    void boolean(const std::string& key, bool& out) {
        if (const json* v = get(key)) {
            if (!v->is_boolean()) throw ParseError(at(key) + " must be a boolean");
            out = v->get<bool>();
        }
    }
    void string(const std::string& key, std::string& out) {
        if (const json* v = get(key)) {
            if (!v->is_string()) throw ParseError(at(key) + " must be a string");
            out = v->get<std::string>();
        }
    }
    void numbers(const std::string& key, std::vector<double>& out, std::size_t exact = 0) {
        const json* v = get(key);
        if (v == nullptr) return;
        if (!v->is_array()) throw ParseError(at(key) + " must be an array of numbers");
        if (exact != 0 && v->size() != exact)
            throw ValidationError(at(key) + " must have " + std::to_string(exact) + " entries");
        out.clear();
        for (const auto& x : *v) {
            if (!x.is_number()) throw ParseError(at(key) + " must be an array of numbers");
            out.push_back(x.get<double>());
        }
    }
    std::optional<Obj> child(const std::string& key) {
        const json* v = get(key);
        if (v == nullptr) return std::nullopt;
        return Obj(*v, at(key));
    }
    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ValidationError("unknown key " + at(it.key()));
    }
    std::string label() const { return path_.empty() ? "config" : path_; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

Vec2 read_point(Obj& o, const std::string& key, Vec2 fallback) {
    std::vector<double> v{fallback.x, fallback.y};
    o.numbers(key, v, 2);
    return {v[0], v[1]};
}

BoundaryProfile read_profile(Obj o) {
    BoundaryProfile p;
    o.numbers("coeffs_x", p.x.coeffs);
    o.numbers("coeffs_y", p.y.coeffs);
    std::string axis = "y";
    o.string("coordinate", axis);
    if (axis == "x") p.coordinate = Axis::X;
    else if (axis == "y") p.coordinate = Axis::Y;
    else throw ValidationError(o.at("coordinate") + " must be \"x\" or \"y\"");
    o.finish();
    return p;
}

MeshSource read_generator(Obj g) {
    std::string type;
    g.string("type", type);
    if (type == "channel") {
        ChannelSpec c;
        g.number("length", c.length);
        g.number("height", c.height);
        g.integer("nx", c.nx);
        g.integer("ny", c.ny);
        g.finish();
        if (!(c.length > 0.0) || !(c.height > 0.0))
            throw ValidationError(g.at("length") + " and height must be positive");
        if (c.nx < 1 || c.ny < 1) throw ValidationError(g.at("nx") + " and ny must be >= 1");
        return c;
    }
    if (type == "rect_with_hole") {
        RectWithHoleSpec r;
        std::vector<double> rect;
        g.numbers("rect", rect, 4);
        if (rect.empty()) throw ValidationError(g.at("rect") + " is required");
        std::copy(rect.begin(), rect.end(), r.rect.begin());
        r.center = read_point(g, "center", {});
        g.number("radius", r.radius);
        g.integer("resolution", r.resolution);
        g.integer("layers", r.options.layers);
        g.number("first_layer", r.options.first_layer);
        g.finish();
        if (!(r.radius > 0.0)) throw ValidationError(g.at("radius") + " must be positive");
        return r;
    }
    if (type == "cannula") {
        CannulaOptions c;
        g.number("width", c.width);
        g.number("inlet_y", c.inlet_y);
        g.number("inlet_length", c.inlet_length);
        g.number("bend_radius", c.bend_radius);
        g.number("outlet_length", c.outlet_length);
        g.integer("n_along", c.n_along);
        g.integer("n_across", c.n_across);
        g.integer("wall_cells", c.wall_cells);
        g.finish();
        return c;
    }
    throw ValidationError(g.at("type") + " must be \"channel\", \"rect_with_hole\" or \"cannula\"");
}

MeshSource read_mesh(Obj m) {
    const bool path = m.has("path"), gen = m.has("generator");
    if (path == gen) throw ValidationError("mesh needs exactly one of \"path\" or \"generator\"");
    MeshSource src;
    if (path) {
        std::string p;
        m.string("path", p);
        src = p;
    } else {
        src = read_generator(*m.child("generator"));
    }
    m.finish();
    return src;
}

FlowConfig read_flow(Obj f) {
    FlowConfig c;
    if (!f.has("viscosity")) throw ValidationError("flow.viscosity is required");
    f.number("viscosity", c.viscosity);
    std::string model = "navier_stokes";
    f.string("model", model);
    if (model == "stokes") c.model = FlowModel::Stokes;
    else if (model == "navier_stokes") c.model = FlowModel::NavierStokes;
    else throw ValidationError("flow.model must be \"stokes\" or \"navier_stokes\"");
    if (auto o = f.child("inflow")) c.inflow = read_profile(*o);
    if (auto o = f.child("traction")) c.traction = read_profile(*o);
    if (auto n = f.child("newton")) {
        n->number("tol", c.newton_tol);
        n->integer("max_iters", c.max_newton);
        n->integer("continuation_steps", c.continuation_steps);
        n->finish();
    }
    f.finish();
    c.validate();
    return c;
}

OptimConfig read_optimize(Obj o) {
    OptimConfig c;
    o.number("step0", c.step0);
    if (const json* m = o.get("multiplier0")) {
        if (m->is_string() && *m == "balance") c.balance_multiplier0 = true;
        else if (m->is_number()) c.multiplier0 = m->get<double>();
        else throw ParseError("optimize.multiplier0 must be a number or \"balance\"");
    }
    o.number("epsilon", c.epsilon);
    if (!o.has("target_volume")) throw ValidationError("optimize.target_volume is required");
    o.number("target_volume", c.target_volume);
    o.integer("max_iters", c.max_iters);
    std::vector<double> bounds{c.step.min, c.step.max};
    o.numbers("step_bounds", bounds, 2);
    c.step.min = bounds[0];
    c.step.max = bounds[1];
    o.number("step_decrease", c.step.decrease);
    o.number("step_increase", c.step.increase);
    o.number("alignment", c.step.alignment);
    o.integer("retry_cap", c.retry_cap);
    std::string fb = "absolute";
    o.string("volume_feedback", fb);
    if (fb == "absolute") c.feedback = VolumeFeedback::Absolute;
    else if (fb == "signed") c.feedback = VolumeFeedback::Signed;
    else throw ValidationError("optimize.volume_feedback must be \"absolute\" or \"signed\"");
    o.boolean("reject_increase", c.reject_increase);
    o.finish();
    c.validate();
    return c;
}

GradientCheckSpec read_gradcheck(Obj g) {
    GradientCheckSpec s;
    g.numbers("steps", s.steps);
    if (s.steps.empty()) throw ValidationError("gradcheck.steps must not be empty");
    for (double t : s.steps)
        if (!(t > 0.0)) throw ValidationError("gradcheck.steps must be positive");
    if (auto p = g.child("perturbation")) {
        std::string type;
        p->string("type", type);
        if (type == "radial") {
            RadialPerturbation r;
            r.center = read_point(*p, "center", {});
            p->number("inner", r.inner);
            p->number("outer", r.outer);
            p->number("mean", r.mean);
            p->number("amplitude", r.amplitude);
            p->integer("mode", r.mode);
            if (!(r.outer > r.inner)) throw ValidationError("gradcheck.perturbation.outer must exceed inner");
            s.perturbation = r;
        } else if (type == "smoothed_normal") {
            s.perturbation = SmoothedNormalSpec{};
        } else {
            throw ValidationError("gradcheck.perturbation.type must be \"radial\" or \"smoothed_normal\"");
        }
        p->finish();
    }
    g.finish();
    return s;
}

} // namespace

RunConfig parse_config(std::string_view content) {
    json root;
    try {
        root = json::parse(content);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }
    Obj top(root, "");
    RunConfig cfg;
    auto mesh = top.child("mesh");
    if (!mesh) throw ValidationError("mesh is required");
    cfg.mesh = read_mesh(*mesh);
    auto flow = top.child("flow");
    if (!flow) throw ValidationError("flow is required");
    cfg.flow = read_flow(*flow);
    if (auto o = top.child("optimize")) cfg.optimize = read_optimize(*o);
    if (auto g = top.child("gradcheck")) cfg.gradcheck = read_gradcheck(*g);
    if (auto o = top.child("output")) {
        o->string("dir", cfg.output.dir);
        o->boolean("vtk", cfg.output.vtk);
        o->finish();
    }
    top.finish();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    RunConfig cfg = parse_config(read_text_file(path));
    cfg.base_dir = std::filesystem::path(path).parent_path().string();
    if (cfg.base_dir.empty()) cfg.base_dir = ".";
    return cfg;
}

Mesh2D build_mesh(const RunConfig& cfg) {
    struct Visitor {
        const RunConfig& cfg;
        Mesh2D operator()(const std::string& path) const {
            std::filesystem::path p(path);
            if (p.is_relative()) p = std::filesystem::path(cfg.base_dir) / p;
            return read_mesh_file(p.string());
        }
        Mesh2D operator()(const ChannelSpec& c) const { return gen_channel(c.length, c.height, c.nx, c.ny); }
        Mesh2D operator()(const RectWithHoleSpec& r) const {
            return gen_rect_with_hole(r.rect, r.center, r.radius, r.resolution, r.options).mesh;
        }
        Mesh2D operator()(const CannulaOptions& c) const { return gen_cannula(c); }
    };
    return std::visit(Visitor{cfg}, cfg.mesh);
}

DisplacementField build_perturbation(const Mesh2D& mesh, const PerturbationSpec& perturbation) {
    if (const auto* r = std::get_if<RadialPerturbation>(&perturbation)) return radial_perturbation(mesh, *r);
    BoundaryGradient unit = free_boundary(mesh);
    for (double& g : unit.density) g = -1.0;
    return smooth_descent(mesh, unit);
}

} // namespace adjflow
