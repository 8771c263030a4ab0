#include "adjflow/flow.hpp"

#include "adjflow/error.hpp"

#include <cmath>
#include <string>

namespace adjflow {

void FlowConfig::validate() const {
    if (!(viscosity > 0.0) || !std::isfinite(viscosity))
        throw ValidationError("flow.viscosity must be positive");
    if (!(newton_tol > 0.0)) throw ValidationError("flow.newton.tol must be positive");
    if (max_newton < 1) throw ValidationError("flow.newton.max_iters must be >= 1");
    if (continuation_steps < 0)
        throw ValidationError("flow.newton.continuation_steps must be >= 0");
}

Strain strain_at(const BasisValues& b, const LocalVelocity& y) {
    Vec2 gx{}, gy{};
    for (int a = 0; a < 4; ++a) {
        gx = gx + y[a].x * b.grad[a];
        gy = gy + y[a].y * b.grad[a];
    }
    return {gx.x, 0.5 * (gx.y + gy.x), gy.y};
}

DirichletSet flow_dirichlet(const Mesh2D& mesh, const FlowConfig& cfg) {
    std::vector<char> kind(mesh.num_nodes(), 0); // 1 inflow, 2 no-slip
    for (const auto& e : mesh.boundary()) {
        for (auto n : e.nodes) {
            if (e.tag == BoundaryTag::Wall || e.tag == BoundaryTag::Free) kind[n] = 2;
            else if (e.tag == BoundaryTag::Inflow && kind[n] == 0) kind[n] = 1;
        }
    }
    DirichletSet bc;
    for (std::size_t n = 0; n < mesh.num_nodes(); ++n) {
        if (kind[n] == 0) continue;
        const Vec2 g = kind[n] == 1 ? cfg.inflow(mesh.nodes()[n]) : Vec2{};
        bc.dofs.push_back(2 * n);
        bc.values.push_back(g.x);
        bc.dofs.push_back(2 * n + 1);
        bc.values.push_back(g.y);
    }
    return bc;
}

Eigen::VectorXd traction_load(const Mesh2D& mesh, const DofLayout& layout, const BoundaryProfile& h) {
    Eigen::VectorXd load = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.condensed_size()));
    if (h.is_zero()) return load;
    const double r = std::sqrt(0.15);
    const double s[3] = {0.5 - r, 0.5, 0.5 + r};
    const double w[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
    const auto& nodes = mesh.nodes();
    for (std::size_t i = 0; i < mesh.boundary().size(); ++i) {
        const auto& e = mesh.boundary()[i];
        if (e.tag != BoundaryTag::Outflow) continue;
        const Vec2 pa = nodes[e.nodes[0]], pb = nodes[e.nodes[1]];
        const double len = norm(pb - pa);
        for (int q = 0; q < 3; ++q) {
            const Vec2 hv = h((1.0 - s[q]) * pa + s[q] * pb);
            const double wa = w[q] * len * (1.0 - s[q]), wb = w[q] * len * s[q];
            load(static_cast<Eigen::Index>(layout.velocity(e.nodes[0], 0))) += wa * hv.x;
            load(static_cast<Eigen::Index>(layout.velocity(e.nodes[0], 1))) += wa * hv.y;
            load(static_cast<Eigen::Index>(layout.velocity(e.nodes[1], 0))) += wb * hv.x;
            load(static_cast<Eigen::Index>(layout.velocity(e.nodes[1], 1))) += wb * hv.y;
        }
    }
    return load;
}

namespace {

void require_outflow(const Mesh2D& mesh) {
    if (!mesh.has_tag(BoundaryTag::Outflow))
        throw ValidationError("mesh has no outflow boundary; the pressure level would be undetermined");
}

std::vector<ElementBlock> flow_blocks(const Mesh2D& mesh, const DofLayout& layout,
                                      const Eigen::VectorXd& u, double nu, bool convection) {
    std::vector<ElementBlock> blocks;
    blocks.reserve(mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        blocks.push_back(element_flow_block(element_geometry(mesh, t), gather_velocity(mesh, layout, u, t),
                                            gather_pressure(mesh, layout, u, t), nu, convection));
    }
    return blocks;
}

Eigen::VectorXd residual_from_blocks(const Mesh2D& mesh, const DofLayout& layout,
                                     const std::vector<ElementBlock>& blocks,
                                     const Eigen::VectorXd& traction, const DirichletSet& bc) {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.size()));
    for (std::size_t t = 0; t < blocks.size(); ++t) {
        const auto dofs = layout.element_dofs(mesh, t);
        for (int i = 0; i < kLocalDofs; ++i) r(static_cast<Eigen::Index>(dofs[i])) += blocks[t].vector(i);
    }
    const auto nv = static_cast<Eigen::Index>(2 * layout.num_nodes());
    r.head(nv) -= traction.head(nv);
    for (auto dof : bc.dofs) r(static_cast<Eigen::Index>(dof)) = 0.0;
    return r;
}

Eigen::VectorXd embed_dirichlet(Eigen::VectorXd u, const DirichletSet& bc) {
    for (std::size_t k = 0; k < bc.dofs.size(); ++k) u(static_cast<Eigen::Index>(bc.dofs[k])) = bc.values[k];
    return u;
}

DirichletSet homogeneous(const DirichletSet& bc) { return {bc.dofs, std::vector<double>(bc.dofs.size(), 0.0)}; }

// One linearized solve at u: returns u + delta with K(u) delta = -R(u).
Eigen::VectorXd linear_update(const Mesh2D& mesh, const DofLayout& layout, const Eigen::VectorXd& u,
                              const FlowConfig& cfg, const Eigen::VectorXd& traction,
                              const DirichletSet& bc, bool convection) {
    auto blocks = flow_blocks(mesh, layout, u, cfg.viscosity, convection);
    for (auto& b : blocks) b.vector = -b.vector;
    return u + solve_condensed(mesh, layout, blocks, traction, homogeneous(bc));
}

struct NewtonOutcome {
    Eigen::VectorXd u;
    int iterations = 0;
    std::vector<double> trace;
};

NewtonOutcome newton(const Mesh2D& mesh, const DofLayout& layout, Eigen::VectorXd u,
                     const FlowConfig& cfg, const Eigen::VectorXd& traction, const DirichletSet& bc) {
    const DirichletSet zero_bc = homogeneous(bc);
    u = embed_dirichlet(std::move(u), bc);
    NewtonOutcome out;
    auto blocks = flow_blocks(mesh, layout, u, cfg.viscosity, true);
    double rn = residual_from_blocks(mesh, layout, blocks, traction, bc).norm();
    out.trace.push_back(rn);
    const double r0 = rn;
    while (rn > cfg.newton_tol) {
        if (out.iterations >= cfg.max_newton || !std::isfinite(rn))
            throw NewtonDiverged("Newton did not converge in " + std::to_string(out.iterations) +
                                     " iterations (residual " + std::to_string(rn) + ")",
                                 out.trace);
        for (auto& b : blocks) b.vector = -b.vector;
        Eigen::VectorXd delta;
        try {
            delta = solve_condensed(mesh, layout, blocks, traction, zero_bc);
        } catch (const SingularSystem& e) {
            throw NewtonDiverged(std::string("singular Jacobian: ") + e.what(), out.trace);
        }
        ++out.iterations;

        // Backtrack on the residual norm; accept the full step when nothing
        // shorter does better.
        double step = 1.0;
        Eigen::VectorXd trial = u + delta;
        auto trial_blocks = flow_blocks(mesh, layout, trial, cfg.viscosity, true);
        double trial_rn = residual_from_blocks(mesh, layout, trial_blocks, traction, bc).norm();
        for (int k = 0; k < 6 && !(trial_rn < rn); ++k) {
            step *= 0.5;
            Eigen::VectorXd t2 = u + step * delta;
            auto b2 = flow_blocks(mesh, layout, t2, cfg.viscosity, true);
            const double rn2 = residual_from_blocks(mesh, layout, b2, traction, bc).norm();
            if (rn2 < trial_rn) {
                trial = std::move(t2);
                trial_blocks = std::move(b2);
                trial_rn = rn2;
            }
        }
        u = std::move(trial);
        blocks = std::move(trial_blocks);
        rn = trial_rn;
        out.trace.push_back(rn);
        if (!std::isfinite(rn) || rn > 1e8 * std::max(r0, cfg.newton_tol))
            throw NewtonDiverged("Newton diverged (residual " + std::to_string(rn) + ")", out.trace);
    }
    out.u = std::move(u);
    return out;
}

} // namespace

FlowState solve_stokes(const Mesh2D& mesh, const FlowConfig& cfg) {
    cfg.validate();
    require_outflow(mesh);
    const DofLayout layout(mesh);
    const DirichletSet bc = flow_dirichlet(mesh, cfg);
    const Eigen::VectorXd traction = traction_load(mesh, layout, cfg.traction);
    Eigen::VectorXd u0 = embed_dirichlet(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.size())), bc);
    FlowState s(linear_update(mesh, layout, u0, cfg, traction, bc, false), mesh.num_nodes(),
                mesh.num_triangles());
    s.residual_trace.push_back(
        residual_from_blocks(mesh, layout, flow_blocks(mesh, layout, s.values, cfg.viscosity, false), traction, bc)
            .norm());
    return s;
}

FlowState solve_navier_stokes(const Mesh2D& mesh, const FlowConfig& cfg, const FlowState* guess) {
    cfg.validate();
    require_outflow(mesh);
    const DofLayout layout(mesh);
    const DirichletSet bc = flow_dirichlet(mesh, cfg);
    const Eigen::VectorXd traction = traction_load(mesh, layout, cfg.traction);

    int spent = 0;
    std::vector<double> trace;
    auto finish = [&](NewtonOutcome&& o) {
        FlowState s(std::move(o.u), mesh.num_nodes(), mesh.num_triangles());
        s.newton_iterations = spent + o.iterations;
        s.residual_trace = std::move(o.trace);
        return s;
    };

    if (guess != nullptr && guess->matches(mesh)) {
        try {
            return finish(newton(mesh, layout, guess->values, cfg, traction, bc));
        } catch (const NewtonDiverged& e) {
            spent += static_cast<int>(e.trace().size()) - 1;
        }
    }

    const Eigen::VectorXd u0 =
        embed_dirichlet(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.size())), bc);
    const Eigen::VectorXd stokes = linear_update(mesh, layout, u0, cfg, traction, bc, false);
    try {
        return finish(newton(mesh, layout, stokes, cfg, traction, bc));
    } catch (const NewtonDiverged& e) {
        if (cfg.continuation_steps == 0) throw;
        spent += static_cast<int>(e.trace().size()) - 1;
        trace = e.trace();
    }

    // Continuation: nu_k = nu * 2^(n-k), k = 0..n.
    Eigen::VectorXd u = stokes;
    FlowConfig step_cfg = cfg;
    for (int k = 0; k <= cfg.continuation_steps; ++k) {
        step_cfg.viscosity = cfg.viscosity * std::ldexp(1.0, cfg.continuation_steps - k);
        NewtonOutcome o = newton(mesh, layout, u, step_cfg, traction, bc);
        if (k == cfg.continuation_steps) {
            FlowState s = finish(std::move(o));
            s.continuation_stages = cfg.continuation_steps;
            return s;
        }
        spent += o.iterations;
        u = std::move(o.u);
    }
    throw NewtonDiverged("continuation failed", trace);
}

FlowState solve_flow(const Mesh2D& mesh, const FlowConfig& cfg, const FlowState* guess) {
    return cfg.model == FlowModel::Stokes ? solve_stokes(mesh, cfg) : solve_navier_stokes(mesh, cfg, guess);
}

double dissipated_energy(const Mesh2D& mesh, const MixedField& state, double nu) {
    if (!state.matches(mesh)) throw ValidationError("state does not belong to this mesh");
    const DofLayout layout(mesh);
    double j = 0.0;
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const LocalVelocity y = gather_velocity(mesh, layout, state.values, t);
        for (const auto& q : triangle_rule().points) {
            const Strain e = strain_at(eval_basis(g, q.bary), y);
            j += 2.0 * g.area * q.weight * e.contract(e);
        }
    }
    return 2.0 * nu * j;
}

Eigen::VectorXd flow_residual(const Mesh2D& mesh, const Eigen::VectorXd& state, const FlowConfig& cfg) {
    const DofLayout layout(mesh);
    const bool convection = cfg.model == FlowModel::NavierStokes;
    return residual_from_blocks(mesh, layout, flow_blocks(mesh, layout, state, cfg.viscosity, convection),
                                traction_load(mesh, layout, cfg.traction), flow_dirichlet(mesh, cfg));
}

double residual_norm(const Mesh2D& mesh, const MixedField& state, const FlowConfig& cfg) {
    if (!state.matches(mesh)) throw ValidationError("state does not belong to this mesh");
    return flow_residual(mesh, state.values, cfg).norm();
}

} // namespace adjflow
