#include "adjflow/shape_opt.hpp"

#include "adjflow/error.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace adjflow {

double BoundaryGradient::norm() const {
    double s = 0.0;
    for (std::size_t i = 0; i < size(); ++i) s += weights[i] * density[i] * density[i];
    return std::sqrt(s);
}

BoundaryGradient BoundaryGradient::shifted(double l) const {
    BoundaryGradient g = *this;
    for (double& v : g.density) v += l;
    return g;
}

BoundaryGradient free_boundary(const Mesh2D& mesh) {
    if (!mesh.has_tag(BoundaryTag::Free)) throw ValidationError("mesh has no free boundary");
    BoundaryGradient g;
    g.nodes = mesh.tagged_nodes(BoundaryTag::Free);
    const auto normals = boundary_normals(mesh, BoundaryTag::Free);
    g.normals.reserve(normals.size());
    for (const auto& n : normals) g.normals.push_back(n.normal);
    g.density.assign(g.nodes.size(), 0.0);
    g.weights.assign(g.nodes.size(), 0.0);
    std::vector<std::size_t> slot(mesh.num_nodes(), 0);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) slot[g.nodes[i]] = i;
    for (std::size_t e = 0; e < mesh.boundary().size(); ++e) {
        if (mesh.boundary()[e].tag != BoundaryTag::Free) continue;
        const double half = 0.5 * mesh.edge_length(e);
        for (auto n : mesh.boundary()[e].nodes) g.weights[slot[n]] += half;
    }
    return g;
}

BoundaryGradient shape_gradient(const Mesh2D& mesh, const MixedField& state, const MixedField& adj, double nu) {
    if (!state.matches(mesh) || !adj.matches(mesh))
        throw ValidationError("state or adjoint does not belong to this mesh");
    BoundaryGradient g = free_boundary(mesh);
    const DofLayout layout(mesh);
    std::vector<double> cache(mesh.num_triangles(), std::nan(""));
    auto element_integral = [&](std::size_t t) {
        if (!std::isnan(cache[t])) return cache[t];
        const ElementGeometry geo = element_geometry(mesh, t);
        const LocalVelocity y = gather_velocity(mesh, layout, state.values, t);
        const LocalVelocity v = gather_velocity(mesh, layout, adj.values, t);
        double s = 0.0;
        for (const auto& q : triangle_rule().points) {
            const BasisValues b = eval_basis(geo, q.bary);
            const Strain ey = strain_at(b, y), ev = strain_at(b, v);
            s += 2.0 * geo.area * q.weight * (ey.contract(ev) - ey.contract(ey));
        }
        return cache[t] = s;
    };
    for (std::size_t i = 0; i < g.size(); ++i) {
        double num = 0.0, den = 0.0;
        for (auto t : mesh.node_triangles()[g.nodes[i]]) {
            num += element_integral(t);
            den += mesh.signed_area(t);
        }
        g.density[i] = 2.0 * nu * num / den;
    }
    return g;
}

double eulerian_derivative(const BoundaryGradient& grad, const DisplacementField& v) {
    double s = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (grad.nodes[i] >= v.size()) throw ValidationError("displacement field is too short");
        s += grad.weights[i] * grad.density[i] * dot(v.values[grad.nodes[i]], grad.normals[i]);
    }
    return s;
}

double balance_multiplier(const BoundaryGradient& grad) {
    if (grad.size() == 0) throw ValidationError("empty free boundary");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        num += grad.weights[i] * grad.density[i];
        den += grad.weights[i];
    }
    return -num / den;
}

double update_multiplier(double lk, double l, double vk, double v_target, double eps, VolumeFeedback mode) {
    if (!(v_target > 0.0)) throw ValidationError("target volume must be positive");
    const double dv = mode == VolumeFeedback::Absolute ? std::abs(vk - v_target) : vk - v_target;
    return 0.5 * (lk + l) + eps * dv / v_target;
}

namespace {

// P1 stiffness plus consistent mass.
Eigen::SparseMatrix<double> helmholtz_matrix(const Mesh2D& mesh) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(9 * mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const auto& tri = mesh.triangles()[t];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                trips.emplace_back(static_cast<Eigen::Index>(tri[i]), static_cast<Eigen::Index>(tri[j]),
                                   g.area * dot(g.grad_lambda[i], g.grad_lambda[j]) +
                                       g.area / 12.0 * (i == j ? 2.0 : 1.0));
    }
    const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
    Eigen::SparseMatrix<double> k(n, n);
    k.setFromTriplets(trips.begin(), trips.end());
    return k;
}

} // namespace

DisplacementField smooth_descent(const Mesh2D& mesh, const BoundaryGradient& total) {
    const auto fixed = mesh.fixed_node_mask();
    std::vector<Eigen::Index> index(mesh.num_nodes(), -1);
    Eigen::Index nfree = 0;
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i)
        if (!fixed[i]) index[i] = nfree++;

    DisplacementField d = DisplacementField::zero(mesh.num_nodes());
    if (nfree == 0) return d;

    const Eigen::SparseMatrix<double> full = helmholtz_matrix(mesh);
    std::vector<Eigen::Triplet<double>> trips;
    for (int k = 0; k < full.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(full, k); it; ++it)
            if (index[it.row()] >= 0 && index[it.col()] >= 0)
                trips.emplace_back(index[it.row()], index[it.col()], it.value());
    Eigen::SparseMatrix<double> a(nfree, nfree);
    a.setFromTriplets(trips.begin(), trips.end());

    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nfree, 2);
    for (std::size_t i = 0; i < total.size(); ++i) {
        const Eigen::Index r = index[total.nodes[i]];
        if (r < 0) continue;
        const double s = -total.weights[i] * total.density[i];
        rhs(r, 0) += s * total.normals[i].x;
        rhs(r, 1) += s * total.normals[i].y;
    }
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
    if (solver.info() != Eigen::Success) throw SingularSystem("smoothing system could not be factored");
    const Eigen::MatrixXd x = solver.solve(rhs);
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i)
        if (index[i] >= 0) d.values[i] = {x(index[i], 0), x(index[i], 1)};
    return d;
}

double h1_inner(const Mesh2D& mesh, const DisplacementField& a, const DisplacementField& b) {
    if (a.size() != mesh.num_nodes() || b.size() != mesh.num_nodes())
        throw ValidationError("displacement size does not match the mesh");
    const Eigen::SparseMatrix<double> k = helmholtz_matrix(mesh);
    const auto n = static_cast<Eigen::Index>(mesh.num_nodes());
    Eigen::VectorXd ax(n), ay(n), bx(n), by(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        ax(i) = a.values[static_cast<std::size_t>(i)].x;
        ay(i) = a.values[static_cast<std::size_t>(i)].y;
        bx(i) = b.values[static_cast<std::size_t>(i)].x;
        by(i) = b.values[static_cast<std::size_t>(i)].y;
    }
    return ax.dot(k * bx) + ay.dot(k * by);
}

double step_control(const Mesh2D& mesh, double h, const DisplacementField& current,
                    const DisplacementField* previous, bool inverted, const StepRule& rule) {
    double next = h;
    if (inverted) {
        next = rule.decrease * h;
    } else if (previous != nullptr) {
        const double ab = h1_inner(mesh, current, *previous);
        const double aa = h1_inner(mesh, current, current);
        const double bb = h1_inner(mesh, *previous, *previous);
        if (ab < 0.0) next = rule.decrease * h;
        else if (aa > 0.0 && bb > 0.0 && ab / std::sqrt(aa * bb) > rule.alignment)
            next = std::min(rule.increase * h, rule.max);
    }
    return std::clamp(next, rule.min, rule.max);
}

void OptimConfig::validate() const {
    if (!(step0 > 0.0)) throw ValidationError("optimize.step0 must be positive");
    if (!(epsilon >= 0.0)) throw ValidationError("optimize.epsilon must be >= 0");
    if (!(target_volume > 0.0)) throw ValidationError("optimize.target_volume must be positive");
    if (max_iters < 0) throw ValidationError("optimize.max_iters must be >= 0");
    if (!(step.min > 0.0) || !(step.min <= step0) || !(step0 <= step.max))
        throw ValidationError("optimize.step_bounds must satisfy 0 < min <= step0 <= max");
    if (!(step.decrease > 0.0 && step.decrease < 1.0))
        throw ValidationError("optimize.step_decrease must lie in (0,1)");
    if (!(step.increase >= 1.0)) throw ValidationError("optimize.step_increase must be >= 1");
    if (!(step.alignment >= -1.0 && step.alignment <= 1.0))
        throw ValidationError("optimize.alignment must lie in [-1,1]");
    if (retry_cap < 1) throw ValidationError("optimize.retry_cap must be >= 1");
}

OptimizeResult optimize(const Mesh2D& mesh0, const FlowConfig& flow, const OptimConfig& opt) {
    flow.validate();
    opt.validate();
    OptimizeResult out{mesh0, {}, 0.0, 0.0, false};
    if (opt.max_iters == 0) {
        const FlowState s = solve_flow(mesh0, flow);
        out.initial_energy = out.final_energy = dissipated_energy(mesh0, s, flow.viscosity);
        return out;
    }

    Mesh2D mesh = mesh0;
    FlowState state = solve_flow(mesh, flow);
    double energy = dissipated_energy(mesh, state, flow.viscosity);
    out.initial_energy = energy;
    double lk = opt.multiplier0;
    double h = opt.step0;
    std::optional<DisplacementField> previous;

    for (int it = 1; it <= opt.max_iters; ++it) {
        const AdjointState adj = solve_adjoint(mesh, state, flow);
        const BoundaryGradient grad = shape_gradient(mesh, state, adj, flow.viscosity);
        if (it == 1 && opt.balance_multiplier0) lk = balance_multiplier(grad);
        const BoundaryGradient total = grad.shifted(lk);
        const DisplacementField d = smooth_descent(mesh, total);
        const double slope = eulerian_derivative(total, d);
        if (slope > 1e-12 * std::max(1.0, total.norm() * total.norm()))
            throw SolverError("smoothed direction is not a descent direction");
        const double vk = volume(mesh);
        const double lnext = update_multiplier(lk, balance_multiplier(grad), vk, opt.target_volume,
                                               opt.epsilon, opt.feedback);
        h = step_control(mesh, h, d, previous ? &*previous : nullptr, false, opt.step);

        bool accepted = false;
        for (int attempt = 0; !accepted; ++attempt) {
            if (attempt == opt.retry_cap) {
                out.partial = true;
                break;
            }
            IterationRecord rec;
            rec.iter = it;
            rec.multiplier = lk;
            rec.step = h;
            rec.grad_norm = total.norm();
            rec.energy = energy;
            rec.volume = vk;
            try {
                Mesh2D trial = deform(mesh, d, h);
                FlowState next = solve_flow(trial, flow, &state);
                const double e = dissipated_energy(trial, next, flow.viscosity);
                rec.energy = e;
                rec.volume = volume(trial);
                rec.newton_iters = next.newton_iterations;
                if (!(opt.reject_increase && e > energy)) {
                    accepted = true;
                    mesh = std::move(trial);
                    state = std::move(next);
                    energy = e;
                }
            } catch (const InvertedElement&) {
            } catch (const SolverError&) {
            }
            rec.accepted = accepted;
            out.history.push_back(rec);
            if (!accepted) h = step_control(mesh, h, d, nullptr, true, opt.step);
        }
        if (out.partial) break;
        lk = lnext;
        previous = d;
    }
    out.final_mesh = std::move(mesh);
    out.final_energy = energy;
    return out;
}

DisplacementField radial_perturbation(const Mesh2D& mesh, const RadialPerturbation& p) {
    if (!(p.outer > p.inner)) throw ValidationError("radial perturbation needs outer > inner");
    const auto fixed = mesh.fixed_node_mask();
    DisplacementField v = DisplacementField::zero(mesh.num_nodes());
    for (std::size_t i = 0; i < mesh.num_nodes(); ++i) {
        if (fixed[i]) continue;
        const Vec2 r = mesh.nodes()[i] - p.center;
        const double rho = norm(r);
        if (rho >= p.outer || rho == 0.0) continue;
        double cut = 1.0;
        if (rho > p.inner) {
            const double c = std::cos(0.5 * std::numbers::pi * (rho - p.inner) / (p.outer - p.inner));
            cut = c * c;
        }
        const double theta = std::atan2(r.y, r.x);
        const double a = (p.mean + p.amplitude * std::cos(p.mode * theta)) * cut / rho;
        v.values[i] = a * r;
    }
    return v;
}

GradientCheckReport gradient_check(const Mesh2D& mesh, const FlowConfig& flow, const DisplacementField& v,
                                   const std::vector<double>& ts) {
    validate_displacement(mesh, v);
    GradientCheckReport rep;
    const FlowState state = solve_flow(mesh, flow);
    rep.energy = dissipated_energy(mesh, state, flow.viscosity);
    const AdjointState adj = solve_adjoint(mesh, state, flow);
    rep.analytic = eulerian_derivative(shape_gradient(mesh, state, adj, flow.viscosity), v);

    auto energy_at = [&](double t) {
        const Mesh2D m = deform(mesh, v, t);
        return dissipated_energy(m, solve_flow(m, flow, &state), flow.viscosity);
    };
    for (double t : ts) {
        if (!(t > 0.0)) throw ValidationError("gradient check steps must be positive");
        GradientCheckEntry e;
        e.t = t;
        e.energy_plus = energy_at(t);
        e.energy_minus = energy_at(-t);
        e.finite_difference = (e.energy_plus - e.energy_minus) / (2.0 * t);
        const double diff = std::abs(e.finite_difference - rep.analytic);
        e.rel_error = rep.analytic != 0.0 ? diff / std::abs(rep.analytic) : diff;
        rep.entries.push_back(e);
    }
    for (std::size_t i = 1; i < rep.entries.size(); ++i) {
        const auto& a = rep.entries[i - 1];
        const auto& b = rep.entries[i];
        rep.orders.push_back(a.rel_error > 0.0 && b.rel_error > 0.0
                                 ? std::log(a.rel_error / b.rel_error) / std::log(a.t / b.t)
                                 : 0.0);
    }
    return rep;
}

} // namespace adjflow
