#pragma once

#include "adjflow/fem.hpp"
#include "adjflow/mesh.hpp"

#include <Eigen/Dense>

#include <vector>

namespace adjflow {

/// Polynomial in one boundary coordinate, ascending coefficients.
struct Polynomial {
    std::vector<double> coeffs;

    double operator()(double s) const {
        double v = 0.0;
        for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) v = v * s + *it;
        return v;
    }
    bool is_zero() const {
        for (double c : coeffs)
            if (c != 0.0) return false;
        return true;
    }
};

enum class Axis { X, Y };

/// Vector-valued boundary data: both components are polynomials of the same
/// coordinate (y for vertical boundaries, x for horizontal ones).
struct BoundaryProfile {
    Polynomial x;
    Polynomial y;
    Axis coordinate = Axis::Y;

    Vec2 operator()(Vec2 p) const {
        const double s = coordinate == Axis::X ? p.x : p.y;
        return {x(s), y(s)};
    }
    bool is_zero() const { return x.is_zero() && y.is_zero(); }
};

enum class FlowModel { Stokes, NavierStokes };

struct FlowConfig {
    /// Kinematic viscosity nu.
    double viscosity = 1.0;
    /// Velocity g on Inflow.
    BoundaryProfile inflow;
    /// Traction sigma(y,p).n = h on Outflow.
    BoundaryProfile traction;
    double newton_tol = 1e-10;
    int max_newton = 25;
    /// Viscosity halvings walked down when Newton fails from the Stokes guess.
    int continuation_steps = 4;
    FlowModel model = FlowModel::NavierStokes;

    /// Throws ValidationError naming the offending field.
    void validate() const;
};

/// Full-layout mixed field: nodal velocity, element bubbles, nodal pressure.
struct MixedField {
    Eigen::VectorXd values;
    std::size_t num_nodes = 0;
    std::size_t num_elements = 0;

    MixedField() = default;
    MixedField(Eigen::VectorXd v, std::size_t nodes, std::size_t elements)
        : values(std::move(v)), num_nodes(nodes), num_elements(elements) {}

    Vec2 velocity(std::size_t node) const {
        return {values(static_cast<Eigen::Index>(2 * node)), values(static_cast<Eigen::Index>(2 * node + 1))};
    }
    Vec2 bubble(std::size_t elem) const {
        const auto base = static_cast<Eigen::Index>(2 * num_nodes + 2 * elem);
        return {values(base), values(base + 1)};
    }
    double pressure(std::size_t node) const {
        return values(static_cast<Eigen::Index>(2 * num_nodes + 2 * num_elements + node));
    }
    /// Nodal velocity part only (2N entries).
    Eigen::VectorXd nodal_velocity() const { return values.head(static_cast<Eigen::Index>(2 * num_nodes)); }
    Eigen::VectorXd nodal_pressure() const { return values.tail(static_cast<Eigen::Index>(num_nodes)); }

    bool matches(const Mesh2D& mesh) const {
        return num_nodes == mesh.num_nodes() && num_elements == mesh.num_triangles() &&
               static_cast<std::size_t>(values.size()) == 3 * num_nodes + 2 * num_elements;
    }
};

/// Discrete (y, p).
struct FlowState : MixedField {
    using MixedField::MixedField;
    /// Linear solves spent in Newton (0 for a Stokes solve).
    int newton_iterations = 0;
    /// Nonlinear residual norm before each Newton update and at the end.
    std::vector<double> residual_trace;
    /// Viscosity levels walked through before the target one (0 when Newton
    /// converged directly).
    int continuation_stages = 0;
};

/// Symmetric 2x2 tensor.
struct Strain {
    double xx = 0.0, xy = 0.0, yy = 0.0;

    double contract(const Strain& o) const { return xx * o.xx + 2.0 * xy * o.xy + yy * o.yy; }
};

Strain strain_at(const BasisValues& b, const LocalVelocity& y);

/// Dirichlet data of the state: g on Inflow nodes, zero on Wall and Free nodes
/// (Wall/Free win at shared corners).
DirichletSet flow_dirichlet(const Mesh2D& mesh, const FlowConfig& cfg);

/// Condensed-layout load int_{Outflow} h . w ds.
Eigen::VectorXd traction_load(const Mesh2D& mesh, const DofLayout& layout, const BoundaryProfile& h);

/// Full-layout nonlinear residual; rows of Dirichlet-constrained dofs are zero.
Eigen::VectorXd flow_residual(const Mesh2D& mesh, const Eigen::VectorXd& state, const FlowConfig& cfg);

FlowState solve_stokes(const Mesh2D& mesh, const FlowConfig& cfg);

/// Newton on the full residual from the Stokes solution (or `guess`), with
/// backtracking; falls back to viscosity continuation. Throws NewtonDiverged.
FlowState solve_navier_stokes(const Mesh2D& mesh, const FlowConfig& cfg,
                              const FlowState* guess = nullptr);

/// Dispatches on cfg.model.
FlowState solve_flow(const Mesh2D& mesh, const FlowConfig& cfg, const FlowState* guess = nullptr);

/// J = 2 nu int |eps(y)|^2, bubbles included.
double dissipated_energy(const Mesh2D& mesh, const MixedField& state, double nu);

double residual_norm(const Mesh2D& mesh, const MixedField& state, const FlowConfig& cfg);

} // namespace adjflow
