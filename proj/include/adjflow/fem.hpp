#pragma once

#include "adjflow/mesh.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cstddef>
#include <vector>

namespace adjflow {

// ---------------------------------------------------------------------------
// Quadrature

struct QuadraturePoint {
    std::array<double, 3> bary;
    /// Weight on the reference triangle (weights sum to 1/2).
    double weight;
};

struct QuadratureRule {
    std::vector<QuadraturePoint> points;
    int degree;
};

/// Six-point symmetric rule, exact for polynomials of degree <= 4.
const QuadratureRule& triangle_rule();

// ---------------------------------------------------------------------------
// MINI element (P1 + cubic bubble velocity, P1 pressure)
//
// Local scalar basis: lambda_0, lambda_1, lambda_2, bubble = 27 l0 l1 l2.
// Local velocity dof (a, c) -> 2a + c, so bubbles sit at 6 and 7; pressure
// dofs follow at 8, 9, 10.

inline constexpr int kLocalVelocity = 8;
inline constexpr int kLocalDofs = 11;

using Mat8 = Eigen::Matrix<double, 8, 8>;
using Vec8 = Eigen::Matrix<double, 8, 1>;
using Mat11 = Eigen::Matrix<double, kLocalDofs, kLocalDofs>;
using Vec11 = Eigen::Matrix<double, kLocalDofs, 1>;
using Mat3x8 = Eigen::Matrix<double, 3, 8>;

struct ElementGeometry {
    std::array<Vec2, 3> grad_lambda;
    double area;
};

ElementGeometry element_geometry(const Mesh2D& mesh, std::size_t t);

struct BasisValues {
    std::array<double, 4> value;
    std::array<Vec2, 4> grad;
};

BasisValues eval_basis(const ElementGeometry& g, const std::array<double, 3>& bary);

/// Velocity coefficients on one element: three nodal vectors then the bubble.
using LocalVelocity = std::array<Vec2, 4>;

/// 2 nu * int eps(u):eps(w).
Mat8 element_viscous(const ElementGeometry& g, double nu);
/// Row i: int lambda_i div(w) for each local velocity basis w.
Mat3x8 element_divergence(const ElementGeometry& g);

struct ConvectionBlocks {
    /// int (Du . y) . w
    Mat8 advect;
    /// int (Dy . u) . w
    Mat8 reaction;
};

ConvectionBlocks element_convection(const ElementGeometry& g, const LocalVelocity& y);
/// int (Dy . y) . w for each local velocity basis w.
Vec8 element_convection_vector(const ElementGeometry& g, const LocalVelocity& y);

/// Local Jacobian and residual of the steady Navier-Stokes form at (y, p),
/// without boundary terms. Pressure rows carry -int q div y.
struct ElementBlock {
    Mat11 matrix;
    Vec11 vector;
};

ElementBlock element_flow_block(const ElementGeometry& g, const LocalVelocity& y,
                                const std::array<double, 3>& p, double nu, bool convection);

/// Bubble-eliminated element: (K_xx + K_xb R) x = f_x - K_xb r, with the
/// bubble recovered as b = r + R x. x is the 9-vector of nodal velocity and
/// pressure dofs in local order (0..5 velocity, 6..8 pressure).
struct CondensedBlock {
    Eigen::Matrix<double, 9, 9> matrix;
    Eigen::Matrix<double, 9, 1> vector;
    Eigen::Matrix<double, 2, 9> recover_matrix;
    Eigen::Vector2d recover_offset;

    Eigen::Vector2d recover(const Eigen::Matrix<double, 9, 1>& x) const {
        return recover_offset + recover_matrix * x;
    }
};

/// Throws SingularSystem if the 2x2 bubble block is singular.
CondensedBlock condense_bubbles(const ElementBlock& block);

// ---------------------------------------------------------------------------
// Global layout

/// Full layout: [2 per node velocity | 2 per element bubble | 1 per node
/// pressure]. The condensed layout drops the bubble range.
class DofLayout {
public:
    explicit DofLayout(const Mesh2D& mesh);

    std::size_t num_nodes() const noexcept { return nodes_; }
    std::size_t num_elements() const noexcept { return elements_; }

    std::size_t velocity(std::size_t node, int comp) const { return 2 * node + static_cast<std::size_t>(comp); }
    std::size_t bubble(std::size_t elem, int comp) const {
        return 2 * nodes_ + 2 * elem + static_cast<std::size_t>(comp);
    }
    std::size_t pressure(std::size_t node) const { return 2 * nodes_ + 2 * elements_ + node; }
    std::size_t size() const noexcept { return 3 * nodes_ + 2 * elements_; }

    std::size_t condensed_pressure(std::size_t node) const { return 2 * nodes_ + node; }
    std::size_t condensed_size() const noexcept { return 3 * nodes_; }

    /// Full-layout indices of the 11 local dofs of element t.
    std::array<std::size_t, kLocalDofs> element_dofs(const Mesh2D& mesh, std::size_t t) const;
    /// Condensed-layout indices of the 9 nodal dofs of element t.
    std::array<std::size_t, 9> condensed_element_dofs(const Mesh2D& mesh, std::size_t t) const;

    /// Per velocity dof (first 2N indices): true when the node lies on an
    /// Inflow, Wall or Free edge and may therefore carry a Dirichlet value.
    const std::vector<bool>& dirichlet_allowed() const noexcept { return allowed_; }

private:
    std::size_t nodes_;
    std::size_t elements_;
    std::vector<bool> allowed_;
};

struct DirichletSet {
    std::vector<std::size_t> dofs;
    std::vector<double> values;
};

struct SparseSystem {
    Eigen::SparseMatrix<double> matrix;
    Eigen::VectorXd rhs;
    double tolerance = 1e-10;
};

/// Constrained rows become identity rows carrying the prescribed value; the
/// constrained columns are lifted into the right-hand side. `allowed` (indexed
/// by dof, may be shorter than the system) rejects constraints on dofs
/// outside it with ValidationError.
SparseSystem apply_dirichlet(const SparseSystem& system, const DirichletSet& bc,
                             const std::vector<bool>& allowed);

/// Direct sparse LU. Throws SingularSystem on factorization failure or when
/// the relative residual exceeds system.tolerance.
Eigen::VectorXd solve_linear(const SparseSystem& system);

// ---------------------------------------------------------------------------
// Global blocks (full layout velocity range: 2N nodal + 2E bubble)

Eigen::SparseMatrix<double> assemble_viscous(const Mesh2D& mesh, double nu);
/// N x (2N + 2E): row i holds int q_i div(u).
Eigen::SparseMatrix<double> assemble_divergence(const Mesh2D& mesh);

struct GlobalConvection {
    Eigen::SparseMatrix<double> advect;
    Eigen::SparseMatrix<double> reaction;
};
/// `velocity` is a full-layout vector (only its velocity range is read).
GlobalConvection assemble_convection(const Mesh2D& mesh, const Eigen::VectorXd& velocity);
/// Assembled int (Dy . y) . w over the velocity range.
Eigen::VectorXd assemble_convection_vector(const Mesh2D& mesh, const Eigen::VectorXd& velocity);

LocalVelocity gather_velocity(const Mesh2D& mesh, const DofLayout& layout,
                              const Eigen::VectorXd& full, std::size_t t);
std::array<double, 3> gather_pressure(const Mesh2D& mesh, const DofLayout& layout,
                                      const Eigen::VectorXd& full, std::size_t t);

/// Assembles per-element blocks plus an extra condensed right-hand side,
/// condenses the bubbles, applies `bc`, solves and returns the full-layout
/// solution with recovered bubbles.
Eigen::VectorXd solve_condensed(const Mesh2D& mesh, const DofLayout& layout,
                                const std::vector<ElementBlock>& blocks,
                                const Eigen::VectorXd& extra_rhs, const DirichletSet& bc,
                                double tolerance = 1e-10);

/// Same system solved with the bubbles kept as global unknowns.
Eigen::VectorXd solve_uncondensed(const Mesh2D& mesh, const DofLayout& layout,
                                  const std::vector<ElementBlock>& blocks,
                                  const Eigen::VectorXd& extra_rhs, const DirichletSet& bc,
                                  double tolerance = 1e-10);

} // namespace adjflow
