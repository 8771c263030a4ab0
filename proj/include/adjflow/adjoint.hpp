#pragma once

#include "adjflow/flow.hpp"

namespace adjflow {

/// Discrete (v, q), same layout as the state.
struct AdjointState : MixedField {
    using MixedField::MixedField;
};

/// Zero on every node of an Inflow, Wall or Free edge.
DirichletSet adjoint_dirichlet(const Mesh2D& mesh);

/// Element blocks of the adjoint: transposed state Jacobian at (y, p), right
/// side 4 nu int eps(y):eps(phi) on velocity rows.
std::vector<ElementBlock> adjoint_blocks(const Mesh2D& mesh, const FlowState& state, const FlowConfig& cfg);

/// Throws SingularSystem when the transposed Jacobian cannot be factored.
AdjointState solve_adjoint(const Mesh2D& mesh, const FlowState& state, const FlowConfig& cfg);

/// Norm of the adjoint residual at (v, q) over unconstrained rows.
double adjoint_residual(const Mesh2D& mesh, const FlowState& state, const MixedField& adj,
                        const FlowConfig& cfg);

} // namespace adjflow
