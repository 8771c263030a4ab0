#include "adjflow/adjoint.hpp"

#include "adjflow/error.hpp"

namespace adjflow {

DirichletSet adjoint_dirichlet(const Mesh2D& mesh) {
    std::vector<char> fixed(mesh.num_nodes(), 0);
    for (const auto& e : mesh.boundary())
        if (e.tag != BoundaryTag::Outflow) fixed[e.nodes[0]] = fixed[e.nodes[1]] = 1;
    DirichletSet bc;
    for (std::size_t n = 0; n < mesh.num_nodes(); ++n) {
        if (!fixed[n]) continue;
        bc.dofs.push_back(2 * n);
        bc.dofs.push_back(2 * n + 1);
    }
    bc.values.assign(bc.dofs.size(), 0.0);
    return bc;
}

std::vector<ElementBlock> adjoint_blocks(const Mesh2D& mesh, const FlowState& state, const FlowConfig& cfg) {
    if (!state.matches(mesh)) throw ValidationError("state does not belong to this mesh");
    const DofLayout layout(mesh);
    const bool convection = cfg.model == FlowModel::NavierStokes;
    std::vector<ElementBlock> blocks;
    blocks.reserve(mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const ElementGeometry g = element_geometry(mesh, t);
        const LocalVelocity y = gather_velocity(mesh, layout, state.values, t);
        ElementBlock b = element_flow_block(g, y, gather_pressure(mesh, layout, state.values, t),
                                            cfg.viscosity, convection);
        b.matrix.transposeInPlace();
        Vec8 yl;
        for (int a = 0; a < 4; ++a) {
            yl(2 * a) = y[a].x;
            yl(2 * a + 1) = y[a].y;
        }
        b.vector.setZero();
        b.vector.head<8>() = 2.0 * (element_viscous(g, cfg.viscosity) * yl);
        blocks.push_back(std::move(b));
    }
    return blocks;
}

AdjointState solve_adjoint(const Mesh2D& mesh, const FlowState& state, const FlowConfig& cfg) {
    cfg.validate();
    const DofLayout layout(mesh);
    Eigen::VectorXd v = solve_condensed(mesh, layout, adjoint_blocks(mesh, state, cfg), Eigen::VectorXd(),
                                        adjoint_dirichlet(mesh));
    return AdjointState(std::move(v), mesh.num_nodes(), mesh.num_triangles());
}

double adjoint_residual(const Mesh2D& mesh, const FlowState& state, const MixedField& adj,
                        const FlowConfig& cfg) {
    if (!adj.matches(mesh)) throw ValidationError("adjoint does not belong to this mesh");
    const DofLayout layout(mesh);
    const auto blocks = adjoint_blocks(mesh, state, cfg);
    Eigen::VectorXd r = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.size()));
    for (std::size_t t = 0; t < blocks.size(); ++t) {
        const auto dofs = layout.element_dofs(mesh, t);
        Vec11 local;
        for (int i = 0; i < kLocalDofs; ++i) local(i) = adj.values(static_cast<Eigen::Index>(dofs[i]));
        const Vec11 re = blocks[t].matrix * local - blocks[t].vector;
        for (int i = 0; i < kLocalDofs; ++i) r(static_cast<Eigen::Index>(dofs[i])) += re(i);
    }
    for (auto dof : adjoint_dirichlet(mesh).dofs) r(static_cast<Eigen::Index>(dof)) = 0.0;
    return r.norm();
}

} // namespace adjflow
