#include "adjflow/fem.hpp"

#include "adjflow/error.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <string>

namespace adjflow {

const QuadratureRule& triangle_rule() {
    static const QuadratureRule rule = [] {
        constexpr double a1 = 0.445948490915964886, w1 = 0.223381589678011466;
        constexpr double a2 = 0.091576213509770743, w2 = 0.109951743655321868;
        QuadratureRule r{{}, 4};
        for (auto [a, w] : {std::pair{a1, w1}, std::pair{a2, w2}}) {
            const double b = 1.0 - 2.0 * a;
            r.points.push_back({{b, a, a}, 0.5 * w});
            r.points.push_back({{a, b, a}, 0.5 * w});
            r.points.push_back({{a, a, b}, 0.5 * w});
        }
        return r;
    }();
    return rule;
}

ElementGeometry element_geometry(const Mesh2D& mesh, std::size_t t) {
    const auto& tri = mesh.triangles()[t];
    const auto& n = mesh.nodes();
    const Vec2 p[3] = {n[tri[0]], n[tri[1]], n[tri[2]]};
    const double twice = cross(p[1] - p[0], p[2] - p[0]);
    ElementGeometry g{};
    g.area = 0.5 * twice;
    for (int i = 0; i < 3; ++i) {
        const Vec2 pj = p[(i + 1) % 3], pk = p[(i + 2) % 3];
        g.grad_lambda[i] = {(pj.y - pk.y) / twice, (pk.x - pj.x) / twice};
    }
    return g;
}

BasisValues eval_basis(const ElementGeometry& g, const std::array<double, 3>& l) {
    BasisValues b{};
    for (int i = 0; i < 3; ++i) {
        b.value[i] = l[i];
        b.grad[i] = g.grad_lambda[i];
    }
    b.value[3] = 27.0 * l[0] * l[1] * l[2];
    b.grad[3] = 27.0 * (l[1] * l[2] * g.grad_lambda[0] + l[0] * l[2] * g.grad_lambda[1] +
                        l[0] * l[1] * g.grad_lambda[2]);
    return b;
}

namespace {

double component(Vec2 v, int c) { return c == 0 ? v.x : v.y; }

struct PointVelocity {
    Vec2 value;
    // grad[c] = gradient of component c
    std::array<Vec2, 2> grad;
};

PointVelocity eval_velocity(const BasisValues& b, const LocalVelocity& y) {
    PointVelocity out{};
    for (int a = 0; a < 4; ++a) {
        out.value = out.value + b.value[a] * y[a];
        out.grad[0] = out.grad[0] + y[a].x * b.grad[a];
        out.grad[1] = out.grad[1] + y[a].y * b.grad[a];
    }
    return out;
}

} // namespace

Mat8 element_viscous(const ElementGeometry& g, double nu) {
    Mat8 k = Mat8::Zero();
    for (const auto& q : triangle_rule().points) {
        const BasisValues b = eval_basis(g, q.bary);
        const double w = 2.0 * g.area * q.weight * nu;
        for (int a = 0; a < 4; ++a)
            for (int bb = 0; bb < 4; ++bb) {
                const double gg = dot(b.grad[a], b.grad[bb]);
                for (int c = 0; c < 2; ++c)
                    for (int d = 0; d < 2; ++d) {
                        const double v = (c == d ? gg : 0.0) +
                                         component(b.grad[a], d) * component(b.grad[bb], c);
                        k(2 * a + c, 2 * bb + d) += w * v;
                    }
            }
    }
    return k;
}

Mat3x8 element_divergence(const ElementGeometry& g) {
    Mat3x8 d = Mat3x8::Zero();
    for (const auto& q : triangle_rule().points) {
        const BasisValues b = eval_basis(g, q.bary);
        const double w = 2.0 * g.area * q.weight;
        for (int i = 0; i < 3; ++i)
            for (int a = 0; a < 4; ++a)
                for (int c = 0; c < 2; ++c) d(i, 2 * a + c) += w * q.bary[i] * component(b.grad[a], c);
    }
    return d;
}

ConvectionBlocks element_convection(const ElementGeometry& g, const LocalVelocity& y) {
    ConvectionBlocks out{Mat8::Zero(), Mat8::Zero()};
    for (const auto& q : triangle_rule().points) {
        const BasisValues b = eval_basis(g, q.bary);
        const PointVelocity yv = eval_velocity(b, y);
        const double w = 2.0 * g.area * q.weight;
        for (int a = 0; a < 4; ++a)
            for (int bb = 0; bb < 4; ++bb) {
                const double adv = w * b.value[a] * dot(yv.value, b.grad[bb]);
                const double mass = w * b.value[a] * b.value[bb];
                for (int c = 0; c < 2; ++c) {
                    out.advect(2 * a + c, 2 * bb + c) += adv;
                    for (int d = 0; d < 2; ++d)
                        out.reaction(2 * a + c, 2 * bb + d) += mass * component(yv.grad[c], d);
                }
            }
    }
    return out;
}

Vec8 element_convection_vector(const ElementGeometry& g, const LocalVelocity& y) {
    Vec8 v = Vec8::Zero();
    for (const auto& q : triangle_rule().points) {
        const BasisValues b = eval_basis(g, q.bary);
        const PointVelocity yv = eval_velocity(b, y);
        const double w = 2.0 * g.area * q.weight;
        const double conv[2] = {dot(yv.value, yv.grad[0]), dot(yv.value, yv.grad[1])};
        for (int a = 0; a < 4; ++a)
            for (int c = 0; c < 2; ++c) v(2 * a + c) += w * b.value[a] * conv[c];
    }
    return v;
}

ElementBlock element_flow_block(const ElementGeometry& g, const LocalVelocity& y,
                                const std::array<double, 3>& p, double nu, bool convection) {
    ElementBlock blk{Mat11::Zero(), Vec11::Zero()};
    const Mat8 visc = element_viscous(g, nu);
    const Mat3x8 div = element_divergence(g);
    blk.matrix.topLeftCorner<8, 8>() = visc;
    blk.matrix.topRightCorner<8, 3>() = -div.transpose();
    blk.matrix.bottomLeftCorner<3, 8>() = -div;

    Vec11 local;
    for (int a = 0; a < 4; ++a) {
        local(2 * a) = y[a].x;
        local(2 * a + 1) = y[a].y;
    }
    for (int i = 0; i < 3; ++i) local(8 + i) = p[i];
    blk.vector = blk.matrix * local;

    if (convection) {
        const ConvectionBlocks cb = element_convection(g, y);
        blk.matrix.topLeftCorner<8, 8>() += cb.advect + cb.reaction;
        blk.vector.head<8>() += element_convection_vector(g, y);
    }
    return blk;
}

CondensedBlock condense_bubbles(const ElementBlock& block) {
    static constexpr int xs[9] = {0, 1, 2, 3, 4, 5, 8, 9, 10};
    Eigen::Matrix<double, 9, 9> kxx;
    Eigen::Matrix<double, 9, 2> kxb;
    Eigen::Matrix<double, 2, 9> kbx;
    Eigen::Matrix2d kbb = block.matrix.block<2, 2>(6, 6);
    Eigen::Matrix<double, 9, 1> fx;
    const Eigen::Vector2d fb = block.vector.segment<2>(6);
    for (int i = 0; i < 9; ++i) {
        fx(i) = block.vector(xs[i]);
        kxb(i, 0) = block.matrix(xs[i], 6);
        kxb(i, 1) = block.matrix(xs[i], 7);
        kbx(0, i) = block.matrix(6, xs[i]);
        kbx(1, i) = block.matrix(7, xs[i]);
        for (int j = 0; j < 9; ++j) kxx(i, j) = block.matrix(xs[i], xs[j]);
    }
    const double det = kbb.determinant();
    const double scale = kbb.cwiseAbs().maxCoeff();
    if (!(std::abs(det) > 1e-300) || !(std::abs(det) > 1e-14 * scale * scale))
        throw SingularSystem("singular bubble block (degenerate element)");
    const Eigen::Matrix2d inv = kbb.inverse();

    CondensedBlock out;
    out.recover_matrix = -inv * kbx;
    out.recover_offset = inv * fb;
    out.matrix = kxx + kxb * out.recover_matrix;
    out.vector = fx - kxb * out.recover_offset;
    return out;
}

DofLayout::DofLayout(const Mesh2D& mesh)
    : nodes_(mesh.num_nodes()), elements_(mesh.num_triangles()), allowed_(2 * mesh.num_nodes(), false) {
    for (const auto& e : mesh.boundary()) {
        if (e.tag == BoundaryTag::Outflow) continue;
        for (auto n : e.nodes) {
            allowed_[2 * n] = true;
            allowed_[2 * n + 1] = true;
        }
    }
}

std::array<std::size_t, kLocalDofs> DofLayout::element_dofs(const Mesh2D& mesh, std::size_t t) const {
    const auto& tri = mesh.triangles()[t];
    std::array<std::size_t, kLocalDofs> d{};
    for (int a = 0; a < 3; ++a) {
        d[2 * a] = velocity(tri[a], 0);
        d[2 * a + 1] = velocity(tri[a], 1);
        d[8 + a] = pressure(tri[a]);
    }
    d[6] = bubble(t, 0);
    d[7] = bubble(t, 1);
    return d;
}

std::array<std::size_t, 9> DofLayout::condensed_element_dofs(const Mesh2D& mesh, std::size_t t) const {
    const auto& tri = mesh.triangles()[t];
    std::array<std::size_t, 9> d{};
    for (int a = 0; a < 3; ++a) {
        d[2 * a] = velocity(tri[a], 0);
        d[2 * a + 1] = velocity(tri[a], 1);
        d[6 + a] = condensed_pressure(tri[a]);
    }
    return d;
}

SparseSystem apply_dirichlet(const SparseSystem& system, const DirichletSet& bc,
                             const std::vector<bool>& allowed) {
    const auto n = static_cast<std::size_t>(system.matrix.rows());
    if (bc.dofs.size() != bc.values.size())
        throw ValidationError("Dirichlet set: dof and value counts differ");
    std::vector<char> constrained(n, 0);
    Eigen::VectorXd value = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < bc.dofs.size(); ++k) {
        const std::size_t dof = bc.dofs[k];
        if (dof >= n) throw ValidationError("Dirichlet dof " + std::to_string(dof) + " out of range");
        if (dof >= allowed.size() || !allowed[dof])
            throw ValidationError("Dirichlet value specified for non-boundary dof " + std::to_string(dof));
        constrained[dof] = 1;
        value(static_cast<Eigen::Index>(dof)) = bc.values[k];
    }

    SparseSystem out;
    out.tolerance = system.tolerance;
    out.rhs = system.rhs;
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(system.matrix.nonZeros()) + bc.dofs.size());
    for (int col = 0; col < system.matrix.outerSize(); ++col) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(system.matrix, col); it; ++it) {
            const auto row = static_cast<std::size_t>(it.row());
            if (constrained[row]) continue;
            if (constrained[static_cast<std::size_t>(col)]) {
                out.rhs(it.row()) -= it.value() * value(col);
                continue;
            }
            trips.emplace_back(it.row(), col, it.value());
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!constrained[i]) continue;
        const auto ii = static_cast<Eigen::Index>(i);
        trips.emplace_back(ii, ii, 1.0);
        out.rhs(ii) = value(ii);
    }
    out.matrix.resize(system.matrix.rows(), system.matrix.cols());
    out.matrix.setFromTriplets(trips.begin(), trips.end());
    return out;
}

Eigen::VectorXd solve_linear(const SparseSystem& system) {
    const double bnorm = system.rhs.norm();
    if (bnorm == 0.0) return Eigen::VectorXd::Zero(system.rhs.size());
    Eigen::SparseMatrix<double> a = system.matrix;
    a.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(a);
    lu.factorize(a);
    if (lu.info() != Eigen::Success)
        throw SingularSystem("sparse LU factorization failed: " + lu.lastErrorMessage());
    Eigen::VectorXd x = lu.solve(system.rhs);
    if (lu.info() != Eigen::Success || !x.allFinite())
        throw SingularSystem("sparse LU solve failed");
    const double rel = (a * x - system.rhs).norm() / bnorm;
    if (!(rel <= system.tolerance))
        throw SingularSystem("linear solve residual " + std::to_string(rel) +
                             " exceeds tolerance " + std::to_string(system.tolerance));
    return x;
}

namespace {

// Velocity-range indices coincide with the first 2N + 2E full-layout indices.
template <class F>
Eigen::SparseMatrix<double> assemble_velocity_blocks(const Mesh2D& mesh, F&& element_matrix) {
    const DofLayout layout(mesh);
    const auto nv = static_cast<Eigen::Index>(2 * mesh.num_nodes() + 2 * mesh.num_triangles());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(64 * mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const Mat8 k = element_matrix(t);
        const auto dofs = layout.element_dofs(mesh, t);
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j)
                trips.emplace_back(static_cast<Eigen::Index>(dofs[i]),
                                   static_cast<Eigen::Index>(dofs[j]), k(i, j));
    }
    Eigen::SparseMatrix<double> m(nv, nv);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

} // namespace

Eigen::SparseMatrix<double> assemble_viscous(const Mesh2D& mesh, double nu) {
    return assemble_velocity_blocks(mesh, [&](std::size_t t) {
        return element_viscous(element_geometry(mesh, t), nu);
    });
}

Eigen::SparseMatrix<double> assemble_divergence(const Mesh2D& mesh) {
    const DofLayout layout(mesh);
    const auto nv = static_cast<Eigen::Index>(2 * mesh.num_nodes() + 2 * mesh.num_triangles());
    std::vector<Eigen::Triplet<double>> trips;
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const Mat3x8 d = element_divergence(element_geometry(mesh, t));
        const auto dofs = layout.element_dofs(mesh, t);
        const auto& tri = mesh.triangles()[t];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 8; ++j)
                trips.emplace_back(static_cast<Eigen::Index>(tri[i]), static_cast<Eigen::Index>(dofs[j]),
                                   d(i, j));
    }
    Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(mesh.num_nodes()), nv);
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

LocalVelocity gather_velocity(const Mesh2D& mesh, const DofLayout& layout,
                              const Eigen::VectorXd& full, std::size_t t) {
    const auto& tri = mesh.triangles()[t];
    LocalVelocity y{};
    for (int a = 0; a < 3; ++a) {
        y[a] = {full(static_cast<Eigen::Index>(layout.velocity(tri[a], 0))),
                full(static_cast<Eigen::Index>(layout.velocity(tri[a], 1)))};
    }
    y[3] = {full(static_cast<Eigen::Index>(layout.bubble(t, 0))),
            full(static_cast<Eigen::Index>(layout.bubble(t, 1)))};
    return y;
}

std::array<double, 3> gather_pressure(const Mesh2D& mesh, const DofLayout& layout,
                                      const Eigen::VectorXd& full, std::size_t t) {
    const auto& tri = mesh.triangles()[t];
    return {full(static_cast<Eigen::Index>(layout.pressure(tri[0]))),
            full(static_cast<Eigen::Index>(layout.pressure(tri[1]))),
            full(static_cast<Eigen::Index>(layout.pressure(tri[2])))};
}

GlobalConvection assemble_convection(const Mesh2D& mesh, const Eigen::VectorXd& velocity) {
    const DofLayout layout(mesh);
    std::vector<ConvectionBlocks> blocks;
    blocks.reserve(mesh.num_triangles());
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t)
        blocks.push_back(element_convection(element_geometry(mesh, t),
                                            gather_velocity(mesh, layout, velocity, t)));
    GlobalConvection out;
    out.advect = assemble_velocity_blocks(mesh, [&](std::size_t t) { return blocks[t].advect; });
    out.reaction = assemble_velocity_blocks(mesh, [&](std::size_t t) { return blocks[t].reaction; });
    return out;
}

Eigen::VectorXd assemble_convection_vector(const Mesh2D& mesh, const Eigen::VectorXd& velocity) {
    const DofLayout layout(mesh);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(
        static_cast<Eigen::Index>(2 * mesh.num_nodes() + 2 * mesh.num_triangles()));
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
        const Vec8 v = element_convection_vector(element_geometry(mesh, t),
                                                 gather_velocity(mesh, layout, velocity, t));
        const auto dofs = layout.element_dofs(mesh, t);
        for (int i = 0; i < 8; ++i) out(static_cast<Eigen::Index>(dofs[i])) += v(i);
    }
    return out;
}

Eigen::VectorXd solve_condensed(const Mesh2D& mesh, const DofLayout& layout,
                                const std::vector<ElementBlock>& blocks,
                                const Eigen::VectorXd& extra_rhs, const DirichletSet& bc,
                                double tolerance) {
    const auto nc = static_cast<Eigen::Index>(layout.condensed_size());
    std::vector<CondensedBlock> cond;
    cond.reserve(blocks.size());
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(81 * blocks.size());
    SparseSystem sys;
    sys.tolerance = tolerance;
    sys.rhs = extra_rhs.size() == nc ? extra_rhs : Eigen::VectorXd::Zero(nc);
    for (std::size_t t = 0; t < blocks.size(); ++t) {
        cond.push_back(condense_bubbles(blocks[t]));
        const auto& c = cond.back();
        const auto dofs = layout.condensed_element_dofs(mesh, t);
        for (int i = 0; i < 9; ++i) {
            sys.rhs(static_cast<Eigen::Index>(dofs[i])) += c.vector(i);
            for (int j = 0; j < 9; ++j)
                trips.emplace_back(static_cast<Eigen::Index>(dofs[i]),
                                   static_cast<Eigen::Index>(dofs[j]), c.matrix(i, j));
        }
    }
    sys.matrix.resize(nc, nc);
    sys.matrix.setFromTriplets(trips.begin(), trips.end());
    const Eigen::VectorXd x = solve_linear(apply_dirichlet(sys, bc, layout.dirichlet_allowed()));

    Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.size()));
    const auto nn = layout.num_nodes();
    full.head(static_cast<Eigen::Index>(2 * nn)) = x.head(static_cast<Eigen::Index>(2 * nn));
    full.tail(static_cast<Eigen::Index>(nn)) = x.tail(static_cast<Eigen::Index>(nn));
    for (std::size_t t = 0; t < blocks.size(); ++t) {
        const auto dofs = layout.condensed_element_dofs(mesh, t);
        Eigen::Matrix<double, 9, 1> xl;
        for (int i = 0; i < 9; ++i) xl(i) = x(static_cast<Eigen::Index>(dofs[i]));
        const Eigen::Vector2d b = cond[t].recover(xl);
        full(static_cast<Eigen::Index>(layout.bubble(t, 0))) = b(0);
        full(static_cast<Eigen::Index>(layout.bubble(t, 1))) = b(1);
    }
    return full;
}

Eigen::VectorXd solve_uncondensed(const Mesh2D& mesh, const DofLayout& layout,
                                  const std::vector<ElementBlock>& blocks,
                                  const Eigen::VectorXd& extra_rhs, const DirichletSet& bc,
                                  double tolerance) {
    const auto n = static_cast<Eigen::Index>(layout.size());
    SparseSystem sys;
    sys.tolerance = tolerance;
    sys.rhs = Eigen::VectorXd::Zero(n);
    if (extra_rhs.size() == static_cast<Eigen::Index>(layout.condensed_size())) {
        const auto nn = static_cast<Eigen::Index>(layout.num_nodes());
        sys.rhs.head(2 * nn) = extra_rhs.head(2 * nn);
        sys.rhs.tail(nn) += extra_rhs.tail(nn);
    }
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(121 * blocks.size());
    for (std::size_t t = 0; t < blocks.size(); ++t) {
        const auto dofs = layout.element_dofs(mesh, t);
        for (int i = 0; i < kLocalDofs; ++i) {
            sys.rhs(static_cast<Eigen::Index>(dofs[i])) += blocks[t].vector(i);
            for (int j = 0; j < kLocalDofs; ++j)
                trips.emplace_back(static_cast<Eigen::Index>(dofs[i]),
                                   static_cast<Eigen::Index>(dofs[j]), blocks[t].matrix(i, j));
        }
    }
    sys.matrix.resize(n, n);
    sys.matrix.setFromTriplets(trips.begin(), trips.end());
    return solve_linear(apply_dirichlet(sys, bc, layout.dirichlet_allowed()));
}

} // namespace adjflow
