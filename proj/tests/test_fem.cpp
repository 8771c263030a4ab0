#include "adjflow/error.hpp"
#include "adjflow/fem.hpp"
#include "adjflow/flow.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace adjflow;

namespace {

Mesh2D reference_triangle() {
    return Mesh2D({{0, 0}, {1, 0}, {0, 1}}, {{0, 1, 2}},
                  {{{0, 1}, BoundaryTag::Wall}, {{1, 2}, BoundaryTag::Outflow}, {{2, 0}, BoundaryTag::Inflow}});
}

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// Full-layout vector whose nodal velocity is f(x, y); bubbles and pressure zero.
template <class F>
Eigen::VectorXd nodal_field(const Mesh2D& m, F f) {
    DofLayout layout(m);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.size()));
    for (std::size_t i = 0; i < m.num_nodes(); ++i) {
        const Vec2 v = f(m.nodes()[i]);
        u(static_cast<Eigen::Index>(2 * i)) = v.x;
        u(static_cast<Eigen::Index>(2 * i + 1)) = v.y;
    }
    return u;
}

std::vector<ElementBlock> stokes_blocks(const Mesh2D& m, double nu) {
    DofLayout layout(m);
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.size()));
    std::vector<ElementBlock> blocks;
    for (std::size_t t = 0; t < m.num_triangles(); ++t)
        blocks.push_back(element_flow_block(element_geometry(m, t), gather_velocity(m, layout, zero, t),
                                            gather_pressure(m, layout, zero, t), nu, false));
    return blocks;
}

} // namespace

TEST(Quadrature, ExactUpToDegreeFour) {
    const QuadratureRule& rule = triangle_rule();
    EXPECT_GE(rule.degree, 4);
    double total = 0.0;
    for (const auto& q : rule.points) total += q.weight;
    EXPECT_NEAR(total, 0.5, 1e-15);
    for (int a = 0; a <= 4; ++a)
        for (int b = 0; a + b <= 4; ++b) {
            double sum = 0.0;
            for (const auto& q : rule.points) sum += q.weight * std::pow(q.bary[1], a) * std::pow(q.bary[2], b);
            EXPECT_NEAR(sum, factorial(a) * factorial(b) / factorial(a + b + 2), 1e-15) << a << "," << b;
        }
}

TEST(ElementViscous, MatchesHandIntegrationOnReferenceTriangle) {
    const Mesh2D m = reference_triangle();
    const ElementGeometry g = element_geometry(m, 0);
    const double nu = 0.7;
    const Mat8 k = element_viscous(g, nu);
    // For linear basis functions l_a e_c, 2 nu eps:eps integrates to
    // nu |T| (delta_cd grad l_a . grad l_b + d_d l_a d_c l_b).
    const Vec2 grad[3] = {{-1, -1}, {1, 0}, {0, 1}};
    auto comp = [](Vec2 v, int i) { return i == 0 ? v.x : v.y; };
    for (int a = 0; a < 3; ++a)
        for (int c = 0; c < 2; ++c)
            for (int b = 0; b < 3; ++b)
                for (int d = 0; d < 2; ++d) {
                    const double expect =
                        nu * 0.5 * ((c == d ? dot(grad[a], grad[b]) : 0.0) + comp(grad[b], c) * comp(grad[a], d));
                    EXPECT_NEAR(k(2 * a + c, 2 * b + d), expect, 1e-14);
                }
}

TEST(ElementViscous, LinearInViscosityAndSymmetric) {
    const Mesh2D m = gen_channel(1, 1, 3, 3);
    const auto k1 = assemble_viscous(m, 1.0);
    const auto k2 = assemble_viscous(m, 2.0);
    EXPECT_NEAR(Eigen::MatrixXd(k2 - 2.0 * k1).cwiseAbs().maxCoeff(), 0.0, 1e-14);
    const Eigen::SparseMatrix<double> kt = k1.transpose();
    EXPECT_NEAR(Eigen::MatrixXd(k1 - kt).cwiseAbs().maxCoeff(), 0.0, 1e-14);
}

TEST(ElementViscous, KernelIsRigidMotions) {
    const Mesh2D m = gen_channel(1, 1, 3, 3);
    const auto k = assemble_viscous(m, 1.0);
    const auto n = 2 * m.num_nodes() + 2 * m.num_triangles();
    const Eigen::VectorXd rot =
        nodal_field(m, [](Vec2 p) { return Vec2{-p.y, p.x}; }).head(static_cast<Eigen::Index>(n));
    const Eigen::VectorXd shift =
        nodal_field(m, [](Vec2) { return Vec2{0.3, -1.2}; }).head(static_cast<Eigen::Index>(n));
    EXPECT_NEAR((k * rot).norm(), 0.0, 1e-13);
    EXPECT_NEAR((k * shift).norm(), 0.0, 1e-13);
    const Eigen::VectorXd shear =
        nodal_field(m, [](Vec2 p) { return Vec2{p.y, 0.0}; }).head(static_cast<Eigen::Index>(n));
    EXPECT_GT(shear.dot(k * shear), 0.1);
}

TEST(Divergence, ConstantAndSolenoidalFieldsVanish) {
    const Mesh2D m = gen_channel(1, 1, 4, 4);
    const auto b = assemble_divergence(m);
    const auto n = static_cast<Eigen::Index>(2 * m.num_nodes() + 2 * m.num_triangles());
    const Eigen::VectorXd c = nodal_field(m, [](Vec2) { return Vec2{1, 0}; }).head(n);
    const Eigen::VectorXd lin = nodal_field(m, [](Vec2 p) { return Vec2{p.x, -p.y}; }).head(n);
    EXPECT_NEAR((b * c).cwiseAbs().maxCoeff(), 0.0, 1e-15);
    EXPECT_NEAR((b * lin).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(Divergence, IntegralOfDivergence) {
    const Mesh2D m = gen_channel(1, 1, 4, 4);
    const auto b = assemble_divergence(m);
    const auto n = static_cast<Eigen::Index>(2 * m.num_nodes() + 2 * m.num_triangles());
    const Eigen::VectorXd u = nodal_field(m, [](Vec2 p) { return Vec2{p.x, 0}; }).head(n);
    EXPECT_NEAR((b * u).sum(), 1.0, 1e-14);
}

TEST(Convection, ZeroStateGivesZeroMatrices) {
    const Mesh2D m = gen_channel(1, 1, 2, 2);
    const auto c = assemble_convection(m, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(DofLayout(m).size())));
    EXPECT_EQ(c.advect.norm(), 0.0);
    EXPECT_EQ(c.reaction.norm(), 0.0);
}

TEST(Convection, ConstantAdvectionMatchesHandIntegral) {
    const Mesh2D m = reference_triangle();
    const ElementGeometry g = element_geometry(m, 0);
    const double c = 1.7;
    const LocalVelocity y{Vec2{c, 0}, Vec2{c, 0}, Vec2{c, 0}, Vec2{}};
    const ConvectionBlocks blocks = element_convection(g, y);
    // int c d_x(l_b) l_a = c (d_x l_b) |T| / 3; no reaction for constant y.
    const double dx[3] = {-1, 1, 0};
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int k = 0; k < 2; ++k) {
                EXPECT_NEAR(blocks.advect(2 * a + k, 2 * b + k), c * dx[b] * 0.5 / 3.0, 1e-15);
                EXPECT_NEAR(blocks.advect(2 * a + k, 2 * b + 1 - k), 0.0, 1e-15);
            }
    EXPECT_NEAR(blocks.reaction.cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(Convection, JacobianMatchesFiniteDifferences) {
    const Mesh2D m = gen_channel(2, 1, 4, 3);
    const auto n = static_cast<Eigen::Index>(DofLayout(m).size());
    const auto nv = static_cast<Eigen::Index>(2 * m.num_nodes() + 2 * m.num_triangles());
    Eigen::VectorXd y(n), u(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        y(i) = std::sin(0.37 * static_cast<double>(i) + 0.2);
        u(i) = std::cos(1.3 * static_cast<double>(i));
    }
    const auto jac = assemble_convection(m, y);
    const Eigen::VectorXd ju = (jac.advect + jac.reaction) * u.head(nv);
    const Eigen::VectorXd c0 = assemble_convection_vector(m, y);
    std::vector<double> err;
    for (double eps : {1e-2, 5e-3, 2.5e-3}) {
        const Eigen::VectorXd fd = (assemble_convection_vector(m, y + eps * u) - c0) / eps;
        err.push_back((fd - ju).norm());
    }
    for (std::size_t i = 1; i < err.size(); ++i) EXPECT_GE(std::log2(err[i - 1] / err[i]), 0.9);
    EXPECT_LT(err.back(), 1e-2 * ju.norm());
}

TEST(Convection, ShearFlowDropsOut) {
    const Mesh2D m = gen_channel(3, 1, 6, 4);
    const Eigen::VectorXd u = nodal_field(m, [](Vec2 p) { return Vec2{p.y * (1 - p.y), 0}; });
    EXPECT_NEAR(assemble_convection_vector(m, u).cwiseAbs().maxCoeff(), 0.0, 1e-15);
}

TEST(Dirichlet, ZeroLiftLeavesFreeRows) {
    SparseSystem s;
    s.matrix.resize(3, 3);
    s.matrix.insert(0, 0) = 4;
    s.matrix.insert(0, 1) = 1;
    s.matrix.insert(1, 0) = 1;
    s.matrix.insert(1, 1) = 3;
    s.matrix.insert(2, 2) = 2;
    s.matrix.insert(2, 0) = 1;
    s.rhs = Eigen::Vector3d(1, 2, 3);
    const SparseSystem c = apply_dirichlet(s, {{0}, {0.0}}, {true, true, true});
    EXPECT_EQ(c.rhs(1), 2.0);
    EXPECT_EQ(c.rhs(2), 3.0);
    EXPECT_EQ(c.rhs(0), 0.0);
    const SparseSystem lifted = apply_dirichlet(s, {{0}, {2.0}}, {true, true, true});
    EXPECT_EQ(lifted.rhs(1), 0.0);
    EXPECT_EQ(lifted.rhs(2), 1.0);
    const Eigen::VectorXd x = solve_linear(lifted);
    EXPECT_EQ(x(0), 2.0);
    EXPECT_NEAR(3 * x(1), 0.0, 1e-15);
}

TEST(Dirichlet, FullyConstrainedReturnsValues) {
    SparseSystem s;
    s.matrix.resize(2, 2);
    s.matrix.insert(0, 0) = 2;
    s.matrix.insert(0, 1) = 1;
    s.matrix.insert(1, 0) = 1;
    s.matrix.insert(1, 1) = 2;
    s.rhs = Eigen::Vector2d(5, 6);
    const Eigen::VectorXd x = solve_linear(apply_dirichlet(s, {{0, 1}, {-1.5, 0.25}}, {true, true}));
    EXPECT_EQ(x(0), -1.5);
    EXPECT_EQ(x(1), 0.25);
}

TEST(Dirichlet, RejectsInteriorDof) {
    SparseSystem s;
    s.matrix.resize(2, 2);
    s.matrix.insert(0, 0) = 1;
    s.matrix.insert(1, 1) = 1;
    s.rhs = Eigen::Vector2d(1, 1);
    EXPECT_THROW(apply_dirichlet(s, {{1}, {0.0}}, {true, false}), ValidationError);
    const Mesh2D m = gen_channel(1, 1, 2, 2);
    const DofLayout layout(m);
    std::size_t interior = m.num_nodes();
    for (std::size_t i = 0; i < m.num_nodes(); ++i)
        if (m.nodes()[i] == Vec2{0.5, 0.5}) interior = i;
    ASSERT_LT(interior, m.num_nodes());
    EXPECT_FALSE(layout.dirichlet_allowed()[layout.velocity(interior, 0)]);
}

TEST(SolveLinear, IdentityAndKnownInverse) {
    SparseSystem id;
    id.matrix.resize(3, 3);
    id.matrix.setIdentity();
    id.rhs = Eigen::Vector3d(1, -2, 3);
    EXPECT_EQ(solve_linear(id), id.rhs);

    SparseSystem s;
    s.matrix.resize(2, 2);
    s.matrix.insert(0, 0) = 2;
    s.matrix.insert(0, 1) = 1;
    s.matrix.insert(1, 0) = 1;
    s.matrix.insert(1, 1) = 3;
    s.rhs = Eigen::Vector2d(1, 2);
    // inverse = [3 -1; -1 2] / 5
    const Eigen::VectorXd x = solve_linear(s);
    EXPECT_NEAR(x(0), 0.2, 1e-14);
    EXPECT_NEAR(x(1), 0.6, 1e-14);
}

TEST(SolveLinear, SingularSystemThrows) {
    SparseSystem s;
    s.matrix.resize(2, 2);
    s.matrix.insert(0, 0) = 1;
    s.matrix.insert(0, 1) = 1;
    s.matrix.insert(1, 0) = 1;
    s.matrix.insert(1, 1) = 1;
    s.rhs = Eigen::Vector2d(1, 0);
    EXPECT_THROW(solve_linear(s), SingularSystem);
}

TEST(Condensation, HomogeneousStokesGivesZero) {
    const Mesh2D m = gen_channel(1, 1, 2, 2);
    const DofLayout layout(m);
    FlowConfig cfg;
    const Eigen::VectorXd x = solve_condensed(m, layout, stokes_blocks(m, 1.0), {}, flow_dirichlet(m, cfg));
    EXPECT_EQ(x.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Condensation, MatchesUncondensedSolve) {
    for (auto [nx, ny] : {std::pair<std::size_t, std::size_t>{1, 1}, {2, 2}, {6, 3}}) {
        const Mesh2D m = gen_channel(1, 1, nx, ny);
        const DofLayout layout(m);
        FlowConfig cfg;
        cfg.viscosity = 0.3;
        cfg.inflow.x.coeffs = {0.0, 1.0, -1.0};
        cfg.traction.x.coeffs = {0.2, 0.5};
        const auto blocks = stokes_blocks(m, cfg.viscosity);
        const Eigen::VectorXd load = traction_load(m, layout, cfg.traction);
        const DirichletSet bc = flow_dirichlet(m, cfg);
        const Eigen::VectorXd a = solve_condensed(m, layout, blocks, load, bc);
        const Eigen::VectorXd b = solve_uncondensed(m, layout, blocks, load, bc);
        EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, b.cwiseAbs().maxCoeff()));
    }
}

TEST(Condensation, BubbleRecoveryMatchesHandSolve) {
    const Mesh2D m = reference_triangle();
    const ElementGeometry g = element_geometry(m, 0);
    const LocalVelocity zero{};
    const ElementBlock block = element_flow_block(g, zero, {0, 0, 0}, 1.0, false);
    const CondensedBlock c = condense_bubbles(block);
    // Unit nodal data: all six velocity dofs and three pressures equal one.
    Eigen::Matrix<double, 9, 1> x = Eigen::Matrix<double, 9, 1>::Ones();
    Eigen::Matrix2d kbb = block.matrix.block<2, 2>(6, 6);
    Eigen::Vector2d rhs = block.vector.segment<2>(6);
    for (int j = 0; j < 6; ++j) rhs -= block.matrix.block<2, 1>(6, j) * x(j);
    for (int j = 0; j < 3; ++j) rhs -= block.matrix.block<2, 1>(6, 8 + j) * x(6 + j);
    const Eigen::Vector2d expect = kbb.inverse() * rhs;
    EXPECT_NEAR((c.recover(x) - expect).norm(), 0.0, 1e-14);
    EXPECT_NEAR(c.recover(Eigen::Matrix<double, 9, 1>::Zero()).norm(), 0.0, 1e-15);
}

TEST(InfSup, EnclosedSquareStokesIsSolvable) {
    // Two-by-two square with an Outflow side: MINI keeps the saddle system
    // nonsingular and the homogeneous solve returns zero.
    const Mesh2D m = gen_channel(1, 1, 2, 2);
    FlowConfig cfg;
    cfg.model = FlowModel::Stokes;
    const FlowState s = solve_stokes(m, cfg);
    EXPECT_EQ(s.values.cwiseAbs().maxCoeff(), 0.0);
}
