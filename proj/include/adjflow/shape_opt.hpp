#pragma once

#include "adjflow/adjoint.hpp"
#include "adjflow/flow.hpp"
#include "adjflow/mesh.hpp"

#include <optional>
#include <vector>

namespace adjflow {

/// Gradient density on the Free boundary, one entry per Free node.
struct BoundaryGradient {
    std::vector<std::size_t> nodes;
    std::vector<double> density;
    std::vector<Vec2> normals;
    /// Half the summed length of the adjacent Free edges.
    std::vector<double> weights;

    std::size_t size() const noexcept { return nodes.size(); }
    /// sqrt(sum w g^2).
    double norm() const;
    /// Copy with l added to every density.
    BoundaryGradient shifted(double l) const;
};

/// Free nodes, normals and weights with a zero density.
BoundaryGradient free_boundary(const Mesh2D& mesh);

/// 2 nu [eps(y):eps(v) - |eps(y)|^2] at each Free node: the element means
/// of the adjacent triangles, weighted by area.
BoundaryGradient shape_gradient(const Mesh2D& mesh, const MixedField& state, const MixedField& adj, double nu);

/// sum_i w_i g_i (V_i . n_i).
double eulerian_derivative(const BoundaryGradient& grad, const DisplacementField& v);

/// -sum w g / sum w.
double balance_multiplier(const BoundaryGradient& grad);

enum class VolumeFeedback {
    /// eps |V_k - V| / V, always non-negative.
    Absolute,
    /// eps (V_k - V) / V.
    Signed,
};

double update_multiplier(double lk, double l, double vk, double v_target, double eps,
                         VolumeFeedback mode = VolumeFeedback::Absolute);

/// P1 solve of -lap d + d = 0 with d = 0 on Inflow/Outflow/Wall nodes and the
/// lumped Neumann load -w_i g_i n_i at the Free nodes of `total`.
DisplacementField smooth_descent(const Mesh2D& mesh, const BoundaryGradient& total);

/// int grad a : grad b + a . b with P1 interpolants.
double h1_inner(const Mesh2D& mesh, const DisplacementField& a, const DisplacementField& b);

struct StepRule {
    double min = 1e-6;
    double max = 1.0;
    double decrease = 0.5;
    double increase = 1.2;
    double alignment = 0.9;
};

/// `previous` may be null on the first iteration.
double step_control(const Mesh2D& mesh, double h, const DisplacementField& current,
                    const DisplacementField* previous, bool inverted, const StepRule& rule = {});

struct OptimConfig {
    double step0 = 0.1;
    double multiplier0 = 0.0;
    /// Start from balance_multiplier of the initial gradient instead.
    bool balance_multiplier0 = false;
    double epsilon = 0.0;
    double target_volume = 1.0;
    int max_iters = 20;
    StepRule step;
    int retry_cap = 8;
    VolumeFeedback feedback = VolumeFeedback::Absolute;
    /// Reject steps that raise J.
    bool reject_increase = true;

    void validate() const;
};

struct IterationRecord {
    int iter = 0;
    double energy = 0.0;
    double volume = 0.0;
    double multiplier = 0.0;
    double step = 0.0;
    double grad_norm = 0.0;
    int newton_iters = 0;
    bool accepted = false;
};

struct OptimizeResult {
    Mesh2D final_mesh;
    std::vector<IterationRecord> history;
    double initial_energy = 0.0;
    double final_energy = 0.0;
    /// Stopped before the budget because the retry cap ran out.
    bool partial = false;
};

/// Fixed-budget descent. Every attempted step emits a record; a rejected one
/// (inverted mesh, failed solve, or higher J) leaves the mesh unchanged and
/// halves the step.
OptimizeResult optimize(const Mesh2D& mesh0, const FlowConfig& flow, const OptimConfig& opt);

/// Radial field (mean + amplitude cos(mode theta)) e_r about `center`, with a
/// cos^2 cutoff from 1 at r <= inner to 0 at r >= outer. Zeroed on fixed nodes.
struct RadialPerturbation {
    Vec2 center;
    double inner = 0.0;
    double outer = 1.0;
    double mean = 1.0;
    double amplitude = 0.0;
    int mode = 0;
};

DisplacementField radial_perturbation(const Mesh2D& mesh, const RadialPerturbation& p);

struct GradientCheckEntry {
    double t = 0.0;
    double energy_plus = 0.0;
    double energy_minus = 0.0;
    double finite_difference = 0.0;
    double rel_error = 0.0;
};

struct GradientCheckReport {
    double energy = 0.0;
    double analytic = 0.0;
    std::vector<GradientCheckEntry> entries;
    /// log(e_{i-1}/e_i) / log(t_{i-1}/t_i) between successive entries.
    std::vector<double> orders;
};

GradientCheckReport gradient_check(const Mesh2D& mesh, const FlowConfig& flow, const DisplacementField& v,
                                   const std::vector<double>& ts);

} // namespace adjflow
