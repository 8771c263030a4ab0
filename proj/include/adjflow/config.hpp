#pragma once

#include "adjflow/flow.hpp"
#include "adjflow/mesh.hpp"
#include "adjflow/shape_opt.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace adjflow {

struct ChannelSpec {
    double length = 1.0;
    double height = 1.0;
    std::size_t nx = 1;
    std::size_t ny = 1;
};

struct RectWithHoleSpec {
    std::array<double, 4> rect{};
    Vec2 center;
    double radius = 0.0;
    std::size_t resolution = 64;
    RectWithHoleOptions options;
};

using MeshSource = std::variant<std::string, ChannelSpec, RectWithHoleSpec, CannulaOptions>;

struct SmoothedNormalSpec {};
using PerturbationSpec = std::variant<RadialPerturbation, SmoothedNormalSpec>;

struct GradientCheckSpec {
    std::vector<double> steps{1e-2, 5e-3, 2.5e-3};
    PerturbationSpec perturbation = SmoothedNormalSpec{};
};

struct OutputSpec {
    std::string dir = ".";
    bool vtk = true;
};

struct RunConfig {
    /// A path is resolved against `base_dir` when relative.
    MeshSource mesh;
    FlowConfig flow;
    std::optional<OptimConfig> optimize;
    GradientCheckSpec gradcheck;
    OutputSpec output;
    std::string base_dir = ".";
};

/// Strict parse: unknown keys and out-of-range values throw ParseError or
/// ValidationError with the JSON path of the field, e.g. "flow.viscosity".
RunConfig parse_config(std::string_view content);
RunConfig load_config(const std::string& path);

Mesh2D build_mesh(const RunConfig& cfg);

/// Test field V for gradient_check. The smoothed-normal variant is the
/// Helmholtz-smoothed unit push along the Free normals.
DisplacementField build_perturbation(const Mesh2D& mesh, const PerturbationSpec& perturbation);

} // namespace adjflow
