#pragma once

#include "adjflow/flow.hpp"
#include "adjflow/shape_opt.hpp"

#include <string>

namespace adjflow {

/// Legacy ASCII VTK unstructured grid with one nodal vector and one nodal
/// scalar field, numbers printed with %.17g.
std::string vtk_string(const Mesh2D& mesh, const MixedField& field, const std::string& vector_name,
                       const std::string& scalar_name);
void write_vtk(const Mesh2D& mesh, const MixedField& field, const std::string& vector_name,
               const std::string& scalar_name, const std::string& path);

std::string history_csv(const std::vector<IterationRecord>& history);
void write_history_csv(const std::vector<IterationRecord>& history, const std::string& path);

std::string gradient_check_json(const GradientCheckReport& report);
/// initial/final J, reduction, volumes, counts, partial flag.
std::string optimize_summary_json(const Mesh2D& mesh0, const OptimizeResult& result, double target_volume);

} // namespace adjflow
