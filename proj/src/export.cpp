#include "adjflow/export.hpp"

#include "io_util.hpp"

#include <json.hpp>

namespace adjflow {

std::string vtk_string(const Mesh2D& mesh, const MixedField& field, const std::string& vector_name,
                       const std::string& scalar_name) {
    if (!field.matches(mesh)) throw ValidationError("field does not belong to this mesh");
    const std::size_t n = mesh.num_nodes(), e = mesh.num_triangles();
    std::string out = "# vtk DataFile Version 3.0\nadjflow\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    out += "POINTS " + std::to_string(n) + " double\n";
    for (const auto& p : mesh.nodes()) out += format_g17(p.x) + " " + format_g17(p.y) + " 0\n";
    out += "CELLS " + std::to_string(e) + " " + std::to_string(4 * e) + "\n";
    for (const auto& t : mesh.triangles())
        out += "3 " + std::to_string(t[0]) + " " + std::to_string(t[1]) + " " + std::to_string(t[2]) + "\n";
    out += "CELL_TYPES " + std::to_string(e) + "\n";
    for (std::size_t i = 0; i < e; ++i) out += "5\n";
    out += "POINT_DATA " + std::to_string(n) + "\n";
    out += "VECTORS " + vector_name + " double\n";
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2 v = field.velocity(i);
        out += format_g17(v.x) + " " + format_g17(v.y) + " 0\n";
    }
    out += "SCALARS " + scalar_name + " double 1\nLOOKUP_TABLE default\n";
    for (std::size_t i = 0; i < n; ++i) out += format_g17(field.pressure(i)) + "\n";
    return out;
}

void write_vtk(const Mesh2D& mesh, const MixedField& field, const std::string& vector_name,
               const std::string& scalar_name, const std::string& path) {
    write_file_atomic(path, vtk_string(mesh, field, vector_name, scalar_name));
}

std::string history_csv(const std::vector<IterationRecord>& history) {
    std::string out = "iter,J,volume,multiplier,step,grad_norm,newton_iters,accepted\n";
    for (const auto& r : history) {
        out += std::to_string(r.iter) + "," + format_g17(r.energy) + "," + format_g17(r.volume) + "," +
               format_g17(r.multiplier) + "," + format_g17(r.step) + "," + format_g17(r.grad_norm) + "," +
               std::to_string(r.newton_iters) + "," + (r.accepted ? "1" : "0") + "\n";
    }
    return out;
}

void write_history_csv(const std::vector<IterationRecord>& history, const std::string& path) {
    write_file_atomic(path, history_csv(history));
}

std::string gradient_check_json(const GradientCheckReport& report) {
    nlohmann::ordered_json j;
    j["energy"] = report.energy;
    j["analytic"] = report.analytic;
    j["entries"] = nlohmann::ordered_json::array();
    for (const auto& e : report.entries) {
        j["entries"].push_back({{"t", e.t},
                                {"J_plus", e.energy_plus},
                                {"J_minus", e.energy_minus},
                                {"finite_difference", e.finite_difference},
                                {"rel_error", e.rel_error}});
    }
    j["orders"] = report.orders;
    return j.dump(2) + "\n";
}

std::string optimize_summary_json(const Mesh2D& mesh0, const OptimizeResult& result, double target_volume) {
    const double v1 = volume(result.final_mesh);
    std::size_t accepted = 0;
    double max_drift = std::abs(v1 - target_volume) / target_volume;
    for (const auto& r : result.history) {
        if (!r.accepted) continue;
        ++accepted;
        max_drift = std::max(max_drift, std::abs(r.volume - target_volume) / target_volume);
    }
    nlohmann::ordered_json j;
    j["initial_J"] = result.initial_energy;
    j["final_J"] = result.final_energy;
    j["reduction"] = result.initial_energy > 0.0 ? 1.0 - result.final_energy / result.initial_energy : 0.0;
    j["initial_volume"] = volume(mesh0);
    j["final_volume"] = v1;
    j["target_volume"] = target_volume;
    j["volume_drift"] = std::abs(v1 - target_volume) / target_volume;
    j["max_volume_drift"] = max_drift;
    j["attempts"] = result.history.size();
    j["accepted"] = accepted;
    j["partial"] = result.partial;
    return j.dump(2) + "\n";
}

} // namespace adjflow
