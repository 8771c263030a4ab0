#include "adjflow/adjflow.h"

#include "adjflow/adjoint.hpp"
#include "adjflow/config.hpp"
#include "adjflow/error.hpp"
#include "adjflow/export.hpp"
#include "adjflow/shape_opt.hpp"
#include "io_util.hpp"

#include <json.hpp>

#include <cstdlib>
#include <cstring>
#include <new>

using namespace adjflow;

struct adjflow_mesh {
    Mesh2D mesh;
};
struct adjflow_config {
    RunConfig run;
};
struct adjflow_state {
    FlowState state;
};
struct adjflow_adjoint {
    AdjointState adj;
};
struct adjflow_optim_result {
    Mesh2D initial;
    OptimizeResult result;
    double target_volume;
};

namespace {

thread_local std::string last_error;

adjflow_status fail(adjflow_status s, const char* what) {
    last_error = what;
    return s;
}

template <class F>
adjflow_status guarded(F&& f) {
    try {
        f();
        last_error.clear();
        return ADJFLOW_OK;
    } catch (const InvertedElement& e) {
        return fail(ADJFLOW_INVERTED_ELEMENT, e.what());
    } catch (const ParseError& e) {
        return fail(ADJFLOW_PARSE, e.what());
    } catch (const ValidationError& e) {
        return fail(ADJFLOW_VALIDATION, e.what());
    } catch (const IoError& e) {
        return fail(ADJFLOW_IO, e.what());
    } catch (const SolverError& e) {
        return fail(ADJFLOW_SOLVER, e.what());
    } catch (const std::bad_alloc&) {
        return fail(ADJFLOW_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(ADJFLOW_INTERNAL, e.what());
    } catch (...) {
        return fail(ADJFLOW_INTERNAL, "unknown error");
    }
}

char* dup_string(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (p == nullptr) throw std::bad_alloc();
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

#define REQUIRE(cond)                                                                     \
    do {                                                                                  \
        if (!(cond)) return fail(ADJFLOW_INVALID_ARGUMENT, "invalid argument: " #cond); \
    } while (0)

void check_state(const Mesh2D& mesh, const MixedField& f) {
    if (!f.matches(mesh)) throw ValidationError("field does not belong to this mesh");
}

} // namespace

extern "C" {

const char* adjflow_last_error(void) { return last_error.c_str(); }

const char* adjflow_status_string(adjflow_status status) {
    switch (status) {
    case ADJFLOW_OK: return "ok";
    case ADJFLOW_INVALID_ARGUMENT: return "invalid argument";
    case ADJFLOW_PARSE: return "parse error";
    case ADJFLOW_VALIDATION: return "validation error";
    case ADJFLOW_SOLVER: return "solver failure";
    case ADJFLOW_IO: return "i/o failure";
    case ADJFLOW_INVERTED_ELEMENT: return "inverted element";
    case ADJFLOW_INTERNAL: return "internal error";
    }
    return "unknown status";
}

void adjflow_string_free(char* s) { std::free(s); }

adjflow_status adjflow_write_file(const char* path, const char* data, size_t len) {
    REQUIRE(path != nullptr && (data != nullptr || len == 0));
    return guarded([&] { write_file_atomic(path, std::string(data == nullptr ? "" : data, len)); });
}

adjflow_status adjflow_config_parse(const char* json, size_t len, adjflow_config** out) {
    REQUIRE(json != nullptr && out != nullptr);
    return guarded([&] { *out = new adjflow_config{parse_config(std::string_view(json, len))}; });
}

adjflow_status adjflow_config_load(const char* path, adjflow_config** out) {
    REQUIRE(path != nullptr && out != nullptr);
    return guarded([&] { *out = new adjflow_config{load_config(path)}; });
}

void adjflow_config_destroy(adjflow_config* cfg) { delete cfg; }

adjflow_status adjflow_config_build_mesh(const adjflow_config* cfg, adjflow_mesh** out) {
    REQUIRE(cfg != nullptr && out != nullptr);
    return guarded([&] { *out = new adjflow_mesh{build_mesh(cfg->run)}; });
}

const char* adjflow_config_output_dir(const adjflow_config* cfg) {
    return cfg == nullptr ? "" : cfg->run.output.dir.c_str();
}

int adjflow_config_vtk_enabled(const adjflow_config* cfg) { return cfg != nullptr && cfg->run.output.vtk; }

int adjflow_config_has_optimize(const adjflow_config* cfg) {
    return cfg != nullptr && cfg->run.optimize.has_value();
}

adjflow_status adjflow_mesh_load(const char* path, adjflow_mesh** out) {
    REQUIRE(path != nullptr && out != nullptr);
    return guarded([&] { *out = new adjflow_mesh{read_mesh_file(path)}; });
}

adjflow_status adjflow_mesh_parse(const char* json, size_t len, adjflow_mesh** out) {
    REQUIRE(json != nullptr && out != nullptr);
    return guarded([&] { *out = new adjflow_mesh{load_mesh(std::string_view(json, len))}; });
}

adjflow_status adjflow_mesh_save(const adjflow_mesh* mesh, const char* path) {
    REQUIRE(mesh != nullptr && path != nullptr);
    return guarded([&] { write_mesh_file(mesh->mesh, path); });
}

adjflow_status adjflow_mesh_to_json(const adjflow_mesh* mesh, char** out) {
    REQUIRE(mesh != nullptr && out != nullptr);
    return guarded([&] { *out = dup_string(save_mesh(mesh->mesh)); });
}

adjflow_status adjflow_mesh_info_get(const adjflow_mesh* mesh, adjflow_mesh_info* out) {
    REQUIRE(mesh != nullptr && out != nullptr);
    return guarded([&] {
        const Mesh2D& m = mesh->mesh;
        std::size_t free_edges = 0;
        for (const auto& e : m.boundary()) free_edges += e.tag == BoundaryTag::Free ? 1 : 0;
        *out = {m.num_nodes(), m.num_triangles(), m.boundary().size(), free_edges, volume(m)};
    });
}

void adjflow_mesh_destroy(adjflow_mesh* mesh) { delete mesh; }

adjflow_status adjflow_gen_channel(double length, double height, size_t nx, size_t ny, adjflow_mesh** out) {
    REQUIRE(out != nullptr);
    return guarded([&] { *out = new adjflow_mesh{gen_channel(length, height, nx, ny)}; });
}

adjflow_status adjflow_gen_rect_with_hole(const double rect[4], const double center[2], double radius,
                                          size_t resolution, size_t layers, double first_layer,
                                          adjflow_mesh** out, double* area_defect) {
    REQUIRE(rect != nullptr && center != nullptr && out != nullptr);
    return guarded([&] {
        HoleMesh hm = gen_rect_with_hole({rect[0], rect[1], rect[2], rect[3]}, {center[0], center[1]}, radius,
                                         resolution, {layers, first_layer});
        if (area_defect != nullptr) *area_defect = hm.area_defect;
        *out = new adjflow_mesh{std::move(hm.mesh)};
    });
}

void adjflow_cannula_defaults(adjflow_cannula_options* out) {
    if (out == nullptr) return;
    const CannulaOptions d;
    *out = {d.width, d.inlet_y, d.inlet_length, d.bend_radius, d.outlet_length, d.n_along, d.n_across, d.wall_cells};
}

adjflow_status adjflow_gen_cannula(const adjflow_cannula_options* opts, adjflow_mesh** out) {
    REQUIRE(opts != nullptr && out != nullptr);
    return guarded([&] {
        CannulaOptions o;
        o.width = opts->width;
        o.inlet_y = opts->inlet_y;
        o.inlet_length = opts->inlet_length;
        o.bend_radius = opts->bend_radius;
        o.outlet_length = opts->outlet_length;
        o.n_along = opts->n_along;
        o.n_across = opts->n_across;
        o.wall_cells = opts->wall_cells;
        *out = new adjflow_mesh{gen_cannula(o)};
    });
}

adjflow_status adjflow_solve(const adjflow_mesh* mesh, const adjflow_config* cfg, adjflow_state** out) {
    REQUIRE(mesh != nullptr && cfg != nullptr && out != nullptr);
    return guarded([&] { *out = new adjflow_state{solve_flow(mesh->mesh, cfg->run.flow)}; });
}

void adjflow_state_destroy(adjflow_state* state) { delete state; }

adjflow_status adjflow_state_info_get(const adjflow_mesh* mesh, const adjflow_config* cfg,
                                      const adjflow_state* state, adjflow_state_info* out) {
    REQUIRE(mesh != nullptr && cfg != nullptr && state != nullptr && out != nullptr);
    return guarded([&] {
        const FlowState& s = state->state;
        check_state(mesh->mesh, s);
        out->energy = dissipated_energy(mesh->mesh, s, cfg->run.flow.viscosity);
        out->residual = residual_norm(mesh->mesh, s, cfg->run.flow);
        out->newton_iterations = s.newton_iterations;
        out->continuation_stages = s.continuation_stages;
        out->velocity_norm = s.values.head(s.values.size() - static_cast<Eigen::Index>(s.num_nodes)).norm();
        out->pressure_norm = s.nodal_pressure().norm();
    });
}

adjflow_status adjflow_state_values(const adjflow_state* state, const double** values, size_t* len) {
    REQUIRE(state != nullptr && values != nullptr && len != nullptr);
    *values = state->state.values.data();
    *len = static_cast<size_t>(state->state.values.size());
    return ADJFLOW_OK;
}

adjflow_status adjflow_state_write_vtk(const adjflow_mesh* mesh, const adjflow_state* state, const char* path) {
    REQUIRE(mesh != nullptr && state != nullptr && path != nullptr);
    return guarded([&] { write_vtk(mesh->mesh, state->state, "velocity", "pressure", path); });
}

adjflow_status adjflow_state_report_json(const adjflow_mesh* mesh, const adjflow_config* cfg,
                                         const adjflow_state* state, char** out) {
    REQUIRE(mesh != nullptr && cfg != nullptr && state != nullptr && out != nullptr);
    return guarded([&] {
        const FlowState& s = state->state;
        check_state(mesh->mesh, s);
        nlohmann::ordered_json j;
        j["J"] = dissipated_energy(mesh->mesh, s, cfg->run.flow.viscosity);
        j["viscosity"] = cfg->run.flow.viscosity;
        j["model"] = cfg->run.flow.model == FlowModel::Stokes ? "stokes" : "navier_stokes";
        j["volume"] = volume(mesh->mesh);
        j["nodes"] = mesh->mesh.num_nodes();
        j["triangles"] = mesh->mesh.num_triangles();
        j["newton_iterations"] = s.newton_iterations;
        j["continuation_stages"] = s.continuation_stages;
        j["residual_trace"] = s.residual_trace;
        j["residual"] = residual_norm(mesh->mesh, s, cfg->run.flow);
        *out = dup_string(j.dump(2) + "\n");
    });
}

adjflow_status adjflow_adjoint_solve(const adjflow_mesh* mesh, const adjflow_config* cfg, const adjflow_state* state,
                                     adjflow_adjoint** out) {
    REQUIRE(mesh != nullptr && cfg != nullptr && state != nullptr && out != nullptr);
    return guarded([&] { *out = new adjflow_adjoint{solve_adjoint(mesh->mesh, state->state, cfg->run.flow)}; });
}

void adjflow_adjoint_destroy(adjflow_adjoint* adj) { delete adj; }

adjflow_status adjflow_adjoint_values(const adjflow_adjoint* adj, const double** values, size_t* len) {
    REQUIRE(adj != nullptr && values != nullptr && len != nullptr);
    *values = adj->adj.values.data();
    *len = static_cast<size_t>(adj->adj.values.size());
    return ADJFLOW_OK;
}

adjflow_status adjflow_adjoint_residual(const adjflow_mesh* mesh, const adjflow_config* cfg,
                                        const adjflow_state* state, const adjflow_adjoint* adj, double* out) {
    REQUIRE(mesh != nullptr && cfg != nullptr && state != nullptr && adj != nullptr && out != nullptr);
    return guarded([&] { *out = adjoint_residual(mesh->mesh, state->state, adj->adj, cfg->run.flow); });
}

adjflow_status adjflow_adjoint_write_vtk(const adjflow_mesh* mesh, const adjflow_adjoint* adj, const char* path) {
    REQUIRE(mesh != nullptr && adj != nullptr && path != nullptr);
    return guarded([&] { write_vtk(mesh->mesh, adj->adj, "adjoint_velocity", "adjoint_pressure", path); });
}

adjflow_status adjflow_gradcheck(const adjflow_mesh* mesh, const adjflow_config* cfg, char** report_json) {
    REQUIRE(mesh != nullptr && cfg != nullptr && report_json != nullptr);
    return guarded([&] {
        const DisplacementField v = build_perturbation(mesh->mesh, cfg->run.gradcheck.perturbation);
        *report_json = dup_string(
            gradient_check_json(gradient_check(mesh->mesh, cfg->run.flow, v, cfg->run.gradcheck.steps)));
    });
}

adjflow_status adjflow_optimize(const adjflow_mesh* mesh, const adjflow_config* cfg, adjflow_optim_result** out) {
    REQUIRE(mesh != nullptr && cfg != nullptr && out != nullptr);
    return guarded([&] {
        if (!cfg->run.optimize) throw ValidationError("optimize section is missing from the config");
        const OptimConfig& o = *cfg->run.optimize;
        *out = new adjflow_optim_result{mesh->mesh, optimize(mesh->mesh, cfg->run.flow, o), o.target_volume};
    });
}

void adjflow_optim_result_destroy(adjflow_optim_result* result) { delete result; }

adjflow_status adjflow_optim_result_history_csv(const adjflow_optim_result* result, char** out) {
    REQUIRE(result != nullptr && out != nullptr);
    return guarded([&] { *out = dup_string(history_csv(result->result.history)); });
}

adjflow_status adjflow_optim_result_final_mesh(const adjflow_optim_result* result, adjflow_mesh** out) {
    REQUIRE(result != nullptr && out != nullptr);
    return guarded([&] { *out = new adjflow_mesh{result->result.final_mesh}; });
}

adjflow_status adjflow_optim_result_summary_json(const adjflow_optim_result* result, char** out) {
    REQUIRE(result != nullptr && out != nullptr);
    return guarded(
        [&] { *out = dup_string(optimize_summary_json(result->initial, result->result, result->target_volume)); });
}

} // extern "C"
