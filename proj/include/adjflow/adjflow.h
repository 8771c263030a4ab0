#ifndef ADJFLOW_ADJFLOW_H
#define ADJFLOW_ADJFLOW_H

#include <stddef.h>

#if defined(ADJFLOW_BUILDING_LIBRARY)
#define ADJFLOW_API __attribute__((visibility("default")))
#else
#define ADJFLOW_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct adjflow_mesh adjflow_mesh;
typedef struct adjflow_config adjflow_config;
typedef struct adjflow_state adjflow_state;
typedef struct adjflow_adjoint adjflow_adjoint;
typedef struct adjflow_optim_result adjflow_optim_result;

typedef enum adjflow_status {
    ADJFLOW_OK = 0,
    ADJFLOW_INVALID_ARGUMENT = 1,
    ADJFLOW_PARSE = 2,
    ADJFLOW_VALIDATION = 3,
    ADJFLOW_SOLVER = 4,
    ADJFLOW_IO = 5,
    ADJFLOW_INVERTED_ELEMENT = 6,
    ADJFLOW_INTERNAL = 7
} adjflow_status;

/* Message of the most recent failure on the calling thread ("" if none). */
ADJFLOW_API const char* adjflow_last_error(void);
ADJFLOW_API const char* adjflow_status_string(adjflow_status status);
/* Frees strings returned through char** out-parameters. */
ADJFLOW_API void adjflow_string_free(char* s);
/* Writes via a temporary file and rename. */
ADJFLOW_API adjflow_status adjflow_write_file(const char* path, const char* data, size_t len);

/* ---- configuration ---- */

ADJFLOW_API adjflow_status adjflow_config_parse(const char* json, size_t len, adjflow_config** out);
/* Relative mesh paths resolve against the file's directory. */
ADJFLOW_API adjflow_status adjflow_config_load(const char* path, adjflow_config** out);
ADJFLOW_API void adjflow_config_destroy(adjflow_config* cfg);
ADJFLOW_API adjflow_status adjflow_config_build_mesh(const adjflow_config* cfg, adjflow_mesh** out);
/* Borrowed; valid while cfg lives. */
ADJFLOW_API const char* adjflow_config_output_dir(const adjflow_config* cfg);
ADJFLOW_API int adjflow_config_vtk_enabled(const adjflow_config* cfg);
ADJFLOW_API int adjflow_config_has_optimize(const adjflow_config* cfg);

/* ---- meshes ---- */

typedef struct adjflow_mesh_info {
    size_t nodes;
    size_t triangles;
    size_t boundary_edges;
    size_t free_edges;
    double volume;
} adjflow_mesh_info;

ADJFLOW_API adjflow_status adjflow_mesh_load(const char* path, adjflow_mesh** out);
ADJFLOW_API adjflow_status adjflow_mesh_parse(const char* json, size_t len, adjflow_mesh** out);
ADJFLOW_API adjflow_status adjflow_mesh_save(const adjflow_mesh* mesh, const char* path);
ADJFLOW_API adjflow_status adjflow_mesh_to_json(const adjflow_mesh* mesh, char** out);
ADJFLOW_API adjflow_status adjflow_mesh_info_get(const adjflow_mesh* mesh, adjflow_mesh_info* out);
ADJFLOW_API void adjflow_mesh_destroy(adjflow_mesh* mesh);

ADJFLOW_API adjflow_status adjflow_gen_channel(double length, double height, size_t nx, size_t ny,
                                               adjflow_mesh** out);
/* rect = {x0, y0, x1, y1}; layers = 0 and first_layer = 0 pick defaults.
   area_defect may be NULL. */
ADJFLOW_API adjflow_status adjflow_gen_rect_with_hole(const double rect[4], const double center[2], double radius,
                                                      size_t resolution, size_t layers, double first_layer,
                                                      adjflow_mesh** out, double* area_defect);

typedef struct adjflow_cannula_options {
    double width;
    double inlet_y;
    double inlet_length;
    double bend_radius;
    double outlet_length;
    size_t n_along;
    size_t n_across;
    size_t wall_cells;
} adjflow_cannula_options;

ADJFLOW_API void adjflow_cannula_defaults(adjflow_cannula_options* out);
ADJFLOW_API adjflow_status adjflow_gen_cannula(const adjflow_cannula_options* opts, adjflow_mesh** out);

/* ---- state and adjoint ---- */

typedef struct adjflow_state_info {
    double energy;
    double residual;
    int newton_iterations;
    int continuation_stages;
    double velocity_norm;
    double pressure_norm;
} adjflow_state_info;

ADJFLOW_API adjflow_status adjflow_solve(const adjflow_mesh* mesh, const adjflow_config* cfg, adjflow_state** out);
ADJFLOW_API void adjflow_state_destroy(adjflow_state* state);
ADJFLOW_API adjflow_status adjflow_state_info_get(const adjflow_mesh* mesh, const adjflow_config* cfg,
                                                  const adjflow_state* state, adjflow_state_info* out);
/* Full coefficient vector: 2 per node velocity, 2 per element bubble, 1 per
   node pressure. Borrowed; valid while state lives. */
ADJFLOW_API adjflow_status adjflow_state_values(const adjflow_state* state, const double** values, size_t* len);
ADJFLOW_API adjflow_status adjflow_state_write_vtk(const adjflow_mesh* mesh, const adjflow_state* state,
                                                   const char* path);
ADJFLOW_API adjflow_status adjflow_state_report_json(const adjflow_mesh* mesh, const adjflow_config* cfg,
                                                     const adjflow_state* state, char** out);

ADJFLOW_API adjflow_status adjflow_adjoint_solve(const adjflow_mesh* mesh, const adjflow_config* cfg,
                                                 const adjflow_state* state, adjflow_adjoint** out);
ADJFLOW_API void adjflow_adjoint_destroy(adjflow_adjoint* adj);
ADJFLOW_API adjflow_status adjflow_adjoint_values(const adjflow_adjoint* adj, const double** values, size_t* len);
ADJFLOW_API adjflow_status adjflow_adjoint_residual(const adjflow_mesh* mesh, const adjflow_config* cfg,
                                                    const adjflow_state* state, const adjflow_adjoint* adj,
                                                    double* out);
ADJFLOW_API adjflow_status adjflow_adjoint_write_vtk(const adjflow_mesh* mesh, const adjflow_adjoint* adj,
                                                     const char* path);

/* ---- shape optimization ---- */

/* Finite-difference check of the shape derivative using the config's
   gradcheck section; returns a JSON report. */
ADJFLOW_API adjflow_status adjflow_gradcheck(const adjflow_mesh* mesh, const adjflow_config* cfg, char** report_json);

/* Requires an optimize section in cfg. */
ADJFLOW_API adjflow_status adjflow_optimize(const adjflow_mesh* mesh, const adjflow_config* cfg,
                                            adjflow_optim_result** out);
ADJFLOW_API void adjflow_optim_result_destroy(adjflow_optim_result* result);
ADJFLOW_API adjflow_status adjflow_optim_result_history_csv(const adjflow_optim_result* result, char** out);
ADJFLOW_API adjflow_status adjflow_optim_result_final_mesh(const adjflow_optim_result* result, adjflow_mesh** out);
ADJFLOW_API adjflow_status adjflow_optim_result_summary_json(const adjflow_optim_result* result, char** out);

#ifdef __cplusplus
}
#endif

#endif
