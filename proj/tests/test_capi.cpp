#include "adjflow/adjflow.h"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <string>

namespace {

const char* kChannel = R"({
  "mesh": {"generator": {"type": "channel", "length": 3, "height": 1, "nx": 12, "ny": 4}},
  "flow": {"viscosity": 0.1, "inflow": {"coeffs_x": [0, 1, -1]}, "traction": {"coeffs_y": [0.1, -0.2]}},
  "output": {"dir": "results", "vtk": false}
})";

const char* kBody = R"({
  "mesh": {"generator": {"type": "rect_with_hole", "rect": [-0.5, -0.5, 1.5, 0.5], "center": [0, 0],
                         "radius": 0.2, "resolution": 32, "layers": 4}},
  "flow": {"viscosity": 0.0005, "inflow": {"coeffs_x": [-0.05, 0, 0.2]}},
  "optimize": {"step0": 100, "multiplier0": "balance", "epsilon": 0.02, "target_volume": 1.9,
               "max_iters": 3, "step_bounds": [0.1, 2000], "volume_feedback": "signed"},
  "gradcheck": {"steps": [0.01, 0.005],
                "perturbation": {"type": "radial", "inner": 0.2, "outer": 0.45, "amplitude": 0.5, "mode": 1}}
})";

adjflow_config* parse(const char* text) {
    adjflow_config* cfg = nullptr;
    EXPECT_EQ(adjflow_config_parse(text, std::strlen(text), &cfg), ADJFLOW_OK) << adjflow_last_error();
    return cfg;
}

std::string take(char* s) {
    std::string out = s == nullptr ? "" : s;
    adjflow_string_free(s);
    return out;
}

} // namespace

TEST(CApi, StatusStrings) {
    for (int s = ADJFLOW_OK; s <= ADJFLOW_INTERNAL; ++s)
        EXPECT_GT(std::strlen(adjflow_status_string(static_cast<adjflow_status>(s))), 0u);
    EXPECT_STRNE(adjflow_status_string(ADJFLOW_PARSE), adjflow_status_string(ADJFLOW_IO));
}

TEST(CApi, NullArgumentsAreRejected) {
    adjflow_mesh* m = nullptr;
    EXPECT_EQ(adjflow_mesh_load(nullptr, &m), ADJFLOW_INVALID_ARGUMENT);
    EXPECT_EQ(adjflow_gen_channel(1, 1, 1, 1, nullptr), ADJFLOW_INVALID_ARGUMENT);
    EXPECT_EQ(adjflow_solve(nullptr, nullptr, nullptr), ADJFLOW_INVALID_ARGUMENT);
    EXPECT_GT(std::strlen(adjflow_last_error()), 0u);
    adjflow_mesh_destroy(nullptr);
    adjflow_config_destroy(nullptr);
    adjflow_state_destroy(nullptr);
    adjflow_adjoint_destroy(nullptr);
    adjflow_optim_result_destroy(nullptr);
    adjflow_string_free(nullptr);
}

TEST(CApi, ConfigErrorsMapToStatuses) {
    adjflow_config* cfg = nullptr;
    const char* bad_json = "{\"mesh\":";
    EXPECT_EQ(adjflow_config_parse(bad_json, std::strlen(bad_json), &cfg), ADJFLOW_PARSE);
    EXPECT_EQ(cfg, nullptr);
    const char* bad_value = R"({"mesh": {"path": "m.json"}, "flow": {"viscosity": -2}})";
    EXPECT_EQ(adjflow_config_parse(bad_value, std::strlen(bad_value), &cfg), ADJFLOW_VALIDATION);
    EXPECT_NE(std::string(adjflow_last_error()).find("flow.viscosity"), std::string::npos);
    EXPECT_EQ(adjflow_config_load("/nonexistent/cfg.json", &cfg), ADJFLOW_IO);
}

TEST(CApi, MeshGeneratorsAndRoundTrip) {
    adjflow_mesh* m = nullptr;
    ASSERT_EQ(adjflow_gen_channel(3, 1, 30, 10, &m), ADJFLOW_OK);
    adjflow_mesh_info info{};
    ASSERT_EQ(adjflow_mesh_info_get(m, &info), ADJFLOW_OK);
    EXPECT_EQ(info.triangles, 600u);
    EXPECT_EQ(info.nodes, 341u);
    EXPECT_EQ(info.free_edges, 0u);
    EXPECT_NEAR(info.volume, 3.0, 1e-12);

    char* json = nullptr;
    ASSERT_EQ(adjflow_mesh_to_json(m, &json), ADJFLOW_OK);
    const std::string text = take(json);
    adjflow_mesh* back = nullptr;
    ASSERT_EQ(adjflow_mesh_parse(text.data(), text.size(), &back), ADJFLOW_OK);
    char* again = nullptr;
    ASSERT_EQ(adjflow_mesh_to_json(back, &again), ADJFLOW_OK);
    EXPECT_EQ(take(again), text);
    adjflow_mesh_destroy(back);
    adjflow_mesh_destroy(m);

    const char* cw = R"({"nodes":[[0,0],[1,0],[0,1]],"triangles":[[0,2,1]],"boundary":[[0,1,"wall"],[1,2,"wall"],[2,0,"wall"]]})";
    EXPECT_EQ(adjflow_mesh_parse(cw, std::strlen(cw), &m), ADJFLOW_VALIDATION);
    EXPECT_NE(std::string(adjflow_last_error()).find("non-positive area"), std::string::npos);

    double rect[4] = {-0.5, -0.5, 1.5, 1.5}, center[2] = {0, 0}, defect = 0.0;
    ASSERT_EQ(adjflow_gen_rect_with_hole(rect, center, 0.2, 64, 0, 0.0, &m, &defect), ADJFLOW_OK);
    ASSERT_EQ(adjflow_mesh_info_get(m, &info), ADJFLOW_OK);
    EXPECT_EQ(info.free_edges, 64u);
    EXPECT_NEAR(info.volume + 3.14159265358979 * 0.04 - defect, 4.0, 1e-12);
    adjflow_mesh_destroy(m);

    adjflow_cannula_options o;
    adjflow_cannula_defaults(&o);
    EXPECT_EQ(o.n_along, 32u);
    ASSERT_EQ(adjflow_gen_cannula(&o, &m), ADJFLOW_OK);
    ASSERT_EQ(adjflow_mesh_info_get(m, &info), ADJFLOW_OK);
    EXPECT_EQ(info.triangles, 448u);
    adjflow_mesh_destroy(m);
}

TEST(CApi, SolveAndAdjoint) {
    adjflow_config* cfg = parse(kChannel);
    EXPECT_STREQ(adjflow_config_output_dir(cfg), "results");
    EXPECT_EQ(adjflow_config_vtk_enabled(cfg), 0);
    EXPECT_EQ(adjflow_config_has_optimize(cfg), 0);
    adjflow_mesh* mesh = nullptr;
    ASSERT_EQ(adjflow_config_build_mesh(cfg, &mesh), ADJFLOW_OK);
    adjflow_state* s = nullptr;
    ASSERT_EQ(adjflow_solve(mesh, cfg, &s), ADJFLOW_OK) << adjflow_last_error();
    adjflow_state_info info{};
    ASSERT_EQ(adjflow_state_info_get(mesh, cfg, s, &info), ADJFLOW_OK);
    EXPECT_GT(info.energy, 0.0);
    EXPECT_LE(info.residual, 1e-10);
    const double* values = nullptr;
    std::size_t len = 0;
    ASSERT_EQ(adjflow_state_values(s, &values, &len), ADJFLOW_OK);
    EXPECT_EQ(len, 3u * 65u + 2u * 96u);

    char* report = nullptr;
    ASSERT_EQ(adjflow_state_report_json(mesh, cfg, s, &report), ADJFLOW_OK);
    EXPECT_NE(take(report).find("\"J\""), std::string::npos);

    adjflow_adjoint* a = nullptr;
    ASSERT_EQ(adjflow_adjoint_solve(mesh, cfg, s, &a), ADJFLOW_OK);
    double res = 1.0;
    ASSERT_EQ(adjflow_adjoint_residual(mesh, cfg, s, a, &res), ADJFLOW_OK);
    EXPECT_LE(res, 1e-10);
    ASSERT_EQ(adjflow_adjoint_values(a, &values, &len), ADJFLOW_OK);
    EXPECT_EQ(len, 3u * 65u + 2u * 96u);

    adjflow_mesh* other = nullptr;
    ASSERT_EQ(adjflow_gen_channel(1, 1, 2, 2, &other), ADJFLOW_OK);
    EXPECT_EQ(adjflow_state_info_get(other, cfg, s, &info), ADJFLOW_VALIDATION);
    EXPECT_EQ(adjflow_state_write_vtk(mesh, s, "/nonexistent-dir/s.vtk"), ADJFLOW_IO);

    adjflow_mesh_destroy(other);
    adjflow_adjoint_destroy(a);
    adjflow_state_destroy(s);
    adjflow_mesh_destroy(mesh);
    adjflow_config_destroy(cfg);
}

TEST(CApi, GradcheckAndOptimize) {
    adjflow_config* cfg = parse(kBody);
    EXPECT_EQ(adjflow_config_has_optimize(cfg), 1);
    adjflow_mesh* mesh = nullptr;
    ASSERT_EQ(adjflow_config_build_mesh(cfg, &mesh), ADJFLOW_OK);

    char* report = nullptr;
    ASSERT_EQ(adjflow_gradcheck(mesh, cfg, &report), ADJFLOW_OK) << adjflow_last_error();
    const std::string gc = take(report);
    EXPECT_NE(gc.find("\"rel_error\""), std::string::npos);

    adjflow_optim_result* r = nullptr;
    ASSERT_EQ(adjflow_optimize(mesh, cfg, &r), ADJFLOW_OK) << adjflow_last_error();
    char* csv = nullptr;
    ASSERT_EQ(adjflow_optim_result_history_csv(r, &csv), ADJFLOW_OK);
    const std::string history = take(csv);
    EXPECT_EQ(history.rfind("iter,J,volume,multiplier,step,grad_norm,newton_iters,accepted\n", 0), 0u);
    adjflow_mesh* final_mesh = nullptr;
    ASSERT_EQ(adjflow_optim_result_final_mesh(r, &final_mesh), ADJFLOW_OK);
    adjflow_mesh_info info{};
    ASSERT_EQ(adjflow_mesh_info_get(final_mesh, &info), ADJFLOW_OK);
    EXPECT_NEAR(info.volume, 1.9, 0.05);
    char* summary = nullptr;
    ASSERT_EQ(adjflow_optim_result_summary_json(r, &summary), ADJFLOW_OK);
    EXPECT_NE(take(summary).find("\"reduction\""), std::string::npos);

    adjflow_mesh_destroy(final_mesh);
    adjflow_optim_result_destroy(r);

    adjflow_config* plain = parse(kChannel);
    EXPECT_EQ(adjflow_optimize(mesh, plain, &r), ADJFLOW_VALIDATION);
    adjflow_config_destroy(plain);
    adjflow_mesh_destroy(mesh);
    adjflow_config_destroy(cfg);
}

TEST(CApi, WriteFile) {
    EXPECT_EQ(adjflow_write_file("/nonexistent-dir/f.txt", "x", 1), ADJFLOW_IO);
    EXPECT_EQ(adjflow_write_file(nullptr, "x", 1), ADJFLOW_INVALID_ARGUMENT);
}
