// adjflow command-line front end. Talks to the library only through the C API.

#include "adjflow/adjflow.h"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>

namespace {

// Exit codes.
constexpr int kConfigError = 2;
constexpr int kSolverError = 3;
constexpr int kIoError = 4;
constexpr int kInternalError = 1;

struct Failure {
    adjflow_status status;
    std::string message;
};

int exit_code(adjflow_status s) {
    switch (s) {
    case ADJFLOW_OK: return 0;
    case ADJFLOW_INVALID_ARGUMENT:
    case ADJFLOW_PARSE:
    case ADJFLOW_VALIDATION: return kConfigError;
    case ADJFLOW_SOLVER:
    case ADJFLOW_INVERTED_ELEMENT: return kSolverError;
    case ADJFLOW_IO: return kIoError;
    case ADJFLOW_INTERNAL: return kInternalError;
    }
    return kInternalError;
}

void check(adjflow_status s) {
    if (s != ADJFLOW_OK) throw Failure{s, adjflow_last_error()};
}

template <class T, void (*Destroy)(T*)>
struct Deleter {
    void operator()(T* p) const { Destroy(p); }
};
using ConfigPtr = std::unique_ptr<adjflow_config, Deleter<adjflow_config, adjflow_config_destroy>>;
using MeshPtr = std::unique_ptr<adjflow_mesh, Deleter<adjflow_mesh, adjflow_mesh_destroy>>;
using StatePtr = std::unique_ptr<adjflow_state, Deleter<adjflow_state, adjflow_state_destroy>>;
using AdjointPtr = std::unique_ptr<adjflow_adjoint, Deleter<adjflow_adjoint, adjflow_adjoint_destroy>>;
using ResultPtr =
    std::unique_ptr<adjflow_optim_result, Deleter<adjflow_optim_result, adjflow_optim_result_destroy>>;
using StringPtr = std::unique_ptr<char, Deleter<char, adjflow_string_free>>;

struct Run {
    ConfigPtr cfg;
    MeshPtr mesh;
    std::filesystem::path out;
    bool vtk = true;

    std::string path(const char* name) const { return (out / name).string(); }
};

Run prepare(const std::string& config_path, const std::string& out_override) {
    Run r;
    adjflow_config* cfg = nullptr;
    check(adjflow_config_load(config_path.c_str(), &cfg));
    r.cfg.reset(cfg);
    adjflow_mesh* mesh = nullptr;
    check(adjflow_config_build_mesh(cfg, &mesh));
    r.mesh.reset(mesh);
    r.out = out_override.empty() ? std::string(adjflow_config_output_dir(cfg)) : out_override;
    r.vtk = adjflow_config_vtk_enabled(cfg) != 0;
    std::error_code ec;
    std::filesystem::create_directories(r.out, ec);
    if (ec) throw Failure{ADJFLOW_IO, "cannot create output directory '" + r.out.string() + "'"};
    return r;
}

void write_string(const std::string& path, const char* text) {
    check(adjflow_write_file(path.c_str(), text, std::char_traits<char>::length(text)));
}

StatePtr solve(const Run& r) {
    adjflow_state* s = nullptr;
    check(adjflow_solve(r.mesh.get(), r.cfg.get(), &s));
    return StatePtr(s);
}

void write_energy(const Run& r, const adjflow_state* s) {
    char* report = nullptr;
    check(adjflow_state_report_json(r.mesh.get(), r.cfg.get(), s, &report));
    StringPtr guard(report);
    write_string(r.path("energy.json"), report);
    adjflow_state_info info{};
    check(adjflow_state_info_get(r.mesh.get(), r.cfg.get(), s, &info));
    std::printf("J = %.10g (newton iterations %d, residual %.3g)\n", info.energy, info.newton_iterations,
                info.residual);
}

void cmd_solve(const Run& r, bool with_vtk) {
    StatePtr s = solve(r);
    if (with_vtk && r.vtk) check(adjflow_state_write_vtk(r.mesh.get(), s.get(), r.path("state.vtk").c_str()));
    write_energy(r, s.get());
}

void cmd_adjoint(const Run& r) {
    StatePtr s = solve(r);
    adjflow_adjoint* a = nullptr;
    check(adjflow_adjoint_solve(r.mesh.get(), r.cfg.get(), s.get(), &a));
    AdjointPtr adj(a);
    if (r.vtk) {
        check(adjflow_state_write_vtk(r.mesh.get(), s.get(), r.path("state.vtk").c_str()));
        check(adjflow_adjoint_write_vtk(r.mesh.get(), adj.get(), r.path("adjoint.vtk").c_str()));
    }
    write_energy(r, s.get());
    double res = 0.0;
    check(adjflow_adjoint_residual(r.mesh.get(), r.cfg.get(), s.get(), adj.get(), &res));
    std::printf("adjoint residual = %.3g\n", res);
}

void cmd_gradcheck(const Run& r) {
    char* report = nullptr;
    check(adjflow_gradcheck(r.mesh.get(), r.cfg.get(), &report));
    StringPtr guard(report);
    write_string(r.path("gradcheck.json"), report);
    std::fputs(report, stdout);
}

void cmd_optimize(const Run& r) {
    adjflow_optim_result* res = nullptr;
    check(adjflow_optimize(r.mesh.get(), r.cfg.get(), &res));
    ResultPtr result(res);

    char* text = nullptr;
    check(adjflow_optim_result_history_csv(res, &text));
    StringPtr csv(text);
    write_string(r.path("history.csv"), text);

    adjflow_mesh* final_mesh = nullptr;
    check(adjflow_optim_result_final_mesh(res, &final_mesh));
    MeshPtr mesh(final_mesh);
    check(adjflow_mesh_save(final_mesh, r.path("final_mesh.json").c_str()));
    if (r.vtk) {
        adjflow_state* s = nullptr;
        check(adjflow_solve(final_mesh, r.cfg.get(), &s));
        StatePtr state(s);
        check(adjflow_state_write_vtk(final_mesh, s, r.path("final_state.vtk").c_str()));
    }

    check(adjflow_optim_result_summary_json(res, &text));
    StringPtr summary(text);
    write_string(r.path("report.json"), text);
    std::fputs(text, stdout);
}

struct MeshArgs {
    std::string gen;
    double length = 1.0;
    double height = 1.0;
    std::size_t nx = 1;
    std::size_t ny = 1;
};

void cmd_mesh(const std::string& config, const MeshArgs& a, const std::string& out) {
    if (out.empty()) throw Failure{ADJFLOW_INVALID_ARGUMENT, "mesh needs -o <file>"};
    adjflow_mesh* m = nullptr;
    ConfigPtr cfg;
    if (!config.empty()) {
        adjflow_config* c = nullptr;
        check(adjflow_config_load(config.c_str(), &c));
        cfg.reset(c);
        check(adjflow_config_build_mesh(c, &m));
    } else if (a.gen == "channel") {
        check(adjflow_gen_channel(a.length, a.height, a.nx, a.ny, &m));
    } else if (a.gen == "cannula") {
        adjflow_cannula_options o;
        adjflow_cannula_defaults(&o);
        check(adjflow_gen_cannula(&o, &m));
    } else {
        throw Failure{ADJFLOW_INVALID_ARGUMENT, "mesh needs -c <config> or --gen channel|cannula"};
    }
    MeshPtr mesh(m);
    check(adjflow_mesh_save(m, out.c_str()));
    adjflow_mesh_info info{};
    check(adjflow_mesh_info_get(m, &info));
    std::printf("%zu nodes, %zu triangles, volume %.10g\n", info.nodes, info.triangles, info.volume);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Steady Navier-Stokes solver, adjoint and shape optimizer"};
    app.require_subcommand(1);

    std::string config, out;
    MeshArgs mesh_args;
    auto add_run = [&](const char* name, const char* help) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", config, "scenario JSON")->required();
        sub->add_option("-o,--output", out, "output directory (overrides output.dir)");
        return sub;
    };
    CLI::App* solve_cmd = add_run("solve", "solve the flow, write state.vtk and energy.json");
    CLI::App* adjoint_cmd = add_run("adjoint", "solve flow and adjoint, write both VTK files");
    CLI::App* energy_cmd = add_run("energy", "solve the flow and report the dissipated energy");
    CLI::App* gradcheck_cmd = add_run("gradcheck", "compare the shape derivative with finite differences");
    CLI::App* optimize_cmd = add_run("optimize", "run the shape optimization");

    CLI::App* mesh_cmd = app.add_subcommand("mesh", "generate a mesh file");
    mesh_cmd->add_option("-c,--config", config, "build the mesh of this scenario");
    mesh_cmd->add_option("--gen", mesh_args.gen, "generator")->check(CLI::IsMember({"channel", "cannula"}));
    mesh_cmd->add_option("--length", mesh_args.length);
    mesh_cmd->add_option("--height", mesh_args.height);
    mesh_cmd->add_option("--nx", mesh_args.nx);
    mesh_cmd->add_option("--ny", mesh_args.ny);
    mesh_cmd->add_option("-o,--output", out, "mesh file to write")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfigError;
    }

    try {
        if (mesh_cmd->parsed()) {
            cmd_mesh(config, mesh_args, out);
            return 0;
        }
        const Run run = prepare(config, out);
        if (solve_cmd->parsed()) cmd_solve(run, true);
        else if (energy_cmd->parsed()) cmd_solve(run, false);
        else if (adjoint_cmd->parsed()) cmd_adjoint(run);
        else if (gradcheck_cmd->parsed()) cmd_gradcheck(run);
        else if (optimize_cmd->parsed()) cmd_optimize(run);
    } catch (const Failure& f) {
        std::fprintf(stderr, "adjflow: %s: %s\n", adjflow_status_string(f.status), f.message.c_str());
        return exit_code(f.status);
    }
    return 0;
}
