// thinnet: command-line front end for the thin-network solvers.
//
//   thinnet <command> <config.json> [options]
//
// The config is either a bare network description or {"network": {...} | "network_file": path,
// "run": {...}}; command-line flags override "run" fields.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "thinnet/thinnet.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace thinnet;

namespace {

enum Exit { ok = 0, acceptance_failure = 1, usage_error = 2, numerical_failure = 3 };

struct RunConfig {
    Network net;
    json run = json::object();
    fs::path out = "out";
    std::uint64_t seed = 0;
};

json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) throw ConfigError("cannot open '" + p.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("'" + p.string() + "': " + e.what());
    }
}

RunConfig load_config(const fs::path& path) {
    RunConfig c;
    const json j = read_json(path);
    if (j.contains("network_file")) {
        fs::path nf = j["network_file"].get<std::string>();
        if (nf.is_relative()) nf = path.parent_path() / nf;
        c.net = load_network(nf.string());
    } else {
        c.net = network_from_json(j.contains("network") ? j["network"] : j);
    }
    if (j.contains("run")) c.run = j["run"];
    if (c.run.contains("out")) c.out = c.run["out"].get<std::string>();
    c.seed = c.run.value("seed", std::uint64_t{0});
    return c;
}

// Flag value when given, else the config field, else the default.
template <class T>
T param(const RunConfig& c, const CLI::Option* opt, const T& flag, const char* key, const T& dflt) {
    if (opt && opt->count() > 0) return flag;
    if (c.run.contains(key)) return c.run[key].get<T>();
    return dflt;
}

struct Flags {
    std::string config, out;
    double min_order = 0, eps = 0, rho = 0, gamma = 0, delta = 0, alpha = 0, y = 0, t = 0, spacing = 0, ltrunc = 0, cells = 0;
    int nt = 0, graph_nt = 0, edge = 0, vertex = 0, ny = 0, nxi = 0, threads = 0;
    std::uint64_t seed = 0;
    std::vector<double> epsilons;
    bool correctors = false;
    std::map<std::string, CLI::Option*> opts;
};

std::string opt_key(const CLI::App* sub, const std::string& k) { return sub->get_name() + ":" + k; }

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("config", f.config, "config or network JSON")->required();
    f.opts[opt_key(sub, "out")] = sub->add_option("-o,--out", f.out, "output directory");
    f.opts[opt_key(sub, "seed")] = sub->add_option("--seed", f.seed, "seed recorded with the outputs");
}

void add_graph(CLI::App* sub, Flags& f) {
    f.opts[opt_key(sub, "graph_nt")] = sub->add_option("--graph-nt", f.graph_nt, "time steps of the graph solvers");
    f.opts[opt_key(sub, "cells_per_unit")] = sub->add_option("--cells-per-unit", f.cells, "edge cells per unit length");
}

void add_assembly(CLI::App* sub, Flags& f) {
    f.opts[opt_key(sub, "eps")] = sub->add_option("--eps", f.eps, "thickness parameter");
    f.opts[opt_key(sub, "gamma")] = sub->add_option("--gamma", f.gamma, "node cut-off exponent in (2/3, 1)");
    f.opts[opt_key(sub, "delta")] = sub->add_option("--delta", f.delta, "outlet blend width (0 picks the default)");
    f.opts[opt_key(sub, "alpha")] = sub->add_option("--alpha", f.alpha, "boundary intensity exponent");
    f.opts[opt_key(sub, "node_spacing")] = sub->add_option("--node-spacing", f.spacing, "junction mesh spacing");
    f.opts[opt_key(sub, "L_trunc")] = sub->add_option("--l-trunc", f.ltrunc, "junction stub length");
}

struct Context {
    RunConfig cfg;
    Flags* f;
    const CLI::App* sub;
    CLI::Option* opt(const char* k) const {
        auto it = f->opts.find(opt_key(sub, k));
        return it == f->opts.end() ? nullptr : it->second;
    }
    bool given(const char* k) const { return opt(k) && opt(k)->count() > 0; }
    double d(const char* k, double flag, double dflt) const { return param(cfg, opt(k), flag, k, dflt); }
    int i(const char* k, int flag, int dflt) const { return param(cfg, opt(k), flag, k, dflt); }
};

GraphGrid graph_grid(const Context& c) {
    GraphGrid g;
    g.nt = c.i("graph_nt", c.f->graph_nt, g.nt);
    g.cells_per_unit = c.d("cells_per_unit", c.f->cells, g.cells_per_unit);
    if (g.nt < 1 || !(g.cells_per_unit > 0)) throw ConfigError("graph grid sizes must be positive");
    return g;
}

PipelineOptions pipeline(const Context& c) {
    PipelineOptions p;
    p.graph = graph_grid(c);
    p.assembly.eps = c.d("eps", c.f->eps, 0.1);
    p.assembly.gamma = c.d("gamma", c.f->gamma, 0.9);
    p.assembly.delta = c.d("delta", c.f->delta, 0.0);
    p.assembly.alpha = c.d("alpha", c.f->alpha, c.cfg.net.alpha);
    p.assembly.with_correctors = c.f->correctors || c.cfg.run.value("correctors", false);
    p.node_spacing = c.d("node_spacing", c.f->spacing, p.node_spacing);
    p.L_trunc = c.d("L_trunc", c.f->ltrunc, p.L_trunc);
    if (!(p.assembly.eps > 0.0)) throw ConfigError("eps must be positive");
    return p;
}

fs::path out_dir(const Context& c, const char* sub) {
    fs::path base = c.given("out") ? fs::path(c.f->out) : c.cfg.out;
    fs::path d = base / sub;
    fs::create_directories(d);
    return d;
}

// JSON writer that prints floating-point numbers with 17 significant digits.
void dump17(std::ostream& os, const json& j, int indent = 0) {
    const std::string pad(indent + 2, ' ');
    if (j.is_object()) {
        os << "{\n";
        std::size_t k = 0;
        for (auto& [key, v] : j.items()) {
            os << pad << json(key).dump() << ": ";
            dump17(os, v, indent + 2);
            os << (++k < j.size() ? ",\n" : "\n");
        }
        os << std::string(indent, ' ') << '}';
    } else if (j.is_array()) {
        os << '[';
        for (std::size_t k = 0; k < j.size(); ++k) {
            if (k) os << ", ";
            dump17(os, j[k], indent);
        }
        os << ']';
    } else if (j.is_number_float()) {
        const double x = j.get<double>();
        os << (std::isfinite(x) ? fmt17(x) : std::string("null"));
    } else {
        os << j.dump();
    }
}

void write_manifest(const fs::path& dir, const std::string& command, const Context& c, const json& params) {
    std::ofstream m(dir / "run.json");
    json j;
    j["command"] = command;
    j["seed"] = c.given("seed") ? c.f->seed : c.cfg.seed;
    j["parameters"] = params;
    dump17(m, j);
    m << '\n';
}

int vertex_index_of(const Network& net, int id) {
    const int v = net.vertex_index(id);
    if (v < 0 || net.vertices[v].kind != VertexKind::interior) throw ConfigError("no node with id " + std::to_string(id));
    return v;
}

int edge_index_of(const Network& net, int id) {
    const int e = net.edge_index(id);
    if (e < 0) throw ConfigError("no edge with id " + std::to_string(id));
    return e;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_validate(const Context& c) {
    const auto rep = validate(c.cfg.net);
    if (rep.ok()) {
        std::cout << "valid\n";
        return ok;
    }
    for (auto& s : rep.issues) std::cout << s << '\n';
    return acceptance_failure;
}

int cmd_solve_limit(const Context& c, std::string& stage) {
    const auto p = pipeline(c);
    const auto dir = out_dir(c, "limit");
    const double alpha = p.assembly.alpha;
    stage = "graph limit";
    if (alpha > 1.0 && alpha < 2.0) {
        auto cas = solve_cascade_alpha_gt1(c.cfg.net, p.graph);
        cas.w0.write_csv(c.cfg.net, dir / "w0");
        cas.w_am1.write_csv(c.cfg.net, dir / "w_am1");
        cas.w_2am2.write_csv(c.cfg.net, dir / "w_2am2");
    } else {
        if (alpha != 1.0 && alpha < 2.0) throw ConfigError("alpha must be 1, in (1, 2), or at least 2");
        const Network net = alpha >= 2.0 ? without_nonlinearity(c.cfg.net) : c.cfg.net;
        solve_limit_alpha1(net, p.graph).write_csv(net, dir / "w0");
    }
    write_manifest(dir, "solve-limit", c, {{"alpha", alpha}, {"graph_nt", p.graph.nt}, {"cells_per_unit", p.graph.cells_per_unit}});
    return ok;
}

int cmd_solve_cell(const Context& c, std::string& stage) {
    const auto p = pipeline(c);
    const int e = edge_index_of(c.cfg.net, c.i("edge", c.f->edge, c.cfg.net.edges.front().id));
    const double y = c.d("y", c.f->y, 0.5 * c.cfg.net.edges[e].length), t = c.d("t", c.f->t, c.cfg.net.T);
    stage = "graph limit";
    const auto w0 = solve_limit_alpha1(c.cfg.net, p.graph);
    stage = "cell problem";
    const auto& W = w0.edges[e];
    const double hy = 1e-4 * W.grid.L, ht = 1e-4 * c.cfg.net.T;
    CellInputs in{e, y, t, W.sample(y, t), 0.0, 0.0};
    in.w0_y = (W.sample(std::min(y + hy, W.grid.L), t) - W.sample(std::max(y - hy, 0.0), t)) /
              (std::min(y + hy, W.grid.L) - std::max(y - hy, 0.0));
    in.w0_t = (W.sample(y, std::min(t + ht, c.cfg.net.T)) - W.sample(y, std::max(t - ht, 0.0))) /
              (std::min(t + ht, c.cfg.net.T) - std::max(t - ht, 0.0));
    CellOptions co = p.cell;
    co.use_limit_identity = true;
    const auto sol = solve_cell_u1(c.cfg.net, in, co);
    const auto dir = out_dir(c, "cell");
    std::ofstream f(dir / "u1.csv");
    sol.write_csv(f);
    write_manifest(dir, "solve-cell", c, {{"edge", c.cfg.net.edges[e].id}, {"y", y}, {"t", t}, {"residual", sol.residual}});
    return ok;
}

template <int Dim>
int solve_node_dim(const Context& c, std::string& stage) {
    const auto p = pipeline(c);
    const int v = vertex_index_of(c.cfg.net, c.i("vertex", c.f->vertex, c.cfg.net.vertices[c.cfg.net.interior_vertices().at(0)].id));
    const double t = c.d("t", c.f->t, c.cfg.net.T);
    stage = "graph limit";
    const auto w0 = solve_limit_alpha1(c.cfg.net, p.graph);
    stage = "node layer";
    JunctionMesh<Dim> mesh(c.cfg.net, v, p.node_spacing, p.L_trunc);
    std::vector<double> targets;
    for (auto& s : mesh.stubs()) targets.push_back(cubic_sample(w0.trace(v, s.edge), t));
    const auto sol = solve_node_layer(c.cfg.net, mesh, targets, t, p.node);
    const auto dir = out_dir(c, "node");
    std::ofstream f(dir / "field.csv");
    mesh.write_csv(f, sol.N, c.cfg.net);
    std::ofstream d(dir / "decay.json");
    write_decay_json(d, c.cfg.net, sol);
    write_manifest(dir, "solve-node", c, {{"vertex", c.cfg.net.vertices[v].id}, {"t", t}, {"spacing", p.node_spacing}});
    if (sol.kirchhoff_warning) std::cerr << "warning: far targets violate the Kirchhoff balance by " << fmt17(sol.kirchhoff_defect) << '\n';
    return ok;
}

int cmd_solve_full(const Context& c, std::string& stage) {
    FullOptions o;
    o.eps = c.d("eps", c.f->eps, o.eps);
    o.rho = c.d("rho", c.f->rho, o.rho);
    o.nt = c.i("nt", c.f->nt, o.nt);
    o.alpha = c.d("alpha", c.f->alpha, c.cfg.net.alpha);
    o.sample_every = o.nt;
    stage = "direct solve";
    const auto s = solve_full(c.cfg.net, o);
    const auto dir = out_dir(c, "full");
    std::ofstream f(dir / "field.csv");
    write_full_csv(f, s, static_cast<int>(s.u.size()) - 1, c.cfg.net);
    std::ofstream m(dir / "mass.csv");
    m << "t,mass,outflow\n";
    for (std::size_t n = 0; n < s.mass.size(); ++n)
        m << fmt17(n * s.dt) << ',' << fmt17(s.mass[n]) << ',' << fmt17(n == 0 ? 0.0 : s.outflow[n - 1]) << '\n';
    write_manifest(dir, "solve-full", c,
                   {{"eps", o.eps}, {"rho", o.rho}, {"nt", o.nt}, {"alpha", o.alpha}, {"min", s.min_value}, {"max", s.max_value}});
    return ok;
}

template <int Dim>
int assemble_dim(const Context& c, std::string& stage) {
    const auto p = pipeline(c);
    stage = "assembly";
    const auto A = build_approximation<Dim>(c.cfg.net, p);
    const int ny = c.i("ny", c.f->ny, 101), nxi = c.i("nxi", c.f->nxi, 5);
    const int nts = 11;
    std::vector<double> times;
    for (int k = 0; k < nts; ++k) times.push_back(c.cfg.net.T * k / (nts - 1));
    const auto dir = out_dir(c, "assemble");
    std::ofstream f(dir / "lattice.csv");
    write_lattice_csv(f, A, ny, nxi, times);
    write_manifest(dir, "assemble", c,
                   {{"eps", p.assembly.eps}, {"gamma", p.assembly.gamma}, {"alpha", p.assembly.alpha}, {"delta", A.delta},
                    {"correctors", p.assembly.with_correctors}});
    return ok;
}

int cmd_converge(const Context& c, std::string& stage) {
    StudyOptions o;
    o.pipeline = pipeline(c);
    o.epsilons = c.given("epsilons") ? c.f->epsilons : c.cfg.run.value("epsilons", o.epsilons);
    o.rho = c.d("rho", c.f->rho, o.rho);
    o.nt = c.i("nt", c.f->nt, o.nt);
    o.gamma = o.pipeline.assembly.gamma;
    o.alpha = o.pipeline.assembly.alpha;
    o.threads = c.i("threads", c.f->threads, 0);
    o.min_order = c.d("min_order", c.f->min_order, o.min_order);
    stage = "convergence study";
    const auto rep = convergence_study(c.cfg.net, o);
    const auto dir = out_dir(c, "converge");
    std::ofstream j(dir / "report.json"), csv(dir / "report.csv"), dat(dir / "report.dat");
    write_report_json(j, rep);
    write_report_csv(csv, rep);
    write_report_gnuplot(dat, rep);
    for (auto& r : rep.rows)
        std::cout << "eps " << fmt17(r.eps) << "  error_max " << fmt17(r.error_max) << (r.ok() ? "" : "  failed: " + r.failure) << '\n';
    std::cout << "fitted order " << fmt17(rep.fitted_order) << (rep.pass ? "  pass" : "  fail") << '\n';
    return rep.pass ? ok : acceptance_failure;
}

int cmd_layers(const Context& c, std::string& stage) {
    const auto p = pipeline(c);
    stage = "graph limit";
    const auto w0 = solve_limit_alpha1(c.cfg.net, p.graph);
    stage = "boundary layers";
    const auto layers = make_outlet_layers(c.cfg.net, w0);
    const auto dir = out_dir(c, "layers");
    const int nts = 11, neta = 81;
    for (auto& L : layers) {
        std::ofstream f(dir / ("layer_" + std::to_string(c.cfg.net.edges[L.edge].id) + ".csv"));
        f << "t,eta,pi0\n";
        for (int k = 0; k < nts; ++k) {
            const double t = c.cfg.net.T * k / (nts - 1);
            for (int i = 0; i < neta; ++i) {
                const double eta = 8.0 * i / (neta - 1);
                f << fmt17(t) << ',' << fmt17(eta) << ',' << fmt17(L.pi0(eta, t)) << '\n';
            }
        }
    }
    write_manifest(dir, "layers", c, {{"outlets", layers.size()}});
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Asymptotic and direct solvers for convection-diffusion on thin networks"};
    app.require_subcommand(1);
    Flags f;

    auto* validate_cmd = app.add_subcommand("validate", "check a network description");
    add_common(validate_cmd, f);

    auto* limit = app.add_subcommand("solve-limit", "solve the limit problem on the graph");
    add_common(limit, f);
    add_graph(limit, f);
    f.opts[opt_key(limit, "alpha")] = limit->add_option("--alpha", f.alpha, "boundary intensity exponent");

    auto* cell = app.add_subcommand("solve-cell", "solve the cross-section problem at one point");
    add_common(cell, f);
    add_graph(cell, f);
    f.opts[opt_key(cell, "edge")] = cell->add_option("--edge", f.edge, "edge id");
    f.opts[opt_key(cell, "y")] = cell->add_option("--y", f.y, "axial coordinate");
    f.opts[opt_key(cell, "t")] = cell->add_option("--t", f.t, "time");

    auto* node = app.add_subcommand("solve-node", "solve the node layer at one time");
    add_common(node, f);
    add_graph(node, f);
    add_assembly(node, f);
    f.opts[opt_key(node, "vertex")] = node->add_option("--vertex", f.vertex, "node id");
    f.opts[opt_key(node, "t")] = node->add_option("--t", f.t, "time");

    auto* full = app.add_subcommand("solve-full", "solve the eps-problem directly (planar, one node)");
    add_common(full, f);
    f.opts[opt_key(full, "eps")] = full->add_option("--eps", f.eps, "thickness parameter");
    f.opts[opt_key(full, "rho")] = full->add_option("--rho", f.rho, "cells across the narrowest strip");
    f.opts[opt_key(full, "nt")] = full->add_option("--nt", f.nt, "time steps");
    f.opts[opt_key(full, "alpha")] = full->add_option("--alpha", f.alpha, "boundary intensity exponent");

    auto* assemble = app.add_subcommand("assemble", "assemble the approximation and sample it");
    add_common(assemble, f);
    add_graph(assemble, f);
    add_assembly(assemble, f);
    assemble->add_flag("--correctors", f.correctors, "include first-order terms");
    f.opts[opt_key(assemble, "ny")] = assemble->add_option("--ny", f.ny, "axial samples per edge");
    f.opts[opt_key(assemble, "nxi")] = assemble->add_option("--nxi", f.nxi, "transverse samples per axis");

    auto* converge = app.add_subcommand("converge", "run the eps-convergence study");
    add_common(converge, f);
    add_graph(converge, f);
    add_assembly(converge, f);
    f.opts[opt_key(converge, "epsilons")] = converge->add_option("--epsilons", f.epsilons, "strictly decreasing eps list");
    f.opts[opt_key(converge, "rho")] = converge->add_option("--rho", f.rho, "cells across the narrowest strip");
    f.opts[opt_key(converge, "nt")] = converge->add_option("--nt", f.nt, "direct solver time steps");
    f.opts[opt_key(converge, "min_order")] = converge->add_option("--min-order", f.min_order, "order required to pass");
    f.opts[opt_key(converge, "threads")] = converge->add_option("--threads", f.threads, "parallel eps runs");

    auto* layers = app.add_subcommand("layers", "tabulate the outlet boundary layers");
    add_common(layers, f);
    add_graph(layers, f);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage_error;
    }

    std::string stage = "configuration";
    try {
        auto* sub = app.get_subcommands().front();
        Context c{load_config(f.config), &f, sub};
        const std::string name = sub->get_name();
        const int dim = c.cfg.net.dim;
        if (name == "validate") return cmd_validate(c);
        if (name == "solve-limit") return cmd_solve_limit(c, stage);
        if (name == "solve-cell") return cmd_solve_cell(c, stage);
        if (name == "solve-node") return dim == 2 ? solve_node_dim<2>(c, stage) : solve_node_dim<3>(c, stage);
        if (name == "solve-full") return cmd_solve_full(c, stage);
        if (name == "assemble") return dim == 2 ? assemble_dim<2>(c, stage) : assemble_dim<3>(c, stage);
        if (name == "converge") return cmd_converge(c, stage);
        if (name == "layers") return cmd_layers(c, stage);
        return usage_error;
    } catch (const NumericalError& e) {
        std::cerr << "error in " << stage << ": " << e.what() << '\n';
        return numerical_failure;
    } catch (const std::exception& e) {
        std::cerr << "error in " << stage << ": " << e.what() << '\n';
        return usage_error;
    }
}
