// pspin: free energies of mixed p-spin glasses through the Hopf-Lax formula
// on measures, with cascade/PDE/spherical initial conditions, finite-N
// Monte Carlo references and Poisson-Dirichlet overlap checks.
//
// Every subcommand prints its results (12 significant digits) and writes a
// run manifest JSON next to its outputs; seeded subcommands replay
// bit-exactly from the recorded seed.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pspin/finite_n.hpp"
#include "pspin/hopflax.hpp"
#include "pspin/json_io.hpp"
#include "pspin/version.hpp"

namespace {

using pspin::json;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string out_dir_or_default(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("PSPIN_OUT_DIR"); env && *env) return env;
    return ".";
}

struct ManifestWriter {
    std::string command;
    json parameters = json::object();
    json outputs = json::object();
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void write(const std::string& dir) const {
        std::filesystem::create_directories(dir);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        json j{{"command", command},
               {"version", pspin::version},
               {"parameters", parameters},
               {"wall_time_seconds", secs},
               {"outputs", outputs}};
        pspin::write_json_file(dir + "/" + command + "_manifest.json", j);
    }
};

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::string>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << header << "\n";
    for (const auto& r : rows) out << r << "\n";
}

pspin::PsiKind parse_kind(const std::string& kind) {
    if (kind == "ising") return pspin::PsiKind::ising;
    if (kind == "spherical") return pspin::PsiKind::spherical;
    if (kind == "product") return pspin::PsiKind::product;
    throw CLI::ValidationError("--kind", "must be ising, spherical or product");
}

int run_app(int argc, char** argv) {
    CLI::App app{"mixed p-spin free energies via the Hopf-Lax formula"};
    app.require_subcommand(1);

    std::string out_flag;
    int threads = 0;
    app.add_option("--out", out_flag, "output directory (default: $PSPIN_OUT_DIR or .)");
    app.add_option("--threads", threads, "cap worker threads (0 = hardware)");

    // ---- xi ----------------------------------------------------------
    auto* cmd_xi = app.add_subcommand("xi", "evaluate xi, xi', xi'' and xi* at a point");
    std::string xi_mixture;
    double xi_s = 0.0;
    cmd_xi->add_option("--mixture", xi_mixture, "mixture JSON file")->required();
    cmd_xi->add_option("--s", xi_s, "evaluation point")->required();

    // ---- psi ---------------------------------------------------------
    auto* cmd_psi = app.add_subcommand("psi", "initial condition psi(mu)");
    std::string psi_kind = "ising", psi_measure, psi_p1, psi_cdf;
    double psi_qmax = -1.0, psi_dt = 2e-4, psi_halfwidth = 0.0;
    int psi_nodes = 2049;
    cmd_psi->add_option("--kind", psi_kind, "ising | spherical | product");
    cmd_psi->add_option("--measure", psi_measure, "measure JSON file");
    cmd_psi->add_option("--p1", psi_p1, "single-site law JSON (kind product)");
    cmd_psi->add_option("--cdf", psi_cdf, "CDF JSON file (kind ising: solve the PDE instead)");
    cmd_psi->add_option("--q-max", psi_qmax, "PDE horizon (default: last CDF breakpoint)");
    cmd_psi->add_option("--grid-nodes", psi_nodes, "field grid nodes (odd)");
    cmd_psi->add_option("--grid-dt", psi_dt, "PDE time step");
    cmd_psi->add_option("--grid-halfwidth", psi_halfwidth, "field grid half width (0 = auto)");

    // ---- hopflax -----------------------------------------------------
    auto* cmd_hl = app.add_subcommand("hopflax", "solve the k-atom Hopf-Lax problem f^(k)(t,x)");
    std::string hl_mixture, hl_base, hl_kind = "ising", hl_p1;
    double hl_t = 0.0;
    int hl_grid_points = 201, hl_restarts = 8, hl_field_nodes = 769;
    std::uint64_t hl_seed = 0x9e3779b97f4a7c15ULL;
    cmd_hl->add_option("--mixture", hl_mixture)->required();
    cmd_hl->add_option("--t", hl_t, "time")->required();
    cmd_hl->add_option("--base", hl_base, "JSON array of k base atoms")->required();
    cmd_hl->add_option("--kind", hl_kind, "ising | spherical | product");
    cmd_hl->add_option("--p1", hl_p1, "single-site law JSON (kind product)");
    cmd_hl->add_option("--grid-points", hl_grid_points, "global grid stage points (k <= 3)");
    cmd_hl->add_option("--restarts", hl_restarts, "random ascent restarts");
    cmd_hl->add_option("--seed", hl_seed, "restart seed");
    cmd_hl->add_option("--field-nodes", hl_field_nodes, "cascade grid nodes for psi");

    // ---- parisi ------------------------------------------------------
    auto* cmd_pa = app.add_subcommand("parisi", "Parisi value f^(k)(t, delta_0)");
    std::string pa_mixture, pa_kind = "ising", pa_p1;
    double pa_t = 0.0;
    int pa_k = 1, pa_grid_points = 201, pa_restarts = 8, pa_field_nodes = 769;
    bool pa_sweep = false;
    std::uint64_t pa_seed = 0x9e3779b97f4a7c15ULL;
    cmd_pa->add_option("--mixture", pa_mixture)->required();
    cmd_pa->add_option("--t", pa_t)->required();
    cmd_pa->add_option("--k", pa_k, "number of atoms")->required();
    cmd_pa->add_option("--kind", pa_kind, "ising | spherical | product");
    cmd_pa->add_option("--p1", pa_p1, "single-site law JSON (kind product)");
    cmd_pa->add_flag("--k-sweep", pa_sweep, "tabulate k = 1, 2, 4, ... up to --k");
    cmd_pa->add_option("--grid-points", pa_grid_points);
    cmd_pa->add_option("--restarts", pa_restarts);
    cmd_pa->add_option("--seed", pa_seed);
    cmd_pa->add_option("--field-nodes", pa_field_nodes);

    // ---- classical ---------------------------------------------------
    auto* cmd_cl = app.add_subcommand("classical", "classical Parisi functional at nu");
    std::string cl_mixture, cl_nu, cl_kind = "ising", cl_p1;
    double cl_t = 0.0;
    cmd_cl->add_option("--mixture", cl_mixture)->required();
    cmd_cl->add_option("--t", cl_t)->required();
    cmd_cl->add_option("--nu", cl_nu, "measure JSON on [0,1]")->required();
    cmd_cl->add_option("--kind", cl_kind, "ising | spherical | product");
    cmd_cl->add_option("--p1", cl_p1, "single-site law JSON (kind product)");

    // ---- residual ----------------------------------------------------
    auto* cmd_re = app.add_subcommand("residual", "finite-dimensional HJ equation residual");
    std::string re_mixture, re_base, re_kind = "ising", re_p1;
    double re_t = 0.0, re_h = 1e-3;
    int re_grid_points = 201, re_restarts = 8, re_field_nodes = 769;
    cmd_re->add_option("--mixture", re_mixture)->required();
    cmd_re->add_option("--t", re_t)->required();
    cmd_re->add_option("--base", re_base, "JSON array of interior base atoms")->required();
    cmd_re->add_option("--kind", re_kind);
    cmd_re->add_option("--p1", re_p1);
    cmd_re->add_option("--h", re_h, "finite-difference step");
    cmd_re->add_option("--grid-points", re_grid_points);
    cmd_re->add_option("--restarts", re_restarts);
    cmd_re->add_option("--field-nodes", re_field_nodes);

    // ---- finite-n ----------------------------------------------------
    auto* cmd_fn = app.add_subcommand("finite-n", "exhaustive finite-N free energy, mean +- SE");
    std::string fn_mixture;
    std::vector<int> fn_N;
    double fn_t = 0.0;
    int fn_samples = 100;
    std::uint64_t fn_seed = 1;
    cmd_fn->add_option("--mixture", fn_mixture)->required();
    cmd_fn->add_option("--N", fn_N, "system sizes (repeatable, 1..22)")->required();
    cmd_fn->add_option("--t", fn_t)->required();
    cmd_fn->add_option("--samples", fn_samples, "disorder samples");
    cmd_fn->add_option("--seed", fn_seed);

    // ---- cascade -----------------------------------------------------
    auto* cmd_ca = app.add_subcommand("cascade", "Poisson-Dirichlet overlap estimates");
    std::vector<double> ca_zeta;
    int ca_M = 2048, ca_replicas = 5000;
    std::uint64_t ca_seed = 1;
    cmd_ca->add_option("--zeta", ca_zeta, "cascade levels in (0,1), ascending")->required();
    cmd_ca->add_option("--M", ca_M, "retained points per vertex");
    cmd_ca->add_option("--replicas", ca_replicas);
    cmd_ca->add_option("--seed", ca_seed);

    CLI11_PARSE(app, argc, argv);
    const std::string out_dir = out_dir_or_default(out_flag);
    ManifestWriter manifest;

    if (*cmd_xi) {
        manifest.command = "xi";
        manifest.parameters = {{"mixture", xi_mixture}, {"s", xi_s}};
        const auto m = pspin::mixture_from_json(pspin::load_json_file(xi_mixture));
        const double v0 = m(xi_s), v1 = m.derivative(xi_s), v2 = m.second_derivative(xi_s);
        const double vd = m.dual(xi_s);
        std::cout << "s xi xi' xi'' xi*\n"
                  << fmt(xi_s) << " " << fmt(v0) << " " << fmt(v1) << " " << fmt(v2) << " "
                  << fmt(vd) << "\n";
        manifest.outputs = {{"xi", v0}, {"xi_prime", v1}, {"xi_second", v2}, {"xi_dual", vd}};
        manifest.write(out_dir);
        return 0;
    }

    if (*cmd_psi) {
        manifest.command = "psi";
        manifest.parameters = {{"kind", psi_kind},       {"measure", psi_measure},
                               {"p1", psi_p1},           {"cdf", psi_cdf},
                               {"q_max", psi_qmax},      {"grid_nodes", psi_nodes},
                               {"grid_dt", psi_dt},      {"grid_halfwidth", psi_halfwidth}};
        const auto kind = parse_kind(psi_kind);
        double value = 0.0;
        if (!psi_cdf.empty()) {
            if (kind != pspin::PsiKind::ising)
                throw std::invalid_argument("psi: --cdf is only valid with --kind ising");
            const auto cdf = pspin::cdf_from_json(pspin::load_json_file(psi_cdf));
            const double qmax = psi_qmax >= 0.0 ? psi_qmax : cdf.breakpoints.back();
            auto grid = psi_halfwidth > 0.0
                            ? pspin::FieldGrid(psi_halfwidth, psi_nodes, psi_dt)
                            : pspin::FieldGrid::for_qmax(qmax, psi_nodes, psi_dt);
            value = pspin::psi_ising_pde(cdf, qmax, grid);
        } else {
            if (psi_measure.empty())
                throw std::invalid_argument("psi: need --measure (or --cdf with kind ising)");
            const auto mu = pspin::measure_from_json(pspin::load_json_file(psi_measure));
            if (kind == pspin::PsiKind::spherical) {
                value = pspin::psi_spherical(mu);
            } else {
                const auto law = kind == pspin::PsiKind::product
                                     ? pspin::law_from_json(pspin::load_json_file(psi_p1))
                                     : pspin::SingleSiteLaw::ising();
                auto grid = psi_halfwidth > 0.0
                                ? pspin::FieldGrid(psi_halfwidth, psi_nodes, psi_dt)
                                : pspin::FieldGrid::for_qmax(mu.max_atom(), psi_nodes, psi_dt);
                value = pspin::psi_product(law, mu, grid);
            }
        }
        std::cout << "psi " << fmt(value) << "\n";
        manifest.outputs = {{"psi", value}};
        manifest.write(out_dir);
        return 0;
    }

    auto load_law = [](const std::string& kind, const std::string& path) {
        if (kind != "product") return pspin::SingleSiteLaw{};
        if (path.empty()) throw std::invalid_argument("kind product requires --p1");
        return pspin::law_from_json(pspin::load_json_file(path));
    };

    if (*cmd_hl) {
        manifest.command = "hopflax";
        manifest.parameters = {{"mixture", hl_mixture},   {"t", hl_t},
                               {"base", hl_base},         {"kind", hl_kind},
                               {"grid_points", hl_grid_points}, {"restarts", hl_restarts},
                               {"seed", hl_seed},         {"field_nodes", hl_field_nodes}};
        const auto m = pspin::mixture_from_json(pspin::load_json_file(hl_mixture));
        const auto base = pspin::load_json_file(hl_base).get<std::vector<double>>();
        pspin::HopfLaxProblem prob(m, hl_t, base, parse_kind(hl_kind), load_law(hl_kind, hl_p1),
                                   hl_field_nodes);
        pspin::SolveOptions opts;
        opts.grid_points = hl_grid_points;
        opts.restarts = hl_restarts;
        opts.seed = hl_seed;
        opts.threads = threads;
        const auto res = pspin::solve(prob, opts);
        std::cout << "value " << fmt(res.value) << "\nmaximizer";
        for (double y : res.maximizer) std::cout << " " << fmt(y);
        std::cout << "\n";
        std::string row = fmt(hl_t) + "," + std::to_string(base.size()) + "," + fmt(res.value);
        for (double y : res.maximizer) row += "," + fmt(y);
        write_csv(out_dir + "/hopflax.csv", "t,k,value,maximizer...", {row});
        manifest.outputs = pspin::hopflax_result_to_json(res);
        manifest.write(out_dir);
        return 0;
    }

    if (*cmd_pa) {
        manifest.command = "parisi";
        manifest.parameters = {{"mixture", pa_mixture}, {"t", pa_t},
                               {"k", pa_k},             {"kind", pa_kind},
                               {"k_sweep", pa_sweep},   {"grid_points", pa_grid_points},
                               {"restarts", pa_restarts}, {"seed", pa_seed},
                               {"field_nodes", pa_field_nodes}};
        const auto m = pspin::mixture_from_json(pspin::load_json_file(pa_mixture));
        pspin::SolveOptions opts;
        opts.grid_points = pa_grid_points;
        opts.restarts = pa_restarts;
        opts.seed = pa_seed;
        opts.threads = threads;
        const auto law = load_law(pa_kind, pa_p1);
        std::vector<int> ks;
        if (pa_sweep)
            for (int k = 1; k <= pa_k; k *= 2) ks.push_back(k);
        else
            ks.push_back(pa_k);
        std::vector<std::string> rows;
        json sweep = json::array();
        for (int k : ks) {
            const auto res =
                pspin::parisi_value(m, pa_t, k, parse_kind(pa_kind), opts, law, pa_field_nodes);
            std::cout << "k=" << k << " value " << fmt(res.value) << "\n";
            std::string row = fmt(pa_t) + "," + std::to_string(k) + "," + fmt(res.value);
            for (double y : res.maximizer) row += "," + fmt(y);
            rows.push_back(row);
            sweep.push_back(pspin::hopflax_result_to_json(res));
        }
        write_csv(out_dir + "/parisi.csv", "t,k,value,maximizer...", rows);
        manifest.outputs = {{"results", sweep}};
        manifest.write(out_dir);
        return 0;
    }

    if (*cmd_cl) {
        manifest.command = "classical";
        manifest.parameters = {
            {"mixture", cl_mixture}, {"t", cl_t}, {"nu", cl_nu}, {"kind", cl_kind}};
        const auto m = pspin::mixture_from_json(pspin::load_json_file(cl_mixture));
        const auto nu = pspin::measure_from_json(pspin::load_json_file(cl_nu));
        const double value = pspin::classical_functional(m, cl_t, nu, parse_kind(cl_kind),
                                                         load_law(cl_kind, cl_p1));
        std::cout << "value " << fmt(value) << "\n";
        manifest.outputs = {{"value", value}};
        manifest.write(out_dir);
        return 0;
    }

    if (*cmd_re) {
        manifest.command = "residual";
        manifest.parameters = {{"mixture", re_mixture}, {"t", re_t},   {"base", re_base},
                               {"kind", re_kind},       {"h", re_h},
                               {"grid_points", re_grid_points}, {"restarts", re_restarts},
                               {"field_nodes", re_field_nodes}};
        const auto m = pspin::mixture_from_json(pspin::load_json_file(re_mixture));
        const auto base = pspin::load_json_file(re_base).get<std::vector<double>>();
        pspin::HopfLaxProblem prob(m, re_t, base, parse_kind(re_kind), load_law(re_kind, re_p1),
                                   re_field_nodes);
        pspin::SolveOptions opts;
        opts.grid_points = re_grid_points;
        opts.restarts = re_restarts;
        opts.threads = threads;
        const double r = pspin::hj_residual(prob, re_h, opts);
        std::cout << "residual " << fmt(r) << "\n";
        manifest.outputs = {{"residual", r}};
        manifest.write(out_dir);
        return 0;
    }

    if (*cmd_fn) {
        manifest.command = "finite-n";
        manifest.parameters = {{"mixture", fn_mixture},
                               {"N", fn_N},
                               {"t", fn_t},
                               {"samples", fn_samples},
                               {"seed", fn_seed}};
        const auto m = pspin::mixture_from_json(pspin::load_json_file(fn_mixture));
        std::vector<std::string> rows;
        json runs = json::array();
        for (int n : fn_N) {
            const auto est = pspin::free_energy_plain(m, n, fn_t, fn_samples, fn_seed, threads);
            std::cout << "N=" << n << " mean " << fmt(est.mean) << " +- " << fmt(est.std_error)
                      << "\n";
            rows.push_back(std::to_string(n) + "," + fmt(fn_t) + "," +
                           std::to_string(fn_samples) + "," + fmt(est.mean) + "," +
                           fmt(est.std_error));
            runs.push_back({{"N", n},
                            {"t", fn_t},
                            {"n_samples", fn_samples},
                            {"seed", fn_seed},
                            {"mean", est.mean},
                            {"std_error", est.std_error}});
        }
        write_csv(out_dir + "/finite_n.csv", "N,t,samples,mean,std_error", rows);
        manifest.outputs = {{"runs", runs}};
        manifest.write(out_dir);
        return 0;
    }

    if (*cmd_ca) {
        manifest.command = "cascade";
        manifest.parameters = {
            {"zeta", ca_zeta}, {"M", ca_M}, {"replicas", ca_replicas}, {"seed", ca_seed}};
        std::vector<pspin::CascadeSample> samples(ca_replicas);
        pspin::parallel_for(
            static_cast<std::size_t>(ca_replicas),
            [&](std::size_t r) {
                samples[r] = pspin::sample_cascade(ca_zeta, ca_M, pspin::mix_seed(ca_seed, r));
            },
            threads);
        const std::size_t depth = ca_zeta.size();
        std::vector<double> fences(ca_zeta);
        fences.insert(fences.begin(), 0.0);
        fences.push_back(1.0);
        json levels = json::array();
        std::cout << "level estimate std_error target\n";
        for (std::size_t l = 0; l <= depth; ++l) {
            const auto est = pspin::overlap_statistic(samples, static_cast<int>(l));
            const double target = fences[l + 1] - fences[l];
            std::cout << l << " " << fmt(est.estimate) << " " << fmt(est.std_error) << " "
                      << fmt(target) << "\n";
            levels.push_back({{"level", l},
                              {"estimate", est.estimate},
                              {"std_error", est.std_error},
                              {"target", target}});
        }
        double diag = 0.0;
        for (const auto& s : samples) diag = std::max(diag, s.truncation_diagnostic);
        std::cout << "truncation_diagnostic " << fmt(diag) << "\n";
        manifest.outputs = {{"levels", levels}, {"truncation_diagnostic", diag}};
        manifest.write(out_dir);
        return 0;
    }

    return 2;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_app(argc, argv);
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
