// algomit: command-line front end for the extrapolation experiments.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "algomit/algomit.hpp"

namespace ex = algomit::experiments;
using nlohmann::json;

namespace {

std::filesystem::path default_out_dir()
{
    if (const char *env = std::getenv("ALGOMIT_OUT_DIR"); env != nullptr && *env != '\0') {
        return env;
    }
    return "results";
}

struct Common
{
    std::string model = "xyz";
    std::vector<int> n{6};
    std::uint64_t seed = 1;
    std::string out;
    unsigned threads = 0;
};

void add_common(CLI::App *app, Common &c, const std::string &model, std::vector<int> n)
{
    c.model = model;
    c.n = std::move(n);
    app->add_option("--model", c.model, "Hamiltonian family")
        ->check(CLI::IsMember({"ising", "xyz"}))
        ->capture_default_str();
    app->add_option("--seed", c.seed, "Master seed (Hamiltonian coefficients and all sampling)")->capture_default_str();
    app->add_option("--out", c.out, "Output directory (default: $ALGOMIT_OUT_DIR or ./results)");
    app->add_option("--threads", c.threads, "Worker threads, 0 = all cores")->capture_default_str();
}

void report(const ex::ExperimentRecord &rec, const Common &c)
{
    const auto dir = c.out.empty() ? default_out_dir() : std::filesystem::path(c.out);
    const auto [csv, js] = ex::write_record(rec, dir);
    std::cout << rec.summary.dump(2) << "\n";
    std::cerr << "wrote " << csv.string() << " and " << js.string() << "\n";
}

int single_n(const Common &c)
{
    if (c.n.size() != 1) {
        throw algomit::InvalidArgument("--n takes a single value for this subcommand");
    }
    return c.n.front();
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Richardson extrapolation of eigenvalues against algorithmic errors"};
    app.require_subcommand(1);

    // trotter-sweep / noise-floor
    Common trotter_common;
    ex::TrotterSweepConfig trotter;
    auto *sweep = app.add_subcommand("trotter-sweep", "Mitigated Trotter error vs maximum number of Trotter steps");
    add_common(sweep, trotter_common, "xyz", {6});
    sweep->add_option("--n", trotter_common.n, "Number of sites")->expected(1)->capture_default_str();
    sweep->add_option("--orders", trotter.orders, "Even mitigation orders p")->delimiter(',')->capture_default_str();
    sweep->add_option("--trotter-steps", trotter.trotter_steps, "Values of the maximum Trotter step count")
        ->delimiter(',')
        ->capture_default_str();
    sweep->add_option("--t-total", trotter.t_total, "Total evolution time")->capture_default_str();

    Common floor_common;
    ex::NoiseFloorConfig floor_cfg;
    std::string noise_table;
    auto *floor = app.add_subcommand("noise-floor", "Trotter sweep with Gaussian noisy-PE readings");
    add_common(floor, floor_common, "xyz", {6});
    floor->add_option("--n", floor_common.n, "Number of sites")->expected(1)->capture_default_str();
    floor->add_option("--orders", floor_cfg.trotter.orders, "Even mitigation orders p")
        ->delimiter(',')
        ->capture_default_str();
    floor->add_option("--trotter-steps", floor_cfg.trotter.trotter_steps, "Values of the maximum Trotter step count")
        ->delimiter(',')
        ->capture_default_str();
    floor->add_option("--t-total", floor_cfg.trotter.t_total, "Total evolution time")->capture_default_str();
    floor->add_option("--noise-table", noise_table, "CSV with columns noise_strength,E_bar,Delta_E")
        ->required()
        ->check(CLI::ExistingFile);
    floor->add_option("--noise-strengths", floor_cfg.noise_strengths, "Table rows to simulate")
        ->delimiter(',')
        ->capture_default_str();
    floor->add_option("--runs", floor_cfg.runs, "Runs per point")->capture_default_str();

    // qubit-histogram
    Common hist_common;
    ex::QubitHistogramConfig hist;
    std::vector<std::string> strategies{"raw", "first_order_min_l2", "first_order_nonneg", "second_order_min_l2"};
    auto *histogram = app.add_subcommand("qubit-histogram", "Distribution of estimates under qubitisation rounding");
    add_common(histogram, hist_common, "ising", {8});
    histogram->add_option("--n", hist_common.n, "Number of sites")->expected(1)->capture_default_str();
    histogram->add_option("--mu", hist.mus, "Rounding bits")->delimiter(',')->capture_default_str();
    histogram->add_option("--strategies", strategies, "Strategies to run")->delimiter(',')->capture_default_str();
    histogram->add_option("--runs", hist.runs, "Number of runs")->capture_default_str();
    histogram->add_option("--q", hist.q, "PE ancilla qubits")->capture_default_str();
    histogram->add_option("--eps-sets", hist.eps_sets, "Independent offset sets shared by the runs (0 = one per run)")
        ->capture_default_str();
    histogram->add_option("--redraw-budget", hist.redraw_budget, "Offset redraws per m")->capture_default_str();

    // vary-m
    Common vary_common;
    ex::VaryMConfig vary;
    auto *varym = app.add_subcommand("vary-m", "Mean error vs number of implemented Hamiltonians");
    add_common(varym, vary_common, "ising", {3, 4, 5});
    varym->add_option("--n", vary_common.n, "Number of sites, comma separated")->delimiter(',')->capture_default_str();
    varym->add_option("--m-min", vary.m_min, "Smallest m")->capture_default_str();
    varym->add_option("--m", vary.m_max, "Largest m")->capture_default_str();
    varym->add_option("--mu", vary.mu, "Rounding bits")->capture_default_str();
    varym->add_option("--p", vary.p_max, "Highest order considered")->capture_default_str();
    varym->add_option("--runs", vary.runs, "PE samplings per m")->capture_default_str();
    varym->add_option("--q", vary.q, "PE ancilla qubits")->capture_default_str();
    varym->add_flag("--per-run-rows", vary.per_run_rows, "Write one CSV row per run instead of per m");

    // solve-lambda
    std::string deltas_path;
    int solve_p = 1;
    std::string regime = "min_l2";
    auto *solve = app.add_subcommand("solve-lambda", "Mitigation weights for a delta set");
    solve->add_option("--deltas", deltas_path, "JSON file with a 'deltas' array of columns")
        ->required()
        ->check(CLI::ExistingFile);
    solve->add_option("--p", solve_p, "Order")->capture_default_str();
    solve->add_option("--regime", regime, "Solver")
        ->check(CLI::IsMember({"min_l2", "nonnegative", "exact_square"}))
        ->capture_default_str();

    // pe-budget
    int budget_terms = 0;
    int budget_p = 1;
    double beta = 1.0;
    std::string budget_model = "ising";
    int budget_n = 8;
    auto *budget = app.add_subcommand("pe-budget", "Phase-estimation calls for an order-p estimate");
    budget->add_option("--terms", budget_terms, "Number of perturbed parameters N (overrides --model/--n)");
    budget->add_option("--model", budget_model, "Hamiltonian family")
        ->check(CLI::IsMember({"ising", "xyz"}))
        ->capture_default_str();
    budget->add_option("--n", budget_n, "Number of sites")->capture_default_str();
    budget->add_option("--p", budget_p, "Order")->capture_default_str();
    budget->add_option("--beta", beta, "Ground-state overlap")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        return app.exit(e);
    }

    try {
        if (*sweep) {
            trotter.model = algomit::parse_model(trotter_common.model);
            trotter.n = single_n(trotter_common);
            trotter.seed = trotter_common.seed;
            trotter.threads = trotter_common.threads;
            report(ex::run_trotter_sweep(trotter), trotter_common);
        } else if (*floor) {
            floor_cfg.trotter.model = algomit::parse_model(floor_common.model);
            floor_cfg.trotter.n = single_n(floor_common);
            floor_cfg.trotter.seed = floor_common.seed;
            floor_cfg.trotter.threads = floor_common.threads;
            const auto table = algomit::NoiseTable::load(noise_table);
            auto rec = ex::run_noise_floor_sweep(floor_cfg, table);
            rec.config["noise_table"] = noise_table;
            report(rec, floor_common);
        } else if (*histogram) {
            hist.model = algomit::parse_model(hist_common.model);
            hist.n = single_n(hist_common);
            hist.seed = hist_common.seed;
            hist.threads = hist_common.threads;
            hist.strategies.clear();
            for (const auto &s : strategies) {
                hist.strategies.push_back(ex::parse_strategy(s));
            }
            report(ex::run_qubitisation_histogram(hist), hist_common);
        } else if (*varym) {
            vary.model = algomit::parse_model(vary_common.model);
            vary.n_values = vary_common.n;
            vary.seed = vary_common.seed;
            vary.threads = vary_common.threads;
            report(ex::run_vary_m(vary), vary_common);
        } else if (*solve) {
            std::ifstream in(deltas_path);
            json j;
            try {
                j = json::parse(in);
            } catch (const json::exception &e) {
                throw algomit::IoError(deltas_path + ": " + e.what());
            }
            const auto set = algomit::perturbation_from_json(j);
            const auto sys = algomit::design_matrix(set.deltas, solve_p);
            algomit::MitigationWeights w;
            if (regime == "min_l2") {
                w = algomit::solve_lambda_min_l2(sys);
            } else if (regime == "nonnegative") {
                w = algomit::solve_lambda_nonnegative(sys);
            } else {
                w = algomit::solve_lambda_exact(sys.matrix, sys.target);
            }
            std::cout << algomit::weights_json(w, &set.deltas, solve_p).dump(2) << "\n";
        } else if (*budget) {
            int terms = budget_terms;
            if (terms <= 0) {
                terms = static_cast<int>(algomit::build_model(algomit::parse_model(budget_model), budget_n, 1)
                                             .terms.size());
            }
            const auto m_min = algomit::analytic_min_m(terms, budget_p);
            json out{{"n_params", terms},
                     {"p", budget_p},
                     {"beta", beta},
                     {"m_min", m_min},
                     {"m", m_min + algomit::extra_columns},
                     {"pe_calls", algomit::pe_call_budget(terms, budget_p, beta)}};
            std::cout << out.dump(2) << "\n";
        }
    } catch (const algomit::HullInfeasible &e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 3;
    } catch (const algomit::Error &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
