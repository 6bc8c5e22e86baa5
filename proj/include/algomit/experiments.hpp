#ifndef ALGOMIT_EXPERIMENTS_HPP
#define ALGOMIT_EXPERIMENTS_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "algomit/error.hpp"
#include "algomit/error_models.hpp"
#include "algomit/extrapolate.hpp"
#include "algomit/hamiltonian.hpp"
#include "algomit/linalg.hpp"
#include "algomit/pe_sim.hpp"

namespace algomit::experiments {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Seeding and parallel loops
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t tag_hash(std::string_view tag)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Counter-based child stream: the seed depends only on (root, tag, keys), so
/// any run can be regenerated without replaying the others.
inline std::mt19937_64 child_stream(std::uint64_t root, std::string_view tag, std::initializer_list<std::uint64_t> keys)
{
    std::uint64_t s = splitmix64(root ^ tag_hash(tag));
    for (auto k : keys) {
        s = splitmix64(s ^ splitmix64(k + 0x632be59bd9b4e019ULL));
    }
    return std::mt19937_64(s);
}

/// Calls fn(i) for i in [0, count) on up to `threads` workers (0 = hardware).
/// Work items must write only to their own slot.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)> &fn)
{
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                    next = count;
                }
            }
        });
    }
    for (auto &th : pool) {
        th.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// Output of one experiment: tabular rows plus a JSON summary. The config is
/// echoed into both output files.
struct ExperimentRecord
{
    std::string experiment;
    std::uint64_t seed = 0;
    json config;
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;
    json summary;

    std::size_t column(std::string_view name) const
    {
        for (std::size_t i = 0; i < columns.size(); ++i) {
            if (columns[i] == name) {
                return i;
            }
        }
        throw InvalidArgument("ExperimentRecord: no column '" + std::string(name) + "'");
    }

    std::string stem() const { return experiment + "-" + std::to_string(seed); }

    json to_json() const
    {
        return json{{"experiment", experiment}, {"seed", seed}, {"config", config}, {"summary", summary}};
    }
};

inline std::string format_cell(const json &v)
{
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::isnan(d)) return "nan";
        if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
        std::ostringstream out;
        out << std::setprecision(17) << d;
        return out.str();
    }
    if (v.is_string()) {
        return v.get<std::string>();
    }
    if (v.is_null()) {
        return "";
    }
    return v.dump();
}

/// CSV with a leading `# config: {...}` line, then the header and one line per row.
inline void write_csv(const ExperimentRecord &rec, std::ostream &out)
{
    out << "# config: " << json{{"experiment", rec.experiment}, {"seed", rec.seed}, {"config", rec.config}}.dump()
        << "\n";
    for (std::size_t i = 0; i < rec.columns.size(); ++i) {
        out << (i ? "," : "") << rec.columns[i];
    }
    out << "\n";
    for (const auto &row : rec.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out << (i ? "," : "") << format_cell(row[i]);
        }
        out << "\n";
    }
}

/// Writes {experiment}-{seed}.csv and .json under `dir`; returns both paths.
inline std::pair<std::filesystem::path, std::filesystem::path> write_record(const ExperimentRecord &rec,
                                                                            const std::filesystem::path &dir)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
    }
    const auto csv_path = dir / (rec.stem() + ".csv");
    const auto json_path = dir / (rec.stem() + ".json");
    std::ofstream csv(csv_path);
    if (!csv) {
        throw IoError("cannot write '" + csv_path.string() + "'");
    }
    write_csv(rec, csv);
    std::ofstream js(json_path);
    if (!js) {
        throw IoError("cannot write '" + json_path.string() + "'");
    }
    js << rec.to_json().dump(2) << "\n";
    return {csv_path, json_path};
}

// ---------------------------------------------------------------------------
// Power-law fit
// ---------------------------------------------------------------------------

/// error ~ exp(intercept) * x^(-alpha), fitted by least squares in log-log
/// coordinates; `residual` is the RMS of the log-space residuals.
struct PowerLawFit
{
    double alpha = 0.0;
    double intercept = 0.0;
    double residual = 0.0;
};

inline PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points)
{
    if (points.size() < 3) {
        throw InvalidArgument("fit_power_law: at least 3 points are required");
    }
    std::vector<double> lx, ly;
    for (const auto &[x, e] : points) {
        if (!(x > 0.0) || !(e > 0.0)) {
            throw InvalidArgument("fit_power_law: all coordinates must be positive");
        }
        lx.push_back(std::log(x));
        ly.push_back(std::log(e));
    }
    const double n = static_cast<double>(points.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i] / n;
        my += ly[i] / n;
    }
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (!(sxx > 0.0)) {
        throw InvalidArgument("fit_power_law: x values must not all coincide");
    }
    const double slope = sxy / sxx;
    const double intercept = my - slope * mx;
    double ss = 0.0;
    for (const auto &[x, e] : points) {
        const double r = std::log(e) - (intercept + slope * std::log(x));
        ss += r * r;
    }
    return PowerLawFit{-slope, intercept, std::sqrt(ss / n)};
}

// ---------------------------------------------------------------------------
// Trotter sweep
// ---------------------------------------------------------------------------

struct TrotterSweepConfig
{
    Model model = Model::xyz;
    int n = 6;
    std::uint64_t seed = 1;
    std::vector<int> orders{0, 2, 4};
    std::vector<int> trotter_steps{10, 13, 16, 20, 25, 32, 40, 50, 63, 80, 100};
    double t_total = 1.0;
    unsigned threads = 0;
};

inline json config_json(const TrotterSweepConfig &c)
{
    return json{{"model", model_name(c.model)}, {"n", c.n},         {"seed", c.seed},
                {"orders", c.orders},           {"trotter_steps", c.trotter_steps}, {"t_total", c.t_total}};
}

/// One (p, N_Trotter,max) point of the sweep, with exact energies of the
/// implemented Trotter Hamiltonians.
struct TrotterPoint
{
    int p = 0;
    int n_trotter = 0;
    double dt_min = 0.0;
    std::vector<double> steps;
    std::vector<double> energies;
    MitigationWeights weights;
    double estimate = 0.0;
};

struct TrotterSweepData
{
    double exact = 0.0;
    std::vector<TrotterPoint> points;
};

inline void validate(const TrotterSweepConfig &c)
{
    if (c.orders.empty() || c.trotter_steps.empty()) {
        throw InvalidArgument("trotter sweep: orders and trotter_steps must be nonempty");
    }
    for (int p : c.orders) {
        if (p < 0 || p % 2 != 0) {
            throw InvalidArgument("trotter sweep: orders must be nonnegative even integers");
        }
    }
    for (int s : c.trotter_steps) {
        if (s < 1) {
            throw InvalidArgument("trotter sweep: Trotter step counts must be positive");
        }
    }
    if (!(c.t_total > 0.0)) {
        throw InvalidArgument("trotter sweep: t_total must be positive");
    }
}

/// Exact diagonalisation of every H~(dt_k) for every sweep point.
inline TrotterSweepData trotter_sweep_data(const SpinHamiltonian &h, const TrotterSweepConfig &cfg)
{
    validate(cfg);
    const auto [h_a, h_b] = split_even_odd(h);
    TrotterSweepData data;
    data.exact = linalg::ground_energy(dense_matrix(h));
    for (int p : cfg.orders) {
        for (int nt : cfg.trotter_steps) {
            TrotterPoint pt;
            pt.p = p;
            pt.n_trotter = nt;
            pt.dt_min = cfg.t_total / nt;
            pt.steps = trotter_delta_set(p, pt.dt_min);
            data.points.push_back(std::move(pt));
        }
    }
    // Cache H~(dt) energies: the same dt appears for several orders.
    std::map<double, double> cache;
    for (const auto &pt : data.points) {
        for (double dt : pt.steps) {
            cache.emplace(dt, 0.0);
        }
    }
    std::vector<double> keys;
    for (const auto &[k, v] : cache) {
        keys.push_back(k);
    }
    std::vector<double> values(keys.size());
    parallel_for(keys.size(), cfg.threads, [&](std::size_t i) {
        values[i] = linalg::ground_energy(trotter_effective(h_a, h_b, keys[i]).matrix);
    });
    for (std::size_t i = 0; i < keys.size(); ++i) {
        cache[keys[i]] = values[i];
    }
    for (auto &pt : data.points) {
        RMatrix d(1, static_cast<Eigen::Index>(pt.steps.size()));
        for (std::size_t k = 0; k < pt.steps.size(); ++k) {
            d(0, static_cast<Eigen::Index>(k)) = pt.steps[k];
            pt.energies.push_back(cache.at(pt.steps[k]));
        }
        pt.weights = solve_lambda_min_l2(design_matrix(d, pt.p));
        pt.estimate = combine(pt.weights, pt.energies).value;
    }
    return data;
}

inline std::map<int, json> fit_slopes_by_order(const std::vector<std::pair<int, std::pair<double, double>>> &pts)
{
    std::map<int, std::vector<std::pair<double, double>>> by_order;
    for (const auto &[p, xy] : pts) {
        by_order[p].push_back(xy);
    }
    std::map<int, json> out;
    for (const auto &[p, xy] : by_order) {
        try {
            const auto fit = fit_power_law(xy);
            out[p] = json{{"alpha", fit.alpha}, {"intercept", fit.intercept}, {"residual", fit.residual}};
        } catch (const InvalidArgument &) {
            out[p] = nullptr;
        }
    }
    return out;
}

inline ExperimentRecord run_trotter_sweep(const SpinHamiltonian &h, const TrotterSweepConfig &cfg)
{
    const auto data = trotter_sweep_data(h, cfg);
    ExperimentRecord rec;
    rec.experiment = "trotter-sweep";
    rec.seed = cfg.seed;
    rec.config = config_json(cfg);
    rec.columns = {"p",        "n_trotter", "dt_min",  "m",       "run",      "estimate",
                   "exact",    "error",     "l1_norm", "l2_norm", "lambda_sum", "residual"};
    std::vector<std::pair<int, std::pair<double, double>>> fit_points;
    json norms = json::object();
    for (const auto &pt : data.points) {
        const double err = std::abs(pt.estimate - data.exact);
        rec.rows.push_back({pt.p, pt.n_trotter, pt.dt_min, static_cast<int>(pt.steps.size()), 0, pt.estimate,
                            data.exact, err, pt.weights.l1_norm, pt.weights.l2_norm, pt.weights.sum(),
                            pt.weights.residual});
        fit_points.push_back({pt.p, {static_cast<double>(pt.n_trotter), err}});
        norms[std::to_string(pt.p)] = json{{"l1_norm", pt.weights.l1_norm}, {"l2_norm", pt.weights.l2_norm},
                                           {"lambda", std::vector<double>(pt.weights.lambda.data(),
                                                                          pt.weights.lambda.data() +
                                                                              pt.weights.lambda.size())}};
    }
    json slopes = json::object();
    for (const auto &[p, fit] : fit_slopes_by_order(fit_points)) {
        slopes[std::to_string(p)] = fit;
    }
    rec.summary = json{{"exact_ground_energy", data.exact}, {"slopes", slopes}, {"weights", norms}};
    return rec;
}

inline ExperimentRecord run_trotter_sweep(const TrotterSweepConfig &cfg)
{
    return run_trotter_sweep(build_model(cfg.model, cfg.n, cfg.seed), cfg);
}

// ---------------------------------------------------------------------------
// Noise floor
// ---------------------------------------------------------------------------

struct NoiseFloorConfig
{
    TrotterSweepConfig trotter;
    std::vector<double> noise_strengths{0.0};
    int runs = 1000;
};

inline json config_json(const NoiseFloorConfig &c)
{
    auto j = config_json(c.trotter);
    j["noise_strengths"] = c.noise_strengths;
    j["runs"] = c.runs;
    return j;
}

/// Trotter sweep with every eigenvalue reading drawn from the Gaussian noisy-PE
/// surrogate; reports the RMS distance to the exact energy per point next to
/// the closed-form floor.
inline ExperimentRecord run_noise_floor_sweep(const SpinHamiltonian &h, const NoiseFloorConfig &cfg,
                                              const NoiseTable &table)
{
    if (cfg.runs < 1) {
        throw InvalidArgument("noise floor: runs must be positive");
    }
    std::vector<NoiseEntry> entries;
    for (double s : cfg.noise_strengths) {
        entries.push_back(table.lookup(s));
    }
    const auto data = trotter_sweep_data(h, cfg.trotter);
    ExperimentRecord rec;
    rec.experiment = "noise-floor";
    rec.seed = cfg.trotter.seed;
    rec.config = config_json(cfg);
    rec.columns = {"noise_strength", "p",     "n_trotter", "dt_min",  "m",       "run",
                   "estimate",       "exact", "error",     "l2_norm", "floor"};

    const std::size_t n_points = data.points.size();
    const auto runs = static_cast<std::size_t>(cfg.runs);
    json points = json::array();
    for (std::size_t si = 0; si < entries.size(); ++si) {
        PEConfig pe_cfg;
        const auto noise = gaussian_from_entry(entries[si], data.exact);
        pe_cfg.mode = noise;
        std::vector<double> estimates(n_points * runs);
        parallel_for(n_points, cfg.trotter.threads, [&](std::size_t pi) {
            const auto &pt = data.points[pi];
            for (std::size_t r = 0; r < runs; ++r) {
                auto rng = child_stream(cfg.trotter.seed, "noise-floor", {si, pi, r});
                std::vector<double> sampled(pt.energies.size());
                for (std::size_t k = 0; k < sampled.size(); ++k) {
                    sampled[k] = noisy_energy_sample(pt.energies[k], pe_cfg, rng);
                }
                estimates[pi * runs + r] = combine(pt.weights, sampled).value;
            }
        });
        for (std::size_t pi = 0; pi < n_points; ++pi) {
            const auto &pt = data.points[pi];
            const double floor = noise_floor(pt.weights, noise.delta_e, data.exact + noise.bias, data.exact);
            double sq = 0.0;
            for (std::size_t r = 0; r < runs; ++r) {
                const double est = estimates[pi * runs + r];
                const double err = est - data.exact;
                sq += err * err;
                rec.rows.push_back({entries[si].strength, pt.p, pt.n_trotter, pt.dt_min,
                                    static_cast<int>(pt.steps.size()), static_cast<int>(r), est, data.exact,
                                    std::abs(err), pt.weights.l2_norm, floor});
            }
            points.push_back(json{{"noise_strength", entries[si].strength},
                                  {"p", pt.p},
                                  {"n_trotter", pt.n_trotter},
                                  {"rms", std::sqrt(sq / static_cast<double>(runs))},
                                  {"noiseless_error", std::abs(pt.estimate - data.exact)},
                                  {"floor", floor},
                                  {"l2_norm", pt.weights.l2_norm}});
        }
    }
    rec.summary = json{{"exact_ground_energy", data.exact}, {"points", points}};
    return rec;
}

inline ExperimentRecord run_noise_floor_sweep(const NoiseFloorConfig &cfg, const NoiseTable &table)
{
    return run_noise_floor_sweep(build_model(cfg.trotter.model, cfg.trotter.n, cfg.trotter.seed), cfg, table);
}

// ---------------------------------------------------------------------------
// Qubitisation histograms
// ---------------------------------------------------------------------------

enum class Strategy : std::uint8_t { raw, first_order_min_l2, first_order_nonneg, second_order_min_l2 };

inline std::string strategy_name(Strategy s)
{
    switch (s) {
    case Strategy::raw: return "raw";
    case Strategy::first_order_min_l2: return "first_order_min_l2";
    case Strategy::first_order_nonneg: return "first_order_nonneg";
    case Strategy::second_order_min_l2: return "second_order_min_l2";
    }
    return "raw";
}

inline Strategy parse_strategy(const std::string &s)
{
    for (auto st : {Strategy::raw, Strategy::first_order_min_l2, Strategy::first_order_nonneg,
                    Strategy::second_order_min_l2}) {
        if (strategy_name(st) == s) {
            return st;
        }
    }
    throw InvalidArgument("unknown strategy '" + s + "'");
}

inline int strategy_order(Strategy s)
{
    switch (s) {
    case Strategy::raw: return 0;
    case Strategy::first_order_min_l2:
    case Strategy::first_order_nonneg: return 1;
    case Strategy::second_order_min_l2: return 2;
    }
    return 0;
}

/// Acceptance test on the weights of a candidate set: ||lambda||_2 < 1 for
/// the minimum-l2 strategies, every lambda_k > 0 for the nonnegative one.
inline bool strategy_accepts(Strategy s, const MitigationWeights &w)
{
    switch (s) {
    case Strategy::raw: return true;
    case Strategy::first_order_min_l2:
    case Strategy::second_order_min_l2: return w.l2_norm < 1.0;
    case Strategy::first_order_nonneg: return w.lambda.minCoeff() > 0.0;
    }
    return false;
}

struct QubitHistogramConfig
{
    Model model = Model::ising;
    int n = 8;
    std::uint64_t seed = 1;
    std::vector<int> mus{10};
    std::vector<Strategy> strategies{Strategy::raw, Strategy::first_order_min_l2, Strategy::first_order_nonneg,
                                     Strategy::second_order_min_l2};
    int runs = 10000;
    int q = 16;
    /// Independent offset-set draws shared round-robin by the runs; 0 means a
    /// fresh draw for every run.
    int eps_sets = 0;
    /// Offset redraws allowed at a given m before m is incremented.
    int redraw_budget = 2000;
    /// Maximum number of increments of m beyond its starting value.
    int max_m_increments = 200;
    unsigned threads = 0;
};

inline json config_json(const QubitHistogramConfig &c)
{
    std::vector<std::string> strategies;
    for (auto s : c.strategies) {
        strategies.push_back(strategy_name(s));
    }
    return json{{"model", model_name(c.model)}, {"n", c.n},         {"seed", c.seed},
                {"mus", c.mus},                 {"strategies", strategies}, {"runs", c.runs},
                {"q", c.q},                     {"eps_sets", c.eps_sets},   {"redraw_budget", c.redraw_budget},
                {"max_m_increments", c.max_m_increments}};
}

/// Drops the columns a nonnegative solution gives zero weight: they need not
/// be implemented at all.
inline void keep_positive(OffsetDraw &draw, MitigationWeights &w)
{
    std::vector<Eigen::Index> keep;
    for (Eigen::Index k = 0; k < w.lambda.size(); ++k) {
        if (w.lambda(k) > 0.0) {
            keep.push_back(k);
        }
    }
    RMatrix deltas(draw.deltas.rows(), static_cast<Eigen::Index>(keep.size()));
    RVector lambda(static_cast<Eigen::Index>(keep.size()));
    std::vector<std::vector<int>> offsets;
    for (std::size_t j = 0; j < keep.size(); ++j) {
        deltas.col(static_cast<Eigen::Index>(j)) = draw.deltas.col(keep[j]);
        lambda(static_cast<Eigen::Index>(j)) = w.lambda(keep[j]);
        offsets.push_back(draw.offsets[static_cast<std::size_t>(keep[j])]);
    }
    draw.deltas = std::move(deltas);
    draw.offsets = std::move(offsets);
    w.lambda = std::move(lambda);
    w.l1_norm = w.lambda.lpNorm<1>();
    w.l2_norm = w.lambda.norm();
}

/// A retained set of implemented Hamiltonians: offsets, weights and the
/// exact ground energies of each H'_k.
struct RetainedSet
{
    int p = 0;
    int attempts = 0;
    RMatrix deltas;
    std::vector<std::vector<int>> offsets;
    MitigationWeights weights;
    std::vector<double> energies;
};

inline double ground_energy_with_coefficients(const SpinHamiltonian &h, std::span<const double> c)
{
    return linalg::ground_energy(dense_matrix(with_coefficients(h, c)));
}

/// Redraws offset sets until the strategy's condition on lambda holds (the
/// nonnegative strategy solves by NNLS and keeps the support),
/// incrementing m after `redraw_budget` failures; then diagonalises the
/// retained H'_k.
template <class Urbg>
RetainedSet draw_retained_set(const SpinHamiltonian &h, int mu, Strategy strategy, const QubitHistogramConfig &cfg,
                              Urbg &rng)
{
    const auto c = h.coefficients();
    RetainedSet out;
    out.p = strategy_order(strategy);
    if (strategy == Strategy::raw) {
        out.offsets.assign(1, std::vector<int>(c.size(), 0));
        const auto d = qubitised_delta(c, mu, out.offsets[0]);
        out.deltas = Eigen::Map<const RMatrix>(d.data(), static_cast<Eigen::Index>(d.size()), 1);
        out.weights = solve_lambda_min_l2(design_matrix(out.deltas, 0));
    } else {
        const int n_params = static_cast<int>(c.size());
        const int m_start = static_cast<int>(analytic_min_m(n_params, out.p)) + extra_columns;
        bool found = false;
        for (int m = m_start; m <= m_start + cfg.max_m_increments && !found; ++m) {
            for (int attempt = 0; attempt < cfg.redraw_budget; ++attempt) {
                ++out.attempts;
                auto draw = draw_offset_columns(c, mu, m, rng);
                MitigationWeights w;
                try {
                    if (strategy == Strategy::first_order_nonneg) {
                        w = solve_lambda_nonnegative(design_matrix(draw.deltas, out.p));
                        keep_positive(draw, w);
                    } else {
                        w = solve_lambda_min_l2(design_matrix(draw.deltas, out.p));
                    }
                } catch (const Infeasible &) {
                    continue;
                }
                if (strategy_accepts(strategy, w)) {
                    out.deltas = std::move(draw.deltas);
                    out.offsets = std::move(draw.offsets);
                    out.weights = std::move(w);
                    found = true;
                    break;
                }
            }
        }
        if (!found) {
            std::ostringstream msg;
            msg << "qubit histogram: strategy " << strategy_name(strategy) << " found no acceptable offset set up to m = "
                << m_start + cfg.max_m_increments;
            throw Exhausted(msg.str());
        }
    }
    out.energies.reserve(out.offsets.size());
    for (const auto &col : out.offsets) {
        const auto cp = qubitise_coeffs_steps(c, mu, col);
        out.energies.push_back(ground_energy_with_coefficients(h, cp));
    }
    return out;
}

inline ExperimentRecord run_qubitisation_histogram(const SpinHamiltonian &target, const QubitHistogramConfig &cfg)
{
    if (cfg.runs < 1 || cfg.q < 1 || cfg.eps_sets < 0 || cfg.mus.empty() || cfg.strategies.empty()) {
        throw InvalidArgument("qubit histogram: runs, q, mus and strategies must be positive/nonempty");
    }
    const SpinHamiltonian h = normalised(target);
    const double exact = linalg::ground_energy(dense_matrix(h));
    const auto runs = static_cast<std::size_t>(cfg.runs);
    const std::size_t n_sets = cfg.eps_sets == 0 ? runs : std::min<std::size_t>(runs, cfg.eps_sets);

    ExperimentRecord rec;
    rec.experiment = "qubit-histogram";
    rec.seed = cfg.seed;
    rec.config = config_json(cfg);
    rec.columns = {"mu", "strategy", "run", "eps_set", "p", "m", "l1_norm", "l2_norm", "estimate", "exact", "error"};
    json groups = json::array();

    for (std::size_t mi = 0; mi < cfg.mus.size(); ++mi) {
        const int mu = cfg.mus[mi];
        for (auto strategy : cfg.strategies) {
            const auto sid = static_cast<std::uint64_t>(strategy);
            const std::size_t sets_needed = strategy == Strategy::raw ? 1 : n_sets;
            std::vector<RetainedSet> sets(sets_needed);
            parallel_for(sets_needed, cfg.threads, [&](std::size_t e) {
                auto rng = child_stream(cfg.seed, "qubit-histogram/offsets", {static_cast<std::uint64_t>(mu), sid, e});
                sets[e] = draw_retained_set(h, mu, strategy, cfg, rng);
            });
            std::vector<double> estimates(runs);
            parallel_for(runs, cfg.threads, [&](std::size_t r) {
                const auto &set = sets[r % sets.size()];
                auto rng = child_stream(cfg.seed, "qubit-histogram/pe", {static_cast<std::uint64_t>(mu), sid, r});
                std::vector<double> sampled(set.energies.size());
                for (std::size_t k = 0; k < sampled.size(); ++k) {
                    sampled[k] = pe_sample_from_energy(set.energies[k], cfg.q, rng);
                }
                estimates[r] = combine(set.weights, sampled).value;
            });
            double mean = 0.0;
            for (double v : estimates) {
                mean += v;
            }
            mean /= static_cast<double>(runs);
            double var = 0.0, mean_l2 = 0.0, mean_m = 0.0;
            for (std::size_t r = 0; r < runs; ++r) {
                const auto &set = sets[r % sets.size()];
                var += (estimates[r] - mean) * (estimates[r] - mean);
                mean_l2 += set.weights.l2_norm;
                mean_m += static_cast<double>(set.weights.size());
                rec.rows.push_back({mu, strategy_name(strategy), static_cast<int>(r),
                                    static_cast<int>(r % sets.size()), set.p, static_cast<int>(set.weights.size()),
                                    set.weights.l1_norm, set.weights.l2_norm, estimates[r], exact,
                                    std::abs(estimates[r] - exact)});
            }
            const double n = static_cast<double>(runs);
            groups.push_back(json{{"mu", mu},
                                  {"strategy", strategy_name(strategy)},
                                  {"mean", mean},
                                  {"bias", mean - exact},
                                  {"std", runs > 1 ? std::sqrt(var / (n - 1.0)) : 0.0},
                                  {"mean_l2_norm", mean_l2 / n},
                                  {"mean_m", mean_m / n},
                                  {"eps_sets", sets.size()}});
        }
    }
    rec.summary = json{{"exact_ground_energy", exact}, {"groups", groups}};
    return rec;
}

inline ExperimentRecord run_qubitisation_histogram(const QubitHistogramConfig &cfg)
{
    return run_qubitisation_histogram(build_model(cfg.model, cfg.n, cfg.seed), cfg);
}

// ---------------------------------------------------------------------------
// Vary m
// ---------------------------------------------------------------------------

struct VaryMConfig
{
    Model model = Model::ising;
    std::vector<int> n_values{3, 4, 5};
    std::uint64_t seed = 1;
    int m_min = 1;
    int m_max = 60;
    int mu = 6;
    int p_max = 4;
    int runs = 10000;
    int q = 16;
    bool per_run_rows = false;
    unsigned threads = 0;
};

inline json config_json(const VaryMConfig &c)
{
    return json{{"model", model_name(c.model)}, {"n_values", c.n_values}, {"seed", c.seed},
                {"m_min", c.m_min},             {"m_max", c.m_max},       {"mu", c.mu},
                {"p_max", c.p_max},             {"runs", c.runs},         {"q", c.q},
                {"per_run_rows", c.per_run_rows}};
}

/// One random offset draw per m; p is the highest order whose system is
/// solvable; the mean |estimate - E| is averaged over PE samplings.
inline ExperimentRecord run_vary_m(const VaryMConfig &cfg)
{
    if (cfg.m_min < 1 || cfg.m_max < cfg.m_min || cfg.runs < 1 || cfg.p_max < 0 || cfg.n_values.empty()) {
        throw InvalidArgument("vary-m: need 1 <= m_min <= m_max, runs >= 1, p_max >= 0");
    }
    ExperimentRecord rec;
    rec.experiment = "vary-m";
    rec.seed = cfg.seed;
    rec.config = config_json(cfg);
    if (cfg.per_run_rows) {
        rec.columns = {"n", "n_terms", "m", "p", "run", "l1_norm", "l2_norm", "estimate", "exact", "error"};
    } else {
        rec.columns = {"n", "n_terms", "m", "p", "runs", "l1_norm", "l2_norm", "exact", "mean_error", "rms_error"};
    }
    json chains = json::array();
    for (int n : cfg.n_values) {
        const SpinHamiltonian h = normalised(build_model(cfg.model, n, cfg.seed));
        const auto c = h.coefficients();
        const double exact = linalg::ground_energy(dense_matrix(h));
        const auto count = static_cast<std::size_t>(cfg.m_max - cfg.m_min + 1);

        struct Point
        {
            int m = 0;
            int p = -1;
            MitigationWeights weights;
            std::vector<double> errors;
            std::vector<double> estimates;
        };
        std::vector<Point> pts(count);
        parallel_for(count, cfg.threads, [&](std::size_t i) {
            auto &pt = pts[i];
            pt.m = cfg.m_min + static_cast<int>(i);
            auto rng = child_stream(cfg.seed, "vary-m/offsets", {static_cast<std::uint64_t>(n),
                                                                   static_cast<std::uint64_t>(pt.m)});
            const auto draw = draw_offset_columns(c, cfg.mu, pt.m, rng);
            pt.p = highest_feasible_order(draw.deltas, cfg.p_max);
            pt.weights = solve_lambda_min_l2(design_matrix(draw.deltas, pt.p));
            std::vector<double> energies;
            for (const auto &col : draw.offsets) {
                energies.push_back(ground_energy_with_coefficients(h, qubitise_coeffs_steps(c, cfg.mu, col)));
            }
            pt.errors.resize(static_cast<std::size_t>(cfg.runs));
            pt.estimates.resize(static_cast<std::size_t>(cfg.runs));
            std::vector<double> sampled(energies.size());
            for (int r = 0; r < cfg.runs; ++r) {
                auto prng = child_stream(cfg.seed, "vary-m/pe", {static_cast<std::uint64_t>(n),
                                                                  static_cast<std::uint64_t>(pt.m),
                                                                  static_cast<std::uint64_t>(r)});
                for (std::size_t k = 0; k < energies.size(); ++k) {
                    sampled[k] = pe_sample_from_energy(energies[k], cfg.q, prng);
                }
                const double est = combine(pt.weights, sampled).value;
                pt.estimates[static_cast<std::size_t>(r)] = est;
                pt.errors[static_cast<std::size_t>(r)] = std::abs(est - exact);
            }
        });
        json series = json::array();
        json transitions = json::object();
        int last_p = -1;
        for (const auto &pt : pts) {
            double sum = 0.0, sq = 0.0;
            for (double e : pt.errors) {
                sum += e;
                sq += e * e;
            }
            const double mean_err = sum / cfg.runs;
            const double rms_err = std::sqrt(sq / cfg.runs);
            if (cfg.per_run_rows) {
                for (int r = 0; r < cfg.runs; ++r) {
                    rec.rows.push_back({n, static_cast<int>(c.size()), pt.m, pt.p, r, pt.weights.l1_norm,
                                        pt.weights.l2_norm, pt.estimates[static_cast<std::size_t>(r)], exact,
                                        pt.errors[static_cast<std::size_t>(r)]});
                }
            } else {
                rec.rows.push_back({n, static_cast<int>(c.size()), pt.m, pt.p, cfg.runs, pt.weights.l1_norm,
                                    pt.weights.l2_norm, exact, mean_err, rms_err});
            }
            series.push_back(json{{"m", pt.m},
                                  {"p", pt.p},
                                  {"mean_error", mean_err},
                                  {"rms_error", rms_err},
                                  {"l2_norm", pt.weights.l2_norm}});
            if (pt.p > last_p) {
                transitions[std::to_string(pt.p)] = pt.m;
                last_p = pt.p;
            }
        }
        chains.push_back(json{{"n", n},
                              {"n_terms", c.size()},
                              {"exact_ground_energy", exact},
                              {"m_p_min", transitions},
                              {"series", series}});
    }
    rec.summary = json{{"chains", chains}};
    return rec;
}

} // namespace algomit::experiments

#endif // ALGOMIT_EXPERIMENTS_HPP
