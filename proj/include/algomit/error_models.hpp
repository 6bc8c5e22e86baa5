#ifndef ALGOMIT_ERROR_MODELS_HPP
#define ALGOMIT_ERROR_MODELS_HPP

#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "algomit/error.hpp"
#include "algomit/hamiltonian.hpp"
#include "algomit/linalg.hpp"

namespace algomit {

/// First-order Trotter product exp(-i H_A dt) exp(-i H_B dt); `swapped` means
/// the factors were applied in the order B then A.
struct TrotterProvenance
{
    double dt = 0.0;
    bool swapped = false;
};

/// Coefficients rounded to `mu` bits with per-term offsets (in units of 2^-mu).
struct QubitisedProvenance
{
    std::vector<int> offsets;
    int mu = 0;
};

using Provenance = std::variant<TrotterProvenance, QubitisedProvenance>;

/// An implementable observable H'_k together with the known error
/// parameters delta_k that locate it relative to the target H.
struct EffectiveHamiltonian
{
    CMatrix matrix;
    Provenance provenance;
    std::vector<double> delta;
};

/// m implementable observables; column k of `deltas` is delta_k.
struct PerturbationSet
{
    RMatrix deltas;
    std::vector<EffectiveHamiltonian> effective;
    std::string provenance;
    int mu = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<int>> offsets;

    Eigen::Index size() const { return deltas.cols(); }
};

/// H~(dt) = (i/dt) log(exp(-i H_A dt) exp(-i H_B dt)).
///
/// Negative steps use H~(-t) = (i/t) log(exp(-i H_B t) exp(-i H_A t)): the
/// factors are swapped and no backward evolution is ever formed.
inline EffectiveHamiltonian trotter_effective(const SpinHamiltonian &h_a, const SpinHamiltonian &h_b, double dt,
                                              bool swap_order = false, int max_sites = default_max_sites)
{
    if (dt == 0.0 || !std::isfinite(dt)) {
        throw InvalidArgument("trotter_effective: time step must be finite and nonzero");
    }
    if (h_a.n_sites != h_b.n_sites) {
        throw InvalidArgument("trotter_effective: H_A and H_B act on different chain lengths");
    }
    const bool swapped = swap_order != (dt < 0.0);
    const double tau = std::abs(dt);
    const CMatrix a = dense_matrix(h_a, max_sites);
    const CMatrix b = dense_matrix(h_b, max_sites);
    const CMatrix ua = linalg::expm_unitary(a, tau);
    const CMatrix ub = linalg::expm_unitary(b, tau);
    const CMatrix product = swapped ? CMatrix(ub * ua) : CMatrix(ua * ub);
    const CMatrix log_u = linalg::logm_principal(product);
    CMatrix h = cplx(0.0, 1.0 / tau) * log_u;
    h = 0.5 * (h + h.adjoint()).eval();
    return EffectiveHamiltonian{std::move(h), TrotterProvenance{dt, swapped}, {dt}};
}

/// {k * dt_min : k in [-p/2, p/2 + 1], k != 0}, ascending. p must be even.
inline std::vector<double> trotter_delta_set(int p, double dt_min)
{
    if (p < 0 || p % 2 != 0) {
        std::ostringstream msg;
        msg << "trotter_delta_set: order p = " << p
            << " is not a nonnegative even integer; the symmetric step set needs p/2 negative steps";
        throw InvalidArgument(msg.str());
    }
    if (!(dt_min > 0.0) || !std::isfinite(dt_min)) {
        throw InvalidArgument("trotter_delta_set: dt_min must be positive");
    }
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(p + 1));
    for (int k = -p / 2; k <= p / 2 + 1; ++k) {
        if (k != 0) {
            out.push_back(k * dt_min);
        }
    }
    return out;
}

namespace detail {

inline void require_unit_sum(std::span<const double> c, const char *op)
{
    double total = 0.0;
    for (double x : c) {
        total += x;
    }
    if (!(std::abs(total - 1.0) <= 1e-12)) {
        std::ostringstream msg;
        msg << op << ": coefficients must sum to 1 (got " << total << ")";
        throw InvalidArgument(msg.str());
    }
}

inline double grid_round(double c, int mu)
{
    const double scale = std::ldexp(1.0, mu);
    return std::round(c * scale) / scale;
}

} // namespace detail

/// Rounds each coefficient to the mu-bit grid, adds offsets[i] * 2^-mu and
/// renormalises to unit sum. Offsets are integer steps in {-1, 0, 1}.
inline std::vector<double> qubitise_coeffs_steps(std::span<const double> c, int mu, std::span<const int> offsets)
{
    if (mu < 1 || mu > 52) {
        throw InvalidArgument("qubitise_coeffs: bit precision must lie in [1, 52]");
    }
    if (offsets.size() != c.size()) {
        throw InvalidArgument("qubitise_coeffs: one offset per coefficient is required");
    }
    detail::require_unit_sum(c, "qubitise_coeffs");
    const double step = std::ldexp(1.0, -mu);
    std::vector<double> out(c.size());
    double total = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (offsets[i] < -1 || offsets[i] > 1) {
            throw InvalidArgument("qubitise_coeffs: offsets must be -1, 0 or +1 grid steps");
        }
        out[i] = detail::grid_round(c[i], mu) + offsets[i] * step;
        if (out[i] < 0.0) {
            std::ostringstream msg;
            msg << "qubitise_coeffs: offset " << offsets[i] << " drives coefficient " << i
                << " negative; state-preparation amplitudes must stay real";
            throw InvalidArgument(msg.str());
        }
        total += out[i];
    }
    if (total <= 0.0) {
        throw InvalidArgument("qubitise_coeffs: all rounded coefficients vanish");
    }
    for (auto &x : out) {
        x /= total;
    }
    return out;
}

/// Real-valued offsets; each must equal -2^-mu, 0 or +2^-mu.
inline std::vector<double> qubitise_coeffs(std::span<const double> c, int mu, std::span<const double> eps)
{
    if (mu < 1 || mu > 52) {
        throw InvalidArgument("qubitise_coeffs: bit precision must lie in [1, 52]");
    }
    std::vector<int> steps(eps.size());
    const double scale = std::ldexp(1.0, mu);
    for (std::size_t i = 0; i < eps.size(); ++i) {
        const double s = eps[i] * scale;
        const double r = std::round(s);
        if (std::abs(s - r) > 1e-9 || r < -1.0 || r > 1.0) {
            std::ostringstream msg;
            msg << "qubitise_coeffs: offset " << eps[i] << " is not one of {-2^-mu, 0, 2^-mu}";
            throw InvalidArgument(msg.str());
        }
        steps[i] = static_cast<int>(r);
    }
    return qubitise_coeffs_steps(c, mu, steps);
}

/// The error parameters of one qubitised observable: c' - c.
inline std::vector<double> qubitised_delta(std::span<const double> c, int mu, std::span<const int> offsets)
{
    auto out = qubitise_coeffs_steps(c, mu, offsets);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] -= c[i];
    }
    return out;
}

/// H' = sum_i c'_i P_i for a normalised H.
inline EffectiveHamiltonian qubitised_effective(const SpinHamiltonian &h, int mu, std::span<const int> offsets,
                                                int max_sites = default_max_sites)
{
    const auto c = h.coefficients();
    const auto c_prime = qubitise_coeffs_steps(c, mu, offsets);
    std::vector<double> delta(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        delta[i] = c_prime[i] - c[i];
    }
    return EffectiveHamiltonian{dense_matrix(with_coefficients(h, c_prime), max_sites),
                                QubitisedProvenance{{offsets.begin(), offsets.end()}, mu}, std::move(delta)};
}

inline EffectiveHamiltonian qubitised_effective(const SpinHamiltonian &h, int mu, std::span<const double> eps,
                                                int max_sites = default_max_sites)
{
    const double scale = std::ldexp(1.0, mu);
    std::vector<int> steps(eps.size());
    for (std::size_t i = 0; i < eps.size(); ++i) {
        steps[i] = static_cast<int>(std::round(eps[i] * scale));
    }
    // Validate the real offsets exactly as qubitise_coeffs does.
    (void)qubitise_coeffs(h.coefficients(), mu, eps);
    return qubitised_effective(h, mu, std::span<const int>(steps), max_sites);
}

namespace detail {

// Uniform index in [0, k) from the top 53 bits of one generator call.
template <class Urbg>
std::size_t draw_index(Urbg &rng, std::size_t k)
{
    const double u = (static_cast<double>(static_cast<std::uint64_t>(rng()) >> 11) + 0.5) * 0x1.0p-53;
    const auto idx = static_cast<std::size_t>(u * static_cast<double>(k));
    return idx < k ? idx : k - 1;
}

} // namespace detail

/// Draws one offset column uniformly and independently per coefficient among
/// the offsets {0, -1, +1} that keep the rounded coefficient nonnegative.
template <class Urbg>
std::vector<int> draw_offsets(std::span<const double> c, int mu, Urbg &rng)
{
    const double step = std::ldexp(1.0, -mu);
    std::vector<int> out(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        const double rounded = detail::grid_round(c[i], mu);
        int allowed[3];
        std::size_t count = 0;
        for (int e : {0, -1, 1}) {
            if (rounded + e * step >= 0.0) {
                allowed[count++] = e;
            }
        }
        out[i] = allowed[detail::draw_index(rng, count)];
    }
    return out;
}

/// Offsets and delta columns for m pairwise-distinct qubitised observables,
/// without building any matrix.
struct OffsetDraw
{
    std::vector<std::vector<int>> offsets;
    RMatrix deltas;
};

template <class Urbg>
OffsetDraw draw_offset_columns(std::span<const double> c, int mu, int m, Urbg &rng, int attempt_budget = -1)
{
    if (m < 1) {
        throw InvalidArgument("sample_offset_sets: m must be at least 1");
    }
    detail::require_unit_sum(c, "sample_offset_sets");
    const int budget = attempt_budget < 0 ? 100 * m : attempt_budget;
    OffsetDraw out;
    std::set<std::vector<int>> seen;
    int attempts = 0;
    while (static_cast<int>(out.offsets.size()) < m) {
        if (attempts++ >= budget) {
            std::ostringstream msg;
            msg << "sample_offset_sets: could not draw " << m << " distinct offset columns in " << budget
                << " attempts (" << out.offsets.size() << " found)";
            throw Exhausted(msg.str());
        }
        auto column = draw_offsets(c, mu, rng);
        if (seen.insert(column).second) {
            out.offsets.push_back(std::move(column));
        }
    }
    out.deltas.resize(static_cast<Eigen::Index>(c.size()), m);
    for (int k = 0; k < m; ++k) {
        const auto d = qubitised_delta(c, mu, out.offsets[static_cast<std::size_t>(k)]);
        for (std::size_t i = 0; i < d.size(); ++i) {
            out.deltas(static_cast<Eigen::Index>(i), k) = d[i];
        }
    }
    return out;
}

/// m distinct qubitised observables of a normalised H, offsets drawn i.i.d.
/// uniformly; duplicate columns are redrawn up to 100 m attempts.
template <class Urbg>
PerturbationSet sample_offset_sets(const SpinHamiltonian &h, int mu, int m, Urbg &rng, std::uint64_t seed = 0,
                                   int max_sites = default_max_sites)
{
    const auto c = h.coefficients();
    OffsetDraw draw = draw_offset_columns(c, mu, m, rng);
    PerturbationSet out;
    out.provenance = "qubitised";
    out.mu = mu;
    out.seed = seed;
    out.deltas = std::move(draw.deltas);
    out.effective.reserve(static_cast<std::size_t>(m));
    for (const auto &col : draw.offsets) {
        out.effective.push_back(qubitised_effective(h, mu, std::span<const int>(col), max_sites));
    }
    out.offsets = std::move(draw.offsets);
    return out;
}

/// Trotter perturbation set for the step list `steps` (one column per step).
inline PerturbationSet trotter_set(const SpinHamiltonian &h_a, const SpinHamiltonian &h_b,
                                   std::span<const double> steps, int max_sites = default_max_sites)
{
    PerturbationSet out;
    out.provenance = "trotter";
    out.deltas.resize(1, static_cast<Eigen::Index>(steps.size()));
    for (std::size_t k = 0; k < steps.size(); ++k) {
        out.deltas(0, static_cast<Eigen::Index>(k)) = steps[k];
        out.effective.push_back(trotter_effective(h_a, h_b, steps[k], false, max_sites));
    }
    return out;
}

/// Column-major list of delta vectors from a matrix.
inline std::vector<std::vector<double>> delta_columns(const RMatrix &deltas)
{
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(deltas.cols()));
    for (Eigen::Index k = 0; k < deltas.cols(); ++k) {
        cols[static_cast<std::size_t>(k)].assign(deltas.col(k).data(), deltas.col(k).data() + deltas.rows());
    }
    return cols;
}

inline RMatrix delta_matrix(const std::vector<std::vector<double>> &columns)
{
    if (columns.empty()) {
        throw InvalidArgument("delta_matrix: at least one delta column is required");
    }
    const auto n = static_cast<Eigen::Index>(columns.front().size());
    RMatrix out(n, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t k = 0; k < columns.size(); ++k) {
        if (static_cast<Eigen::Index>(columns[k].size()) != n) {
            throw InvalidArgument("delta_matrix: delta columns have different lengths");
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const double v = columns[k][static_cast<std::size_t>(i)];
            if (!std::isfinite(v)) {
                throw InvalidArgument("delta_matrix: non-finite delta entry");
            }
            out(i, static_cast<Eigen::Index>(k)) = v;
        }
    }
    return out;
}

/// JSON form: {provenance, mu, seed, deltas: [column, ...], offsets?}.
inline nlohmann::json perturbation_json(const PerturbationSet &set)
{
    nlohmann::json j{{"provenance", set.provenance},
                     {"mu", set.mu},
                     {"seed", set.seed},
                     {"deltas", delta_columns(set.deltas)}};
    if (!set.offsets.empty()) {
        j["offsets"] = set.offsets;
    }
    return j;
}

/// Reads the delta matrix (and metadata) back; effective matrices are not stored.
inline PerturbationSet perturbation_from_json(const nlohmann::json &j)
{
    PerturbationSet out;
    out.provenance = j.value("provenance", std::string("unknown"));
    out.mu = j.value("mu", 0);
    out.seed = j.value("seed", std::uint64_t{0});
    out.deltas = delta_matrix(j.at("deltas").get<std::vector<std::vector<double>>>());
    if (j.contains("offsets")) {
        out.offsets = j.at("offsets").get<std::vector<std::vector<int>>>();
    }
    return out;
}

} // namespace algomit

#endif // ALGOMIT_ERROR_MODELS_HPP
