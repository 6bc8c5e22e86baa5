#ifndef ALGOMIT_EXTRAPOLATE_HPP
#define ALGOMIT_EXTRAPOLATE_HPP

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <iomanip>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "algomit/error.hpp"
#include "algomit/linalg.hpp"

namespace algomit {

// ---------------------------------------------------------------------------
// Monomials
// ---------------------------------------------------------------------------

/// Number of exponent tuples (i_1..i_N) with 0 <= |i| <= p,
/// i.e. sum_{q=0}^{p} C(N+q-1, N-1). Throws on 64-bit overflow.
inline std::uint64_t count_monomials(int n_params, int p)
{
    if (n_params < 1 || p < 0) {
        throw InvalidArgument("count_monomials: need N >= 1 and p >= 0");
    }
    // C(N+q-1, q) built incrementally: C(N+q-1, q) = C(N+q-2, q-1) * (N+q-1) / q.
    std::uint64_t total = 0;
    unsigned __int128 term = 1;
    for (int q = 0; q <= p; ++q) {
        if (q > 0) {
            term = term * static_cast<unsigned>(n_params + q - 1) / static_cast<unsigned>(q);
        }
        if (term > std::numeric_limits<std::uint64_t>::max() - total) {
            throw InvalidArgument("count_monomials: count overflows 64 bits");
        }
        total += static_cast<std::uint64_t>(term);
    }
    return total;
}

/// Exponent tuples of total degree <= p in graded order: degree 0 first, and
/// within a degree lexicographically descending, e.g. for N = 2, p = 2:
/// (0,0) (1,0) (0,1) (2,0) (1,1) (0,2).
class MonomialBasis
{
  public:
    MonomialBasis(int n_params, int p) : n_params_(n_params), order_(p)
    {
        const auto s = count_monomials(n_params, p);
        if (s > 5'000'000) {
            throw ResourceError("MonomialBasis: too many monomials to enumerate");
        }
        tuples_.reserve(static_cast<std::size_t>(s));
        std::vector<int> current(static_cast<std::size_t>(n_params), 0);
        for (int q = 0; q <= p; ++q) {
            fill(current, 0, q);
        }
    }

    int n_params() const noexcept { return n_params_; }
    int order() const noexcept { return order_; }
    std::size_t size() const noexcept { return tuples_.size(); }
    const std::vector<std::vector<int>> &tuples() const noexcept { return tuples_; }
    const std::vector<int> &operator[](std::size_t r) const { return tuples_[r]; }

    static int degree(const std::vector<int> &t)
    {
        int d = 0;
        for (int e : t) {
            d += e;
        }
        return d;
    }

  private:
    void fill(std::vector<int> &current, int pos, int remaining)
    {
        if (pos == n_params_ - 1) {
            current[static_cast<std::size_t>(pos)] = remaining;
            tuples_.push_back(current);
            return;
        }
        for (int e = remaining; e >= 0; --e) {
            current[static_cast<std::size_t>(pos)] = e;
            fill(current, pos + 1, remaining - e);
        }
        current[static_cast<std::size_t>(pos)] = 0;
    }

    int n_params_;
    int order_;
    std::vector<std::vector<int>> tuples_;
};

/// X lambda = b with X(r, k) = prod_i delta_{i,k}^{t_r(i)} and b = e_0.
struct DesignSystem
{
    MonomialBasis basis;
    RMatrix matrix;
    RVector target;
};

inline DesignSystem design_matrix(const RMatrix &deltas, int p)
{
    if (p < 0) {
        throw InvalidArgument("design_matrix: order p must be nonnegative");
    }
    if (deltas.rows() < 1 || deltas.cols() < 1) {
        throw InvalidArgument("design_matrix: empty delta matrix");
    }
    MonomialBasis basis(static_cast<int>(deltas.rows()), p);
    const auto s = static_cast<Eigen::Index>(basis.size());
    const auto n = deltas.rows();
    const auto m = deltas.cols();

    // powers[(i * (p + 1) + e)] = delta_i^e for the current column
    std::vector<double> powers(static_cast<std::size_t>(n * (p + 1)));
    RMatrix x(s, m);
    for (Eigen::Index k = 0; k < m; ++k) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double v = 1.0;
            for (int e = 0; e <= p; ++e) {
                powers[static_cast<std::size_t>(i * (p + 1) + e)] = v;
                v *= deltas(i, k);
            }
        }
        for (Eigen::Index r = 0; r < s; ++r) {
            const auto &t = basis[static_cast<std::size_t>(r)];
            double v = 1.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                const int e = t[static_cast<std::size_t>(i)];
                if (e != 0) {
                    v *= powers[static_cast<std::size_t>(i * (p + 1) + e)];
                }
            }
            x(r, k) = v;
        }
    }
    RVector b = RVector::Zero(s);
    b(0) = 1.0;
    return DesignSystem{std::move(basis), std::move(x), std::move(b)};
}

// ---------------------------------------------------------------------------
// Weights
// ---------------------------------------------------------------------------

enum class Regime : std::uint8_t { min_l2, nonnegative, exact_square };

inline std::string regime_name(Regime r)
{
    switch (r) {
    case Regime::min_l2: return "min_l2";
    case Regime::nonnegative: return "nonnegative";
    case Regime::exact_square: return "exact_square";
    }
    return "min_l2";
}

/// Mitigation weights lambda with cached norms. `residual` is ||X lambda - b||_inf
/// on the unscaled system.
struct MitigationWeights
{
    RVector lambda;
    Regime regime = Regime::min_l2;
    double residual = 0.0;
    double l1_norm = 0.0;
    double l2_norm = 0.0;
    Eigen::Index rank = 0;

    Eigen::Index size() const { return lambda.size(); }
    double sum() const { return lambda.sum(); }
};

inline constexpr double consistency_tolerance = 1e-8;

namespace detail {

// Row scaling so every row has unit max-abs entry. The solution set of a
// consistent system, and therefore its minimum-norm member, is unchanged.
inline RVector row_scales(const RMatrix &x)
{
    RVector d(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        const double mx = x.row(r).cwiseAbs().maxCoeff();
        d(r) = mx > 0.0 ? 1.0 / mx : 1.0;
    }
    return d;
}

inline MitigationWeights finish(RVector lambda, Regime regime, const RMatrix &x, const RVector &b,
                                Eigen::Index rank)
{
    MitigationWeights w;
    w.residual = (x * lambda - b).cwiseAbs().maxCoeff();
    w.l1_norm = lambda.lpNorm<1>();
    w.l2_norm = lambda.norm();
    w.lambda = std::move(lambda);
    w.regime = regime;
    w.rank = rank;
    return w;
}

inline void require_shapes(const RMatrix &x, const RVector &b, const char *op)
{
    if (x.rows() != b.size() || x.cols() < 1) {
        std::ostringstream msg;
        msg << op << ": design matrix is " << x.rows() << "x" << x.cols() << " but target has " << b.size()
            << " entries";
        throw InvalidArgument(msg.str());
    }
    if (!x.allFinite() || !b.allFinite()) {
        throw InvalidArgument(std::string(op) + ": non-finite entries in the weight system");
    }
}

} // namespace detail

/// Minimum-l2-norm weights lambda = X^+ b after rank truncation.
///
/// Rows are equilibrated before the SVD so that high-degree monomial rows
/// (of size ||delta||^p) are not mistaken for numerical noise. Throws
/// Infeasible when b is not reachable from the retained singular subspace.
inline MitigationWeights solve_lambda_min_l2(const RMatrix &x, const RVector &b,
                                             double rank_tol = linalg::default_rank_tol)
{
    detail::require_shapes(x, b, "solve_lambda_min_l2");
    const RVector d = detail::row_scales(x);
    const RMatrix xs = d.asDiagonal() * x;
    const RVector bs = d.asDiagonal() * b;
    const auto pinv = linalg::pinv_min_norm(xs, rank_tol);
    RVector lambda = pinv.matrix * bs;
    const double scaled_residual = (xs * lambda - bs).cwiseAbs().maxCoeff();
    if (!(scaled_residual <= consistency_tolerance)) {
        std::ostringstream msg;
        msg << "solve_lambda_min_l2: system is inconsistent (rank " << pinv.rank << ", " << x.rows()
            << " equations, m = " << x.cols() << ", scaled residual " << scaled_residual
            << "); more or less degenerate delta columns are needed";
        throw Infeasible(msg.str());
    }
    return detail::finish(std::move(lambda), Regime::min_l2, x, b, pinv.rank);
}

inline MitigationWeights solve_lambda_min_l2(const DesignSystem &sys, double rank_tol = linalg::default_rank_tol)
{
    return solve_lambda_min_l2(sys.matrix, sys.target, rank_tol);
}

/// Square, full-rank systems solved directly by LU (the m = s case).
inline MitigationWeights solve_lambda_exact(const RMatrix &x, const RVector &b)
{
    detail::require_shapes(x, b, "solve_lambda_exact");
    if (x.rows() != x.cols()) {
        throw InvalidArgument("solve_lambda_exact: design matrix must be square");
    }
    const RVector d = detail::row_scales(x);
    Eigen::FullPivLU<RMatrix> lu(d.asDiagonal() * x);
    lu.setThreshold(linalg::default_rank_tol);
    if (!lu.isInvertible()) {
        throw Infeasible("solve_lambda_exact: design matrix is singular");
    }
    RVector lambda = lu.solve(d.asDiagonal() * b);
    return detail::finish(std::move(lambda), Regime::exact_square, x, b, x.cols());
}

/// Nonnegative weights: min ||X lambda - b||_2 s.t. lambda >= 0 by the
/// Lawson-Hanson active-set iteration, accepted when the scaled residual is
/// below 1e-8.
///
/// With p = 1 a solution exists exactly when 0 lies in the convex hull of the
/// delta columns, and then ||lambda||_1 = sum(lambda) = 1. Otherwise throws
/// HullInfeasible carrying a direction u with x_k . u <= 0 for every column
/// and u_0 > 0, i.e. (for p = 1) every delta_k lies in {delta . u' < -u_0}.
inline MitigationWeights solve_lambda_nonnegative(const RMatrix &x, const RVector &b)
{
    detail::require_shapes(x, b, "solve_lambda_nonnegative");
    const RVector d = detail::row_scales(x);
    const RMatrix a = d.asDiagonal() * x;
    const RVector bs = d.asDiagonal() * b;
    const Eigen::Index m = a.cols();
    constexpr double grad_tol = 1e-13;

    std::vector<bool> passive(static_cast<std::size_t>(m), false);
    RVector lambda = RVector::Zero(m);

    auto solve_passive = [&](RVector &s) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (passive[static_cast<std::size_t>(j)]) {
                idx.push_back(j);
            }
        }
        RMatrix ap(a.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t c = 0; c < idx.size(); ++c) {
            ap.col(static_cast<Eigen::Index>(c)) = a.col(idx[c]);
        }
        Eigen::CompleteOrthogonalDecomposition<RMatrix> cod(ap);
        cod.setThreshold(linalg::default_rank_tol);
        const RVector sp = cod.solve(bs);
        s = RVector::Zero(m);
        for (std::size_t c = 0; c < idx.size(); ++c) {
            s(idx[c]) = sp(static_cast<Eigen::Index>(c));
        }
    };

    const int max_outer = static_cast<int>(3 * m + 10);
    for (int outer = 0; outer < max_outer; ++outer) {
        const RVector w = a.transpose() * (bs - a * lambda);
        Eigen::Index best = -1;
        double best_w = grad_tol;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
                best_w = w(j);
                best = j;
            }
        }
        if (best < 0) {
            break;
        }
        passive[static_cast<std::size_t>(best)] = true;

        RVector s;
        for (int inner = 0; inner <= m; ++inner) {
            solve_passive(s);
            double alpha = std::numeric_limits<double>::infinity();
            for (Eigen::Index j = 0; j < m; ++j) {
                if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) {
                    const double denom = lambda(j) - s(j);
                    const double step = denom > 0.0 ? lambda(j) / denom : 0.0;
                    alpha = std::min(alpha, step);
                }
            }
            if (!std::isfinite(alpha)) {
                break;
            }
            lambda += alpha * (s - lambda);
            for (Eigen::Index j = 0; j < m; ++j) {
                if (passive[static_cast<std::size_t>(j)] && lambda(j) <= 1e-15) {
                    passive[static_cast<std::size_t>(j)] = false;
                    lambda(j) = 0.0;
                }
            }
        }
        lambda = s.cwiseMax(0.0);
    }

    const RVector r = bs - a * lambda;
    const double scaled_residual = r.cwiseAbs().maxCoeff();
    if (!(scaled_residual <= consistency_tolerance)) {
        RVector u = d.asDiagonal() * r;
        if (u.norm() > 0.0) {
            u /= u.norm();
        }
        std::ostringstream msg;
        msg << std::setprecision(6) << "solve_lambda_nonnegative: the origin is outside the convex hull of the "
            << "delta columns (residual " << scaled_residual << "); separating direction (";
        for (Eigen::Index i = 1; i < u.size(); ++i) {
            msg << (i > 1 ? ", " : "") << u(i);
        }
        msg << ") has delta_k . u < 0 for every column";
        throw HullInfeasible(msg.str(), std::vector<double>(u.data(), u.data() + u.size()));
    }
    Eigen::Index rank = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
        rank += lambda(j) > 0.0 ? 1 : 0;
    }
    return detail::finish(std::move(lambda), Regime::nonnegative, x, b, rank);
}

inline MitigationWeights solve_lambda_nonnegative(const DesignSystem &sys)
{
    return solve_lambda_nonnegative(sys.matrix, sys.target);
}

/// True when the order-p system over `deltas` admits a solution.
inline bool order_feasible(const RMatrix &deltas, int p, double rank_tol = linalg::default_rank_tol)
{
    try {
        (void)solve_lambda_min_l2(design_matrix(deltas, p), rank_tol);
        return true;
    } catch (const Infeasible &) {
        return false;
    }
}

/// Largest p <= p_max for which the system over `deltas` is solvable, or -1.
inline int highest_feasible_order(const RMatrix &deltas, int p_max, double rank_tol = linalg::default_rank_tol)
{
    for (int p = p_max; p >= 0; --p) {
        if (order_feasible(deltas, p, rank_tol)) {
            return p;
        }
    }
    return -1;
}

/// m_{p,min}: columns are requested from `next_column` one at a time until
/// the order-p system becomes solvable. The generator returns std::nullopt
/// when it has nothing more to offer, which raises Exhausted.
inline int min_m_for_order(const std::function<std::optional<std::vector<double>>()> &next_column, int p,
                           int max_m = 100000, double rank_tol = linalg::default_rank_tol)
{
    std::vector<std::vector<double>> cols;
    while (static_cast<int>(cols.size()) < max_m) {
        auto col = next_column();
        if (!col) {
            break;
        }
        cols.push_back(std::move(*col));
        RMatrix deltas(static_cast<Eigen::Index>(cols.front().size()), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (cols[k].size() != cols.front().size()) {
                throw InvalidArgument("min_m_for_order: delta columns have different lengths");
            }
            deltas.col(static_cast<Eigen::Index>(k)) = Eigen::Map<const RVector>(cols[k].data(),
                                                                                 static_cast<Eigen::Index>(cols[k].size()));
        }
        if (order_feasible(deltas, p, rank_tol)) {
            return static_cast<int>(cols.size());
        }
    }
    std::ostringstream msg;
    msg << "min_m_for_order: generator exhausted after " << cols.size() << " columns without reaching order " << p;
    throw Exhausted(msg.str());
}

/// Smallest prefix of the columns of `deltas` that solves the order-p system.
inline int min_m_for_order(const RMatrix &deltas, int p, double rank_tol = linalg::default_rank_tol)
{
    Eigen::Index next = 0;
    return min_m_for_order(
        [&]() -> std::optional<std::vector<double>> {
            if (next >= deltas.cols()) {
                return std::nullopt;
            }
            const auto col = deltas.col(next++);
            return std::vector<double>(col.data(), col.data() + col.size());
        },
        p, static_cast<int>(deltas.cols()), rank_tol);
}

/// Recommended working number of observables: m_{p,min} + 10.
inline constexpr int extra_columns = 10;

inline int recommended_m(int m_min)
{
    return m_min + extra_columns;
}

/// m_{p,min} in closed form: p + 1 for a single parameter; for N > 1
/// parameters constrained by sum_i delta_i = 0 (normalised qubitisation) the
/// rank is the number of monomials in N - 1 free variables.
inline std::uint64_t analytic_min_m(int n_params, int p, bool sum_zero = true)
{
    if (n_params == 1) {
        return static_cast<std::uint64_t>(p) + 1;
    }
    return sum_zero ? count_monomials(n_params - 1, p) : count_monomials(n_params, p);
}

/// Number of phase-estimation calls, ceil((m_{p,min} + 10) / beta).
inline std::uint64_t pe_call_budget(int n_params, int p, double beta, bool sum_zero = true)
{
    if (!(beta > 0.0 && beta <= 1.0)) {
        throw InvalidArgument("pe_call_budget: ground-state overlap beta must lie in (0, 1]");
    }
    const auto m = analytic_min_m(n_params, p, sum_zero) + extra_columns;
    return static_cast<std::uint64_t>(std::ceil(static_cast<double>(m) / beta - 1e-12));
}

// ---------------------------------------------------------------------------
// Estimates
// ---------------------------------------------------------------------------

/// sum_k lambda_k a'_k, with the variance amplification sum_k lambda_k^2.
struct MitigatedEstimate
{
    double value = 0.0;
    MitigationWeights weights;
    std::vector<double> energies;
    double predicted_variance_factor = 0.0;
};

inline MitigatedEstimate combine(const MitigationWeights &weights, std::span<const double> energies)
{
    if (static_cast<Eigen::Index>(energies.size()) != weights.lambda.size()) {
        std::ostringstream msg;
        msg << "combine: " << weights.lambda.size() << " weights but " << energies.size() << " energies";
        throw InvalidArgument(msg.str());
    }
    MitigatedEstimate out;
    double value = 0.0;
    for (std::size_t k = 0; k < energies.size(); ++k) {
        value += weights.lambda(static_cast<Eigen::Index>(k)) * energies[k];
    }
    out.value = value;
    out.weights = weights;
    out.energies.assign(energies.begin(), energies.end());
    out.predicted_variance_factor = weights.lambda.squaredNorm();
    return out;
}

/// RMS saturation level sqrt(||lambda||_2^2 dE^2 + (E_bar - E)^2) under
/// residual random noise of standard deviation dE and mean E_bar.
inline double noise_floor(double l2_norm, double delta_e, double e_bar, double e_true)
{
    if (!(delta_e >= 0.0)) {
        throw InvalidArgument("noise_floor: standard deviation must be nonnegative");
    }
    const double bias = e_bar - e_true;
    return std::sqrt(l2_norm * l2_norm * delta_e * delta_e + bias * bias);
}

inline double noise_floor(const MitigationWeights &w, double delta_e, double e_bar, double e_true)
{
    return noise_floor(w.l2_norm, delta_e, e_bar, e_true);
}

/// FNV-1a over the raw bytes of the delta matrix (column-major) and its shape.
inline std::string delta_hash(const RMatrix &deltas)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void *data, std::size_t n) {
        const auto *bytes = static_cast<const unsigned char *>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ULL;
        }
    };
    const std::int64_t shape[2] = {deltas.rows(), deltas.cols()};
    mix(shape, sizeof shape);
    for (Eigen::Index j = 0; j < deltas.cols(); ++j) {
        for (Eigen::Index i = 0; i < deltas.rows(); ++i) {
            double v = deltas(i, j);
            if (v == 0.0) {
                v = 0.0; // fold -0.0
            }
            mix(&v, sizeof v);
        }
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

inline nlohmann::json weights_json(const MitigationWeights &w, const RMatrix *deltas = nullptr, int p = -1)
{
    nlohmann::json j{{"regime", regime_name(w.regime)},
                     {"lambda", std::vector<double>(w.lambda.data(), w.lambda.data() + w.lambda.size())},
                     {"sum", w.sum()},
                     {"residual", w.residual},
                     {"l1_norm", w.l1_norm},
                     {"l2_norm", w.l2_norm},
                     {"rank", w.rank}};
    if (p >= 0) {
        j["p"] = p;
    }
    if (deltas != nullptr) {
        j["delta_hash"] = delta_hash(*deltas);
    }
    return j;
}

inline nlohmann::json estimate_json(const MitigatedEstimate &e, const RMatrix *deltas = nullptr, int p = -1)
{
    return nlohmann::json{{"value", e.value},
                          {"energies", e.energies},
                          {"predicted_variance_factor", e.predicted_variance_factor},
                          {"weights", weights_json(e.weights, deltas, p)}};
}

} // namespace algomit

#endif // ALGOMIT_EXTRAPOLATE_HPP
