#ifndef ALGOMIT_HAMILTONIAN_HPP
#define ALGOMIT_HAMILTONIAN_HPP

#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "algomit/error.hpp"
#include "algomit/linalg.hpp"

namespace algomit {

enum class Axis : std::uint8_t { X, Y, Z };

enum class Model : std::uint8_t { ising, xyz, custom };

inline char axis_name(Axis a)
{
    switch (a) {
    case Axis::X: return 'X';
    case Axis::Y: return 'Y';
    case Axis::Z: return 'Z';
    }
    return '?';
}

inline Axis parse_axis(const std::string &s)
{
    if (s == "X" || s == "x") return Axis::X;
    if (s == "Y" || s == "y") return Axis::Y;
    if (s == "Z" || s == "z") return Axis::Z;
    throw InvalidArgument("unknown Pauli axis '" + s + "'");
}

inline std::string model_name(Model m)
{
    switch (m) {
    case Model::ising: return "ising";
    case Model::xyz: return "xyz";
    case Model::custom: return "custom";
    }
    return "custom";
}

inline Model parse_model(const std::string &s)
{
    if (s == "ising") return Model::ising;
    if (s == "xyz") return Model::xyz;
    if (s == "custom") return Model::custom;
    throw InvalidArgument("unknown model '" + s + "' (expected ising or xyz)");
}

struct PauliOp
{
    int site = 0;
    Axis axis = Axis::Z;

    friend bool operator==(const PauliOp &, const PauliOp &) = default;
};

/// One weighted Pauli string. The site of the first operator is the term's
/// chain index i (bond (i, i+1) or single site i), which decides the
/// even/odd Trotter split.
struct PauliTerm
{
    double coefficient = 0.0;
    std::vector<PauliOp> operators;

    int index() const { return operators.empty() ? 0 : operators.front().site; }

    friend bool operator==(const PauliTerm &, const PauliTerm &) = default;
};

/// H = sum_i c_i P_i on a periodic chain of `n_sites` spins-1/2.
struct SpinHamiltonian
{
    Model model = Model::custom;
    int n_sites = 0;
    std::uint64_t seed = 0;
    std::vector<PauliTerm> terms;

    std::vector<double> coefficients() const
    {
        std::vector<double> c;
        c.reserve(terms.size());
        for (const auto &t : terms) {
            c.push_back(t.coefficient);
        }
        return c;
    }

    friend bool operator==(const SpinHamiltonian &, const SpinHamiltonian &) = default;
};

inline constexpr int default_max_sites = 12;

/// Validates and canonicalises a term list: sites are reduced modulo n and a
/// site may carry at most one operator per term.
inline SpinHamiltonian make_hamiltonian(int n_sites, std::vector<PauliTerm> terms,
                                        Model model = Model::custom, std::uint64_t seed = 0)
{
    if (n_sites < 1) {
        throw InvalidArgument("make_hamiltonian: n_sites must be positive");
    }
    for (auto &term : terms) {
        std::vector<bool> used(static_cast<std::size_t>(n_sites), false);
        for (auto &op : term.operators) {
            if (op.site < 0) {
                throw InvalidArgument("make_hamiltonian: negative site index");
            }
            op.site %= n_sites;
            if (used[static_cast<std::size_t>(op.site)]) {
                std::ostringstream msg;
                msg << "make_hamiltonian: site " << op.site << " appears twice in one term";
                throw InvalidArgument(msg.str());
            }
            used[static_cast<std::size_t>(op.site)] = true;
        }
    }
    return SpinHamiltonian{model, n_sites, seed, std::move(terms)};
}

namespace detail {

// Uniform draw in the open interval (0, 1) from the top 53 bits, so the
// coefficient list is identical on every standard library.
inline double uniform_open01(std::mt19937_64 &rng)
{
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline void require_chain_size(int n, const char *op)
{
    if (n < 2) {
        std::ostringstream msg;
        msg << op << ": chain needs at least 2 sites, got " << n;
        throw InvalidArgument(msg.str());
    }
}

inline void require_family_size(std::span<const double> c, int n, const char *op)
{
    if (c.size() != static_cast<std::size_t>(n)) {
        std::ostringstream msg;
        msg << op << ": expected " << n << " coefficients per family, got " << c.size();
        throw InvalidArgument(msg.str());
    }
}

inline PauliTerm bond(double c, int i, int n, Axis a)
{
    return PauliTerm{c, {{i, a}, {(i + 1) % n, a}}};
}

inline std::vector<double> draw(std::mt19937_64 &rng, int count)
{
    std::vector<double> out(static_cast<std::size_t>(count));
    for (auto &x : out) {
        x = uniform_open01(rng);
    }
    return out;
}

} // namespace detail

/// sum_i a_i Z_i + sum_i b_i X_i X_{i+1} with explicit coefficients.
inline SpinHamiltonian ising_from_coefficients(std::span<const double> a, std::span<const double> b,
                                               std::uint64_t seed = 0)
{
    const int n = static_cast<int>(a.size());
    detail::require_chain_size(n, "build_ising");
    detail::require_family_size(b, n, "build_ising");
    std::vector<PauliTerm> terms;
    terms.reserve(2 * a.size());
    for (int i = 0; i < n; ++i) {
        terms.push_back(PauliTerm{a[i], {{i, Axis::Z}}});
    }
    for (int i = 0; i < n; ++i) {
        terms.push_back(detail::bond(b[i], i, n, Axis::X));
    }
    return SpinHamiltonian{Model::ising, n, seed, std::move(terms)};
}

/// sum_i a_i Z_i + sum_i (b_i XX + c_i YY + d_i ZZ)_{i,i+1} with explicit coefficients.
inline SpinHamiltonian xyz_from_coefficients(std::span<const double> a, std::span<const double> b,
                                             std::span<const double> c, std::span<const double> d,
                                             std::uint64_t seed = 0)
{
    const int n = static_cast<int>(a.size());
    detail::require_chain_size(n, "build_xyz");
    detail::require_family_size(b, n, "build_xyz");
    detail::require_family_size(c, n, "build_xyz");
    detail::require_family_size(d, n, "build_xyz");
    std::vector<PauliTerm> terms;
    terms.reserve(4 * a.size());
    for (int i = 0; i < n; ++i) {
        terms.push_back(PauliTerm{a[i], {{i, Axis::Z}}});
    }
    for (int i = 0; i < n; ++i) {
        terms.push_back(detail::bond(b[i], i, n, Axis::X));
    }
    for (int i = 0; i < n; ++i) {
        terms.push_back(detail::bond(c[i], i, n, Axis::Y));
    }
    for (int i = 0; i < n; ++i) {
        terms.push_back(detail::bond(d[i], i, n, Axis::Z));
    }
    return SpinHamiltonian{Model::xyz, n, seed, std::move(terms)};
}

/// Transverse-field Ising ring with coefficients drawn uniformly in (0, 1):
/// all a_i first, then all b_i.
inline SpinHamiltonian build_ising(int n, std::uint64_t seed)
{
    detail::require_chain_size(n, "build_ising");
    std::mt19937_64 rng(seed);
    const auto a = detail::draw(rng, n);
    const auto b = detail::draw(rng, n);
    return ising_from_coefficients(a, b, seed);
}

/// XYZ ring with a Z field; draw order a, b, c, d.
inline SpinHamiltonian build_xyz(int n, std::uint64_t seed)
{
    detail::require_chain_size(n, "build_xyz");
    std::mt19937_64 rng(seed);
    const auto a = detail::draw(rng, n);
    const auto b = detail::draw(rng, n);
    const auto c = detail::draw(rng, n);
    const auto d = detail::draw(rng, n);
    return xyz_from_coefficients(a, b, c, d, seed);
}

inline SpinHamiltonian build_model(Model model, int n, std::uint64_t seed)
{
    switch (model) {
    case Model::ising: return build_ising(n, seed);
    case Model::xyz: return build_xyz(n, seed);
    case Model::custom: break;
    }
    throw InvalidArgument("build_model: custom models have no generator");
}

/// Splits H into (H_A, H_B): terms whose chain index is even go to H_A, odd to H_B.
inline std::pair<SpinHamiltonian, SpinHamiltonian> split_even_odd(const SpinHamiltonian &h)
{
    SpinHamiltonian even{h.model, h.n_sites, h.seed, {}};
    SpinHamiltonian odd{h.model, h.n_sites, h.seed, {}};
    for (const auto &term : h.terms) {
        (term.index() % 2 == 0 ? even : odd).terms.push_back(term);
    }
    return {std::move(even), std::move(odd)};
}

/// Coefficients rescaled so that sum_i |c_i| = 1.
inline SpinHamiltonian normalised(const SpinHamiltonian &h)
{
    double total = 0.0;
    for (const auto &t : h.terms) {
        total += std::abs(t.coefficient);
    }
    if (total == 0.0) {
        throw InvalidArgument("normalised: Hamiltonian has no nonzero coefficient");
    }
    SpinHamiltonian out = h;
    for (auto &t : out.terms) {
        t.coefficient /= total;
    }
    return out;
}

/// Same Pauli strings with a new coefficient list.
inline SpinHamiltonian with_coefficients(const SpinHamiltonian &h, std::span<const double> c)
{
    if (c.size() != h.terms.size()) {
        throw InvalidArgument("with_coefficients: coefficient count does not match term count");
    }
    SpinHamiltonian out = h;
    for (std::size_t i = 0; i < c.size(); ++i) {
        out.terms[i].coefficient = c[i];
    }
    return out;
}

/// Adds c * P to `m`. Site 0 is the most significant bit of the basis index.
inline void accumulate_pauli(CMatrix &m, int n_sites, const PauliTerm &term, double scale = 1.0)
{
    using Index = Eigen::Index;
    const Index dim = Index{1} << n_sites;
    Index flip = 0;
    Index z_mask = 0;
    int y_count = 0;
    for (const auto &op : term.operators) {
        const Index bit = Index{1} << (n_sites - 1 - op.site);
        switch (op.axis) {
        case Axis::X: flip |= bit; break;
        case Axis::Y:
            flip |= bit;
            z_mask |= bit;
            ++y_count;
            break;
        case Axis::Z: z_mask |= bit; break;
        }
    }
    // Y = i X Z acting on |x>: the Z part contributes (-1)^{x_j}, the i^{#Y} is global.
    static constexpr cplx i_powers[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    const cplx global = scale * term.coefficient * i_powers[y_count % 4];
    for (Index x = 0; x < dim; ++x) {
        const bool odd = (__builtin_popcountll(static_cast<unsigned long long>(x & z_mask)) & 1) != 0;
        m(x ^ flip, x) += odd ? -global : global;
    }
}

/// Dense 2^n x 2^n realisation of H. Throws ResourceError above `max_sites`.
inline CMatrix dense_matrix(const SpinHamiltonian &h, int max_sites = default_max_sites)
{
    if (h.n_sites > max_sites) {
        std::ostringstream msg;
        msg << "dense_matrix: " << h.n_sites << " sites exceeds the limit of " << max_sites;
        throw ResourceError(msg.str());
    }
    const Eigen::Index dim = Eigen::Index{1} << h.n_sites;
    CMatrix m = CMatrix::Zero(dim, dim);
    for (const auto &term : h.terms) {
        accumulate_pauli(m, h.n_sites, term);
    }
    return m;
}

inline void to_json(nlohmann::json &j, const PauliTerm &t)
{
    nlohmann::json ops = nlohmann::json::array();
    for (const auto &op : t.operators) {
        ops.push_back({op.site, std::string(1, axis_name(op.axis))});
    }
    j = nlohmann::json{{"coeff", t.coefficient}, {"ops", ops}};
}

inline void from_json(const nlohmann::json &j, PauliTerm &t)
{
    t.coefficient = j.at("coeff").get<double>();
    t.operators.clear();
    for (const auto &op : j.at("ops")) {
        t.operators.push_back(PauliOp{op.at(0).get<int>(), parse_axis(op.at(1).get<std::string>())});
    }
}

inline void to_json(nlohmann::json &j, const SpinHamiltonian &h)
{
    j = nlohmann::json{{"model", model_name(h.model)}, {"n", h.n_sites}, {"seed", h.seed}, {"terms", h.terms}};
}

inline void from_json(const nlohmann::json &j, SpinHamiltonian &h)
{
    h = make_hamiltonian(j.at("n").get<int>(), j.at("terms").get<std::vector<PauliTerm>>(),
                         parse_model(j.value("model", std::string("custom"))),
                         j.value("seed", std::uint64_t{0}));
}

} // namespace algomit

#endif // ALGOMIT_HAMILTONIAN_HPP
