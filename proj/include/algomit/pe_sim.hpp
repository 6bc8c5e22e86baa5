#ifndef ALGOMIT_PE_SIM_HPP
#define ALGOMIT_PE_SIM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "algomit/error.hpp"

namespace algomit {

inline constexpr int max_pe_ancillae = 24;

namespace pe {

inline void require_phase(double phi, const char *op)
{
    if (!(phi >= 0.0 && phi < 1.0)) {
        std::ostringstream msg;
        msg << op << ": phase " << phi << " is outside [0, 1)";
        throw InvalidArgument(msg.str());
    }
}

inline void require_ancillae(int q, const char *op)
{
    if (q < 1 || q > max_pe_ancillae) {
        std::ostringstream msg;
        msg << op << ": ancilla count " << q << " is outside [1, " << max_pe_ancillae << "]";
        throw InvalidArgument(msg.str());
    }
}

/// phi 2^q split into its integer part y0 and fractional part f.
struct Peak
{
    std::int64_t y0 = 0;
    double frac = 0.0;
};

inline Peak locate(double phi, int q)
{
    const double scaled = std::ldexp(phi, q);
    const double base = std::floor(scaled);
    return Peak{static_cast<std::int64_t>(base), scaled - base};
}

/// P(y = y0 - j). The numerator sin^2(pi (phi 2^q - y)) equals sin^2(pi f)
/// for every integer y, so only the denominator depends on j. Exactly
/// representable phases are handled without the 0/0.
inline double offset_probability(const Peak &peak, std::int64_t j, int q)
{
    const std::int64_t dim = std::int64_t{1} << q;
    std::int64_t jr = j % dim;
    if (jr > dim / 2) jr -= dim;
    if (jr <= -dim / 2 && dim > 1) jr += dim;
    if (peak.frac == 0.0) {
        return jr == 0 ? 1.0 : 0.0;
    }
    const double delta = (peak.frac + static_cast<double>(jr)) / static_cast<double>(dim);
    const double num = std::sin(std::numbers::pi * peak.frac);
    const double den = std::sin(std::numbers::pi * delta);
    const double ratio = num / (static_cast<double>(dim) * den);
    return ratio * ratio;
}

} // namespace pe

/// Phase-estimation output distribution over the 2^q outcomes y (index y
/// stands for the binary fraction y / 2^q):
/// P(y) = |1 - e^{2 pi i d 2^q}|^2 / (2^{2q} |1 - e^{2 pi i d}|^2), d = phi - y/2^q.
inline std::vector<double> pe_distribution(double phi, int q)
{
    pe::require_phase(phi, "pe_distribution");
    pe::require_ancillae(q, "pe_distribution");
    const std::int64_t dim = std::int64_t{1} << q;
    const auto peak = pe::locate(phi, q);
    std::vector<double> out(static_cast<std::size_t>(dim));
    for (std::int64_t y = 0; y < dim; ++y) {
        out[static_cast<std::size_t>(y)] = pe::offset_probability(peak, peak.y0 - y, q);
    }
    return out;
}

/// Draws an outcome index y in [0, 2^q) by inverse-CDF sampling with the
/// outcomes visited outward from the peak (y0, y0+1, y0-1, y0+2, ...), so the
/// expected cost is a handful of terms despite the 2^q support.
template <class Urbg>
std::int64_t pe_sample_outcome(double phi, int q, Urbg &rng)
{
    pe::require_phase(phi, "pe_sample_outcome");
    pe::require_ancillae(q, "pe_sample_outcome");
    const std::int64_t dim = std::int64_t{1} << q;
    const auto peak = pe::locate(phi, q);
    const auto wrap = [dim](std::int64_t y) { return ((y % dim) + dim) % dim; };
    if (peak.frac == 0.0) {
        (void)rng();
        return wrap(peak.y0);
    }
    const double u = static_cast<double>(static_cast<std::uint64_t>(rng()) >> 11) * 0x1.0p-53;
    double cumulative = 0.0;
    std::int64_t last = peak.y0;
    auto visit = [&](std::int64_t j) -> bool {
        cumulative += pe::offset_probability(peak, j, q);
        last = peak.y0 - j;
        return u < cumulative;
    };
    if (visit(0)) return wrap(last);
    const std::int64_t half = dim / 2;
    for (std::int64_t k = 1; k < half; ++k) {
        if (visit(-k)) return wrap(last);
        if (visit(k)) return wrap(last);
    }
    if (dim > 1) {
        (void)visit(half);
    }
    return wrap(last);
}

/// One PE run on e^{-i arccos H}: outcome y mapped to the energy cos(2 pi y).
template <class Urbg>
double pe_sample_energy(double phi, int q, Urbg &rng)
{
    const auto y = pe_sample_outcome(phi, q, rng);
    return std::cos(2.0 * std::numbers::pi * std::ldexp(static_cast<double>(y), -q));
}

/// phi = arccos(E) / (2 pi) for an eigenvalue E of a normalised Hamiltonian.
inline double energy_to_phase(double energy)
{
    constexpr double slack = 1e-12;
    if (!(std::abs(energy) <= 1.0 + slack)) {
        std::ostringstream msg;
        msg << "energy_to_phase: |E| = " << std::abs(energy) << " exceeds 1; the Hamiltonian is not normalised";
        throw InvalidArgument(msg.str());
    }
    const double e = std::clamp(energy, -1.0, 1.0);
    return std::acos(e) / (2.0 * std::numbers::pi);
}

/// PE on the normalised spectrum: energy -> phase -> sampled energy.
template <class Urbg>
double pe_sample_from_energy(double energy, int q, Urbg &rng)
{
    const double phi = energy_to_phase(energy);
    return pe_sample_energy(phi < 1.0 ? phi : 0.0, q, rng);
}

// ---------------------------------------------------------------------------
// Depolarising-noise surrogate
// ---------------------------------------------------------------------------

/// One row of the noise-response table. `e_bar` is the noisy mean output for
/// the target state; std::nullopt means unbiased (E_bar = E).
struct NoiseEntry
{
    double strength = 0.0;
    std::optional<double> e_bar;
    double delta_e = 0.0;
};

/// Noise strength -> (E_bar, Delta_E), loaded from CSV with header
/// `noise_strength,E_bar,Delta_E`. An E_bar cell reading `exact` (or empty)
/// stands for an unbiased mean.
class NoiseTable
{
  public:
    NoiseTable() = default;
    explicit NoiseTable(std::vector<NoiseEntry> rows) : rows_(std::move(rows))
    {
        for (const auto &r : rows_) {
            validate(r);
        }
    }

    static NoiseTable parse(std::istream &in, const std::string &origin = "<stream>")
    {
        std::string line;
        std::vector<NoiseEntry> rows;
        bool header_seen = false;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            const auto cells = split(line);
            if (!header_seen) {
                header_seen = true;
                if (cells.size() != 3 || cells[0] != "noise_strength" || cells[1] != "E_bar" ||
                    cells[2] != "Delta_E") {
                    throw IoError(origin + ": expected header 'noise_strength,E_bar,Delta_E'");
                }
                continue;
            }
            if (cells.size() != 3) {
                throw IoError(origin + ":" + std::to_string(line_no) + ": expected 3 columns");
            }
            try {
                NoiseEntry e;
                e.strength = std::stod(cells[0]);
                if (!(cells[1].empty() || cells[1] == "exact")) {
                    e.e_bar = std::stod(cells[1]);
                }
                e.delta_e = std::stod(cells[2]);
                validate(e);
                rows.push_back(e);
            } catch (const std::logic_error &) {
                throw IoError(origin + ":" + std::to_string(line_no) + ": malformed number");
            } catch (const InvalidArgument &ex) {
                throw IoError(origin + ":" + std::to_string(line_no) + ": " + ex.what());
            }
        }
        if (!header_seen) {
            throw IoError(origin + ": empty noise table");
        }
        return NoiseTable(std::move(rows));
    }

    static NoiseTable load(const std::string &path)
    {
        std::ifstream in(path);
        if (!in) {
            throw IoError("cannot open noise table '" + path + "'");
        }
        return parse(in, path);
    }

    const std::vector<NoiseEntry> &rows() const noexcept { return rows_; }

    /// Row for `strength` (relative match 1e-9); throws InvalidArgument if absent.
    const NoiseEntry &lookup(double strength) const
    {
        for (const auto &r : rows_) {
            if (std::abs(r.strength - strength) <= 1e-9 * std::max(1.0, std::abs(strength))) {
                return r;
            }
        }
        std::ostringstream msg;
        msg << "noise table has no entry for strength " << strength;
        throw InvalidArgument(msg.str());
    }

  private:
    static void validate(const NoiseEntry &e)
    {
        if (!(e.delta_e >= 0.0) || !std::isfinite(e.delta_e) || !std::isfinite(e.strength)) {
            throw InvalidArgument("noise entry needs a finite strength and Delta_E >= 0");
        }
    }

    static std::vector<std::string> split(const std::string &line)
    {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const auto b = cell.find_first_not_of(" \t");
            const auto e = cell.find_last_not_of(" \t");
            cells.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
        }
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        return cells;
    }

    std::vector<NoiseEntry> rows_;
};

struct ExactSampling
{};

/// Gaussian surrogate of noisy PE: outputs ~ Normal(E_k + bias, delta_e),
/// where bias = E_bar - E of the target.
struct GaussianNoise
{
    double bias = 0.0;
    double delta_e = 0.0;
};

struct PEConfig
{
    int q = 16;
    std::variant<ExactSampling, GaussianNoise> mode = ExactSampling{};
};

/// Resolves a table row against the exact target energy.
inline GaussianNoise gaussian_from_entry(const NoiseEntry &entry, double target_energy)
{
    return GaussianNoise{entry.e_bar ? *entry.e_bar - target_energy : 0.0, entry.delta_e};
}

/// One noisy eigenvalue reading of an observable with exact energy `e_true`.
template <class Urbg>
double noisy_energy_sample(double e_true, const PEConfig &config, Urbg &rng)
{
    const auto *noise = std::get_if<GaussianNoise>(&config.mode);
    if (noise == nullptr) {
        throw InvalidArgument("noisy_energy_sample: PE config is not in gaussian_noise mode");
    }
    if (!(noise->delta_e >= 0.0)) {
        throw InvalidArgument("noisy_energy_sample: Delta_E must be nonnegative");
    }
    const double mean = e_true + noise->bias;
    if (noise->delta_e == 0.0) {
        return mean;
    }
    std::normal_distribution<double> dist(mean, noise->delta_e);
    return dist(rng);
}

} // namespace algomit

#endif // ALGOMIT_PE_SIM_HPP
