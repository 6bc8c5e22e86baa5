// Second-order mitigation of a Trotterised ground-state energy.
//
//   richardson_trotter [n_sites] [n_trotter]

#include <cstdio>
#include <cstdlib>
#include <vector>

#include "algomit/algomit.hpp"

int main(int argc, char **argv)
{
    const int n = argc > 1 ? std::atoi(argv[1]) : 4;
    const int steps = argc > 2 ? std::atoi(argv[2]) : 20;

    const auto h = algomit::build_xyz(n, 7);
    const auto [h_a, h_b] = algomit::split_even_odd(h);
    const double exact = algomit::linalg::ground_energy(algomit::dense_matrix(h));

    const auto dts = algomit::trotter_delta_set(2, 1.0 / steps);
    const auto set = algomit::trotter_set(h_a, h_b, dts);
    std::vector<double> energies;
    for (const auto &eff : set.effective) {
        energies.push_back(algomit::linalg::ground_energy(eff.matrix));
    }

    const auto weights = algomit::solve_lambda_min_l2(algomit::design_matrix(set.deltas, 2));
    const auto est = algomit::combine(weights, energies);

    std::printf("exact      % .12f\n", exact);
    for (std::size_t k = 0; k < dts.size(); ++k) {
        std::printf("dt=% .4f  % .12f  lambda=% .6f\n", dts[k], energies[k], weights.lambda(static_cast<Eigen::Index>(k)));
    }
    std::printf("mitigated  % .12f  (error %.3e, raw error %.3e, |lambda|_2 = %.4f)\n", est.value,
                std::abs(est.value - exact), std::abs(energies[1] - exact), weights.l2_norm);
    return 0;
}
