#ifndef ALGOMIT_ALGOMIT_HPP
#define ALGOMIT_ALGOMIT_HPP

#include "algomit/error.hpp"
#include "algomit/linalg.hpp"
#include "algomit/hamiltonian.hpp"
#include "algomit/error_models.hpp"
#include "algomit/extrapolate.hpp"
#include "algomit/pe_sim.hpp"
#include "algomit/experiments.hpp"

#endif // ALGOMIT_ALGOMIT_HPP
