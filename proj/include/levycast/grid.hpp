#pragma once

#include <cstdio>
#include <vector>

#include "levycast/stable.hpp"

namespace levycast {

// Symmetric frequency grid for CF evaluation. Odd M places a point exactly
// at tau = 0, which the include_mask excludes from every loss/metric sum
// (the CF is identically 1 there and carries no information).
struct FrequencyGrid {
    std::vector<double> points;
    double tau_max = numeric::tau_max;
    std::vector<bool> include_mask;  // true where |tau| > eps_tau

    std::size_t size() const { return points.size(); }
    std::size_t included_count() const {
        std::size_t n = 0;
        for (bool b : include_mask) n += b;
        return n;
    }
};

// points[m] = -tau_max + 2 tau_max m / (M-1), m = 0..M-1. Even M is allowed
// but warned against: it omits tau = 0 and breaks the exact +/- symmetry the
// default grid guarantees.
inline FrequencyGrid make_grid(int M = 129, double tau_max = numeric::tau_max) {
    if (M < 2) throw std::invalid_argument("frequency grid needs at least 2 points");
    if (M % 2 == 0) {
        std::fprintf(stderr,
                     "warning: frequency grid size %d is even; tau = 0 is not on the grid "
                     "and the grid is not symmetric about it. An odd size is recommended.\n",
                     M);
    }
    FrequencyGrid g;
    g.tau_max = tau_max;
    g.points.resize(M);
    g.include_mask.resize(M);
    for (int m = 0; m < M; ++m) {
        g.points[m] = -tau_max + 2.0 * tau_max * static_cast<double>(m) / (M - 1);
        g.include_mask[m] = std::fabs(g.points[m]) > numeric::eps_tau;
    }
    return g;
}

}  // namespace levycast
