#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mfgfw/grid.hpp"
#include "mfgfw/problem.hpp"

namespace mfgfw {

// Zero-mass threshold for perspective costs and control reconstruction.
inline constexpr double kMassEpsilon = 1e-14;

/// Density curve m on T+1 times and momentum w = m v on T times.
struct FlowPair {
    ScalarField m;
    VectorField w;
};

/**
 * Perspective of the running cost: l(w/m) m for m > eps, 0 when both m and
 * ||w|| are below eps, +infinity otherwise. Negatives down to -eps are
 * treated as zero mass.
 */
double perspective_cost(const RunningCost& running, int t, std::size_t x, double m_val,
                        std::span<const double> w_val);

// J~(m,w) = dt sum l~ + dt sum_{t<T} F(t, m(t)) + <g, m(T)>.
double cost_J_tilde(const PotentialProblem& problem, const FlowPair& pair);

// J~_{m'}(m,w): F replaced by the linear term dt sum f(t,x,m'(t)) m(t,x).
double cost_J_linearized(const PotentialProblem& problem, const ScalarField& m_prime, const FlowPair& pair);

// J(m,v) = dt sum l(v) m + dt sum F + <g, m(T)>, for a curve generated by v.
double cost_J(const PotentialProblem& problem, const ScalarField& m, const VectorField& v);

FlowPair chi_transform(const ScalarField& m, const VectorField& v);
VectorField chi_inverse(const FlowPair& pair);

// Convex combination (1 - lambda) a + lambda b.
FlowPair combine(const FlowPair& a, const FlowPair& b, double lambda);

struct GapDiagnostics {
    double gamma_bar = 0.0;
    double delta_bar = 0.0;
};

// Squared ||m1 - m2||_{inf,2}.
double delta_bar(const ScalarField& m1, const ScalarField& m2);

/**
 * gamma_bar = J~_{m}(current) - J~_{m}(BR) evaluated by direct differencing of
 * the two linearized costs, where m is the density of `current`.
 */
GapDiagnostics gap_diagnostics(const PotentialProblem& problem, const FlowPair& current, const FlowPair& response);

/**
 * The same gap written as a sum of pointwise Fenchel gaps
 *   dt sum_{t,x} [ l~(m,w) + <slope, w> + m H ] >= 0,
 * using the adjoint data carried by `response`. Valid for any pair whose
 * density solves the scheme's Fokker-Planck equation with momentum w.
 * Summing nonnegative terms avoids the cancellation of the direct form.
 */
double fenchel_gap(const PotentialProblem& problem, const FlowPair& current, const BestResponse& response);

// Gauss-Legendre nodes and weights on [0, 1].
struct Quadrature {
    std::vector<double> nodes;
    std::vector<double> weights;
};
Quadrature gauss_legendre(int n);

/**
 * |F(t,m1) - F(t,m2) - int_0^1 sum_x f(t,x,m2 + s(m1-m2)) (m1-m2)(x) ds|,
 * with the integral evaluated by an n-point Gauss-Legendre rule.
 */
double potential_identity_defect(const Coupling& coupling, int t, std::span<const double> m1,
                                 std::span<const double> m2, int nodes = 32);

// sum_x (f(t,x,m1) - f(t,x,m2)) (m1 - m2)(x); nonnegative for monotone couplings.
double monotonicity_pairing(const Coupling& coupling, int t, std::span<const double> m1,
                            std::span<const double> m2);

// max_t |sum_x m(t,x) - 1|.
double mass_error(const ScalarField& m);
double min_value(const ScalarField& m);

}  // namespace mfgfw
