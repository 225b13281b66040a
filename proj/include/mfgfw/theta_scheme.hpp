#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "mfgfw/grid.hpp"
#include "mfgfw/kernel_mfg.hpp"
#include "mfgfw/problem.hpp"

namespace mfgfw {

/// Splitting parameter, viscosity and control truncation on a lattice.
struct ThetaConfig {
    double theta = 0.8;
    double sigma = 0.02;
    double truncation = 10.0;  // M
    Grid grid{1, 100, 80};
};

// Throws ConfigError unless 1/2 < theta < 1, sigma > 0 and M > 0.
void validate(const ThetaConfig& config);

struct CflReport {
    double max_dt = 0.0;           // h^2 / (2 d (1-theta) sigma)
    bool time_step_ok = false;
    double time_step_margin = 0.0;  // max_dt - dt
    double max_h = 0.0;            // 2 (1-theta) sigma / M
    bool mesh_ok = false;
    double mesh_margin = 0.0;       // max_h - h
    double velocity_threshold = 0.0;  // 2 (1-theta) sigma / h, the largest |v| keeping FP monotone
};

CflReport cfl_check(const ThetaConfig& config);

// Enforces the time-step condition; throws ConfigError quoting max_dt.
void require_time_step_cfl(const ThetaConfig& config);

/**
 * Separable truncated running cost l(t,x,v) = sum_i l_i(t,x,v_i) on the box
 * |v_i| <= M, and its conjugate H(t,x,p) = sum_i H_i(t,x,p_i) with
 * H_i(p) = sup_{|v|<=M} -p v - l_i(v).
 */
class SeparableHamiltonian : public RunningCost {
public:
    SeparableHamiltonian(int dim, double truncation) : dim_(dim), truncation_(truncation) {}

    int dim() const { return dim_; }
    double truncation() const { return truncation_; }

    // Untruncated per-axis cost l_i.
    virtual double axis_cost(int t, std::size_t x, int axis, double v) const = 0;
    // Maximizer v*(p) of -p v - l_i(v) over [-M, M]; H_p = -v*.
    virtual double axis_control(int t, std::size_t x, int axis, double p) const = 0;

    double axis_value(int t, std::size_t x, int axis, double p) const;
    double hamiltonian(int t, std::size_t x, std::span<const double> p) const;
    void optimal_control(int t, std::size_t x, std::span<const double> p, std::span<double> out) const;

    double value(int t, std::size_t x, std::span<const double> control) const override;

private:
    int dim_;
    double truncation_;
};

/// l_i = alpha/2 v_i^2: v* = clamp(-p/alpha, -M, M).
class QuadraticHamiltonian final : public SeparableHamiltonian {
public:
    QuadraticHamiltonian(int dim, double alpha, double truncation);

    double axis_cost(int t, std::size_t x, int axis, double v) const override;
    double axis_control(int t, std::size_t x, int axis, double p) const override;
    bool minimize_linear(int t, std::size_t x, std::span<const double> slope, double bound,
                         std::span<double> out) const override;

private:
    double alpha_;
};

/// Conjugate of arbitrary strictly convex per-axis costs, maximized numerically.
class NumericHamiltonian final : public SeparableHamiltonian {
public:
    using AxisCost = std::function<double(int t, std::size_t x, int axis, double v)>;

    NumericHamiltonian(int dim, double truncation, AxisCost cost);

    double axis_cost(int t, std::size_t x, int axis, double v) const override;
    double axis_control(int t, std::size_t x, int axis, double p) const override;

private:
    AxisCost cost_;
};

/**
 * Solver for (Id - c dt Lap_h) Y = X on the periodic lattice.
 *
 * d = 1 uses a direct cyclic tridiagonal elimination; d >= 2 uses the
 * contraction iteration Y <- (X + gamma sum_j (Y(.+he_j) + Y(.-he_j))) / (1 + 2 d gamma)
 * with gamma = c dt / h^2, capped at 100 (1 + 2 d gamma) sweeps.
 */
class ImplicitHeatSolver {
public:
    ImplicitHeatSolver(const Grid& grid, double coefficient);

    void solve(std::span<const double> rhs, std::span<double> out) const;
    std::vector<double> solve(std::span<const double> rhs) const;

    double gamma() const { return gamma_; }

private:
    void solve_direct(std::span<const double> rhs, std::span<double> out) const;
    void solve_iterative(std::span<const double> rhs, std::span<double> out) const;

    Grid grid_;
    double gamma_;
    // Cyclic tridiagonal factorization (d = 1, N >= 3).
    std::vector<double> diag_;
    std::vector<double> upper_;
    std::vector<double> correction_;
    double corner_factor_ = 0.0;
};

std::vector<double> implicit_heat_solve(std::span<const double> rhs, double coefficient, const Grid& grid);

/// Theta-scheme discretization of a potential second-order MFG.
struct ThetaProblem {
    PotentialProblem base;
    ThetaConfig config;
    std::shared_ptr<const SeparableHamiltonian> hamiltonian;
};

ThetaProblem make_theta_problem(const ThetaConfig& config, std::shared_ptr<const SeparableHamiltonian> hamiltonian,
                                std::shared_ptr<const Coupling> coupling, std::vector<double> terminal,
                                std::vector<double> initial, double coupling_lipschitz);

struct HjbThetaResult {
    ScalarField u;            // (T+1) x S
    VectorField gradients;    // grad_h u(t+1/2), T x S x d
    ScalarField hamiltonian;  // H(t, x, grad_h u(t+1/2))
};

HjbThetaResult hjb_theta(const ThetaProblem& problem, const ScalarField& m);
VectorField v_theta(const ThetaProblem& problem, const VectorField& gradients);
ScalarField fp_theta(const ThetaProblem& problem, const VectorField& v);
BestResponse best_response(const ThetaProblem& problem, const ScalarField& m_prime);

class ThetaScheme final : public MfgScheme {
public:
    explicit ThetaScheme(ThetaProblem problem);

    const PotentialProblem& problem() const override { return problem_.base; }
    BestResponse best_response(const ScalarField& m_prime) const override;

    const ThetaProblem& theta_problem() const { return problem_; }

private:
    ThetaProblem problem_;
};

/**
 * Dense kernel (pi0, pi1) equivalent to one theta-scheme step: the implicit
 * heat solve followed by the explicit sub-step. Time independent, replicated
 * over `steps` steps with the grid's dt. Intended for validation on small lattices.
 */
Kernel theta_kernel(const ThetaConfig& config, int steps = 0);  // 0: grid.time_steps()

// Translation-invariant functionals on a lattice slice. `y` ranges over
// nonzero lattice shifts with the periodic (minimal image) norm.
double lipschitz_functional(std::span<const double> values, const Grid& grid);
double semiconcavity_functional(std::span<const double> values, const Grid& grid);

/// Continuous 1D-or-more data to be projected onto the lattice.
struct ContinuousData {
    std::function<double(std::span<const double>)> terminal;        // g^c
    std::function<double(std::span<const double>)> initial_density;  // m0^c
    // Optional profile b^c of a separable congestion f^c(x,m) = b^c(x) int b^c m.
    std::function<double(std::span<const double>)> congestion_profile;
};

struct DiscretizedData {
    std::vector<double> terminal;
    std::vector<double> initial;
    double initial_raw_mass = 0.0;  // mass before renormalization
    std::vector<double> congestion_profile;  // cell averages of b^c (empty if absent)
};

// Composite midpoint rule with q^d sub-cells on B_h(x) = prod [x - h/2, x + h/2).
std::vector<double> cell_integrals(const std::function<double(std::span<const double>)>& fn, const Grid& grid,
                                   int order);
std::vector<double> cell_averages(const std::function<double(std::span<const double>)>& fn, const Grid& grid,
                                  int order);

DiscretizedData discretize_data(const ContinuousData& data, const Grid& grid, int order = 8);

}  // namespace mfgfw
