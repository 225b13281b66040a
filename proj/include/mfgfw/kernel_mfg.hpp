#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mfgfw/grid.hpp"
#include "mfgfw/problem.hpp"

namespace mfgfw {

/**
 * Dense transition kernel pi(t,x,y,w) = pi0(t,x,y) + dt <pi1(t,x,y), w>.
 *
 * Stored as T x |S| x |S| (pi0) and T x |S| x |S| x d (pi1) arrays. Meant
 * for small state spaces (|S| up to about 10^3).
 */
class Kernel {
public:
    Kernel(int steps, std::size_t states, int dim, double dt);

    int steps() const { return steps_; }
    std::size_t states() const { return states_; }
    int dim() const { return dim_; }
    double dt() const { return dt_; }

    double& pi0(int t, std::size_t x, std::size_t y) { return pi0_[index(t, x, y)]; }
    double pi0(int t, std::size_t x, std::size_t y) const { return pi0_[index(t, x, y)]; }
    std::span<double> pi1(int t, std::size_t x, std::size_t y);
    std::span<const double> pi1(int t, std::size_t x, std::size_t y) const;

    // y -> pi(t,x,y,control). Throws ContractError when ||control|| > bound.
    std::vector<double> transition(int t, std::size_t x, std::span<const double> control, double bound) const;

private:
    std::size_t index(int t, std::size_t x, std::size_t y) const {
        return (static_cast<std::size_t>(t) * states_ + x) * states_ + y;
    }

    int steps_;
    std::size_t states_;
    int dim_;
    double dt_;
    std::vector<double> pi0_;
    std::vector<double> pi1_;
};

/**
 * Plain-text kernel format: "steps states dim dt bound" followed by the
 * steps*states*states entries of pi0 and the steps*states*states*dim entries
 * of pi1, each in (t, x, y[, i]) lexicographic order.
 */
void write_kernel(std::ostream& out, const Kernel& kernel, double control_bound);
// Throws ConfigError on malformed input.
Kernel read_kernel(std::istream& in, double& control_bound);

/// Outcome of the three kernel validity conditions.
struct KernelReport {
    bool stochastic = true;   // pi0(t,x,.) in P(S)
    bool zero_sum = true;     // sum_y pi1(t,x,y) = 0
    bool dominated = true;    // pi0 >= dt * D * ||pi1||
    double worst_row_error = 0.0;
    double worst_zero_sum_error = 0.0;
    double worst_domination_gap = 0.0;  // max of dt*D*||pi1|| - pi0 (positive = violated)
    std::string first_violation;

    bool ok() const { return stochastic && zero_sum && dominated; }
};

KernelReport check_kernel(const Kernel& kernel, double control_bound, double tol = 1e-12);

// Throws ContractError describing the first violated condition.
void validate_kernel(const Kernel& kernel, double control_bound, double tol = 1e-12);

/// How the one-step control problem is minimized.
struct ControlSearch {
    double resolution = 0.0;       // grid step per axis; 0 means bound/1000
    bool force_grid_search = false;  // ignore any closed-form minimizer
};

/// Generic discrete MFG driven by a transition kernel.
struct KernelProblem {
    PotentialProblem base;
    Kernel kernel;
    double control_bound = 1.0;  // D
    double alpha = 1.0;          // strong convexity modulus of l(t,x,.)
    ControlSearch search;
};

// Throws ContractError on size mismatches or an invalid kernel.
void validate(const KernelProblem& problem);

/**
 * Minimizes `cost` over the Euclidean ball of radius `bound` in R^dim by an
 * exhaustive lattice search (ties go to the lexicographically smallest
 * point), followed by one parabolic refinement per axis. Returns the
 * minimizer; throws SolverError when no lattice point has a finite cost.
 */
std::vector<double> grid_search_minimize(const std::function<double(std::span<const double>)>& cost, int dim,
                                         double bound, double resolution);

ScalarField hjb_solve(const KernelProblem& problem, const ScalarField& m);
VectorField v_map(const KernelProblem& problem, const ScalarField& u);
ScalarField fp_solve(const KernelProblem& problem, const VectorField& v);
BestResponse best_response(const KernelProblem& problem, const ScalarField& m_prime);

class KernelScheme final : public MfgScheme {
public:
    explicit KernelScheme(KernelProblem problem);

    const PotentialProblem& problem() const override { return problem_.base; }
    BestResponse best_response(const ScalarField& m_prime) const override;

    const KernelProblem& kernel_problem() const { return problem_; }

private:
    KernelProblem problem_;
};

}  // namespace mfgfw
