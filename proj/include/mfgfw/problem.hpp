#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "mfgfw/grid.hpp"

namespace mfgfw {

/// Running cost l(t, x, control), +infinity outside its domain.
class RunningCost {
public:
    virtual ~RunningCost() = default;

    virtual double value(int t, std::size_t x, std::span<const double> control) const = 0;

    // Closed-form argmin of l(t,x,.) + <slope,.> over the ball ||.|| <= bound.
    // Returns false when no closed form is available.
    virtual bool minimize_linear(int /*t*/, std::size_t /*x*/, std::span<const double> /*slope*/,
                                 double /*bound*/, std::span<double> /*out*/) const {
        return false;
    }
};

/// l = alpha/2 ||v||^2 on the Euclidean ball of radius `bound`.
class QuadraticRunningCost final : public RunningCost {
public:
    QuadraticRunningCost(double alpha, double bound);

    double value(int t, std::size_t x, std::span<const double> control) const override;
    bool minimize_linear(int t, std::size_t x, std::span<const double> slope, double bound,
                         std::span<double> out) const override;

    double alpha() const { return alpha_; }
    double bound() const { return bound_; }

private:
    double alpha_;
    double bound_;
};

/**
 * Coupling f(t, x, m) together with its primitive F(t, m):
 *   F(t,m1) - F(t,m2) = int_0^1 sum_x f(t, x, m2 + s(m1-m2)) (m1-m2)(x) ds.
 */
class Coupling {
public:
    virtual ~Coupling() = default;

    virtual void apply(int t, std::span<const double> m, std::span<double> out) const = 0;
    virtual double potential(int t, std::span<const double> m) const = 0;
    // Lipschitz constant of m -> f(t,x,m) w.r.t. the Euclidean norm on m.
    virtual double lipschitz() const = 0;

    std::vector<double> apply(int t, std::span<const double> m) const;
};

/// f = 0, F = 0.
class ZeroCoupling final : public Coupling {
public:
    void apply(int t, std::span<const double> m, std::span<double> out) const override;
    double potential(int t, std::span<const double> m) const override;
    double lipschitz() const override { return 0.0; }
};

/// f(x, m) = sum_y K(x,y) m(y) with K symmetric positive semi-definite; F = m^T K m / 2.
class QuadraticCoupling final : public Coupling {
public:
    QuadraticCoupling(std::size_t states, std::vector<double> matrix);

    void apply(int t, std::span<const double> m, std::span<double> out) const override;
    double potential(int t, std::span<const double> m) const override;
    double lipschitz() const override { return lipschitz_; }

    std::span<const double> matrix() const { return matrix_; }

private:
    std::size_t states_;
    std::vector<double> matrix_;
    double lipschitz_;
};

/// Separable nonlocal congestion f(x, m) = b(x) <b, m>; F = <b, m>^2 / 2.
class RankOneCoupling final : public Coupling {
public:
    RankOneCoupling(std::vector<double> profile, double lipschitz);

    void apply(int t, std::span<const double> m, std::span<double> out) const override;
    double potential(int t, std::span<const double> m) const override;
    double lipschitz() const override { return lipschitz_; }

    std::span<const double> profile() const { return profile_; }

private:
    std::vector<double> profile_;
    double lipschitz_;
};

/**
 * Data shared by every discrete potential MFG: horizon, state count,
 * running cost, coupling, terminal cost and initial distribution.
 * `coupling_lipschitz` is the constant L_f used by stepsize rules and
 * descent bounds; it may be looser than coupling->lipschitz().
 */
struct PotentialProblem {
    int steps = 1;
    std::size_t states = 1;
    int dim = 1;
    double dt = 1.0;
    std::shared_ptr<const RunningCost> running;
    std::shared_ptr<const Coupling> coupling;
    std::vector<double> terminal;
    std::vector<double> initial;
    double coupling_lipschitz = 0.0;
};

// Throws ContractError when sizes disagree or the initial law is not in P(S).
void validate(const PotentialProblem& problem);

/**
 * Output of a best-response evaluation BR(m').
 *
 * Besides (m, w = m v, v, u) it carries the adjoint data of the backward
 * sweep: `slope(t,x)` is the vector multiplying the control in the one-step
 * dynamic-programming objective and `hamiltonian(t,x)` equals
 * sup_w { -<slope, w> - l(t,x,w) }. Both make the linearized gap of any
 * feasible pair computable as a sum of pointwise Fenchel gaps.
 */
struct BestResponse {
    ScalarField m;            // (T+1) x S
    VectorField w;            // T x S x d
    VectorField v;            // T x S x d
    ScalarField u;            // (T+1) x S
    VectorField slope;        // T x S x d
    ScalarField hamiltonian;  // T x S
};

/// A discretization that can evaluate best responses for a potential MFG.
class MfgScheme {
public:
    virtual ~MfgScheme() = default;

    virtual const PotentialProblem& problem() const = 0;
    virtual BestResponse best_response(const ScalarField& m_prime) const = 0;
};

}  // namespace mfgfw
