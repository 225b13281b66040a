#include "mfgfw/problem.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mfgfw/errors.hpp"

namespace mfgfw {

namespace {

double euclidean(std::span<const double> v) {
    double sq = 0.0;
    for (double c : v) sq += c * c;
    return std::sqrt(sq);
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double spectral_radius(std::size_t n, std::span<const double> matrix) {
    std::vector<double> x(n, 1.0 / std::sqrt(static_cast<double>(n)));
    std::vector<double> y(n);
    double lambda = 0.0;
    for (int it = 0; it < 1000; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += matrix[i * n + j] * x[j];
            y[i] = acc;
        }
        const double norm = euclidean(y);
        if (norm == 0.0) return 0.0;
        for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / norm;
        if (std::abs(norm - lambda) <= 1e-14 * norm) return norm;
        lambda = norm;
    }
    return lambda;
}

}  // namespace

QuadraticRunningCost::QuadraticRunningCost(double alpha, double bound) : alpha_(alpha), bound_(bound) {
    if (!(alpha > 0.0)) throw ContractError("quadratic running cost: alpha must be positive");
    if (!(bound > 0.0)) throw ContractError("quadratic running cost: bound must be positive");
}

double QuadraticRunningCost::value(int, std::size_t, std::span<const double> control) const {
    const double norm = euclidean(control);
    if (norm > bound_ * (1.0 + 1e-12)) return kInfinity;
    return 0.5 * alpha_ * norm * norm;
}

bool QuadraticRunningCost::minimize_linear(int, std::size_t, std::span<const double> slope, double bound,
                                           std::span<double> out) const {
    // Isotropic quadratic: the constrained minimizer is the projection of -slope/alpha.
    const double radius = std::min(bound, bound_);
    double sq = 0.0;
    for (std::size_t i = 0; i < slope.size(); ++i) {
        out[i] = -slope[i] / alpha_;
        sq += out[i] * out[i];
    }
    const double norm = std::sqrt(sq);
    if (norm > radius) {
        for (double& c : out) c *= radius / norm;
    }
    return true;
}

std::vector<double> Coupling::apply(int t, std::span<const double> m) const {
    std::vector<double> out(m.size());
    apply(t, m, out);
    return out;
}

void ZeroCoupling::apply(int, std::span<const double>, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
}

double ZeroCoupling::potential(int, std::span<const double>) const { return 0.0; }

QuadraticCoupling::QuadraticCoupling(std::size_t states, std::vector<double> matrix)
    : states_(states), matrix_(std::move(matrix)) {
    if (matrix_.size() != states_ * states_) {
        throw ContractError("quadratic coupling: matrix must be states x states");
    }
    for (std::size_t i = 0; i < states_; ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            const double a = matrix_[i * states_ + j];
            const double b = matrix_[j * states_ + i];
            if (std::abs(a - b) > 1e-12 * (1.0 + std::abs(a))) {
                throw ContractError("quadratic coupling: matrix must be symmetric");
            }
        }
    }
    lipschitz_ = spectral_radius(states_, matrix_);
}

void QuadraticCoupling::apply(int, std::span<const double> m, std::span<double> out) const {
    for (std::size_t i = 0; i < states_; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < states_; ++j) acc += matrix_[i * states_ + j] * m[j];
        out[i] = acc;
    }
}

double QuadraticCoupling::potential(int t, std::span<const double> m) const {
    std::vector<double> km(states_);
    apply(t, m, km);
    return 0.5 * dot(m, km);
}

RankOneCoupling::RankOneCoupling(std::vector<double> profile, double lipschitz)
    : profile_(std::move(profile)), lipschitz_(lipschitz) {}

void RankOneCoupling::apply(int, std::span<const double> m, std::span<double> out) const {
    const double mean = dot(profile_, m);
    for (std::size_t x = 0; x < profile_.size(); ++x) out[x] = profile_[x] * mean;
}

double RankOneCoupling::potential(int, std::span<const double> m) const {
    const double mean = dot(profile_, m);
    return 0.5 * mean * mean;
}

void validate(const PotentialProblem& problem) {
    if (problem.steps < 1) throw ContractError("problem: steps must be positive");
    if (problem.states < 1) throw ContractError("problem: state space is empty");
    if (!problem.running) throw ContractError("problem: running cost missing");
    if (!problem.coupling) throw ContractError("problem: coupling missing");
    if (problem.terminal.size() != problem.states) throw ContractError("problem: terminal cost size mismatch");
    if (problem.initial.size() != problem.states) throw ContractError("problem: initial law size mismatch");
    double mass = 0.0;
    for (double v : problem.initial) {
        if (v < 0.0) throw ContractError("problem: initial law has a negative entry");
        mass += v;
    }
    if (std::abs(mass - 1.0) > 1e-12) {
        throw ContractError("problem: initial law has mass " + std::to_string(mass) + ", expected 1");
    }
}

}  // namespace mfgfw
