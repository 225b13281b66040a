#include "mfgfw/potential.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "mfgfw/errors.hpp"

namespace mfgfw {

namespace {

double euclidean(std::span<const double> v) {
    double sq = 0.0;
    for (double c : v) sq += c * c;
    return std::sqrt(sq);
}

void check_pair(const PotentialProblem& problem, const FlowPair& pair) {
    const auto steps = static_cast<std::size_t>(problem.steps);
    if (pair.m.num_times() != steps + 1 || pair.m.num_points() != problem.states) {
        throw ContractError("flow pair: density has wrong shape");
    }
    if (pair.w.num_times() != steps || pair.w.num_points() != problem.states || pair.w.dim() != problem.dim) {
        throw ContractError("flow pair: momentum has wrong shape");
    }
}

double perspective_sum(const PotentialProblem& problem, const FlowPair& pair) {
    double acc = 0.0;
    for (std::size_t t = 0; t < pair.w.num_times(); ++t) {
        for (std::size_t x = 0; x < problem.states; ++x) {
            acc += perspective_cost(*problem.running, static_cast<int>(t), x, pair.m(t, x), pair.w.at(t, x));
            if (acc == kInfinity) return kInfinity;
        }
    }
    return acc;
}

double terminal_term(const PotentialProblem& problem, const ScalarField& m) {
    const auto last = m.slice(m.num_times() - 1);
    double acc = 0.0;
    for (std::size_t x = 0; x < problem.states; ++x) acc += problem.terminal[x] * last[x];
    return acc;
}

}  // namespace

double perspective_cost(const RunningCost& running, int t, std::size_t x, double m_val,
                        std::span<const double> w_val) {
    if (m_val < -kMassEpsilon) return kInfinity;
    if (m_val > kMassEpsilon) {
        std::array<double, 8> small{};
        std::vector<double> large;
        std::span<double> control;
        if (w_val.size() <= small.size()) {
            control = std::span<double>(small.data(), w_val.size());
        } else {
            large.resize(w_val.size());
            control = large;
        }
        for (std::size_t i = 0; i < w_val.size(); ++i) control[i] = w_val[i] / m_val;
        const double value = running.value(t, x, control);
        return value == kInfinity ? kInfinity : value * m_val;
    }
    return euclidean(w_val) <= kMassEpsilon ? 0.0 : kInfinity;
}

double cost_J_tilde(const PotentialProblem& problem, const FlowPair& pair) {
    check_pair(problem, pair);
    const double running = perspective_sum(problem, pair);
    if (running == kInfinity) return kInfinity;
    double coupling = 0.0;
    for (std::size_t t = 0; t < pair.w.num_times(); ++t) {
        coupling += problem.coupling->potential(static_cast<int>(t), pair.m.slice(t));
    }
    return problem.dt * (running + coupling) + terminal_term(problem, pair.m);
}

double cost_J_linearized(const PotentialProblem& problem, const ScalarField& m_prime, const FlowPair& pair) {
    check_pair(problem, pair);
    if (m_prime.num_times() != pair.m.num_times() || m_prime.num_points() != pair.m.num_points()) {
        throw ContractError("linearized cost: reference curve has wrong shape");
    }
    const double running = perspective_sum(problem, pair);
    if (running == kInfinity) return kInfinity;
    double coupling = 0.0;
    std::vector<double> f(problem.states);
    for (std::size_t t = 0; t < pair.w.num_times(); ++t) {
        problem.coupling->apply(static_cast<int>(t), m_prime.slice(t), f);
        const auto m = pair.m.slice(t);
        for (std::size_t x = 0; x < problem.states; ++x) coupling += f[x] * m[x];
    }
    return problem.dt * (running + coupling) + terminal_term(problem, pair.m);
}

double cost_J(const PotentialProblem& problem, const ScalarField& m, const VectorField& v) {
    check_pair(problem, FlowPair{m, VectorField(v.num_times(), v.num_points(), v.dim())});
    double running = 0.0;
    double coupling = 0.0;
    for (std::size_t t = 0; t < v.num_times(); ++t) {
        for (std::size_t x = 0; x < problem.states; ++x) {
            const double mass = m(t, x);
            if (mass == 0.0) continue;
            const double value = problem.running->value(static_cast<int>(t), x, v.at(t, x));
            if (value == kInfinity) return kInfinity;
            running += value * mass;
        }
        coupling += problem.coupling->potential(static_cast<int>(t), m.slice(t));
    }
    return problem.dt * (running + coupling) + terminal_term(problem, m);
}

FlowPair chi_transform(const ScalarField& m, const VectorField& v) {
    if (m.num_times() != v.num_times() + 1 || m.num_points() != v.num_points()) {
        throw ContractError("chi_transform: density and control shapes disagree");
    }
    FlowPair pair{m, VectorField(v.num_times(), v.num_points(), v.dim())};
    const auto d = static_cast<std::size_t>(v.dim());
    for (std::size_t t = 0; t < v.num_times(); ++t) {
        for (std::size_t x = 0; x < v.num_points(); ++x) {
            const auto src = v.at(t, x);
            auto dst = pair.w.at(t, x);
            for (std::size_t i = 0; i < d; ++i) dst[i] = m(t, x) * src[i];
        }
    }
    return pair;
}

VectorField chi_inverse(const FlowPair& pair) {
    VectorField v(pair.w.num_times(), pair.w.num_points(), pair.w.dim());
    const auto d = static_cast<std::size_t>(pair.w.dim());
    for (std::size_t t = 0; t < pair.w.num_times(); ++t) {
        for (std::size_t x = 0; x < pair.w.num_points(); ++x) {
            const double mass = pair.m(t, x);
            if (mass <= kMassEpsilon) continue;
            const auto src = pair.w.at(t, x);
            auto dst = v.at(t, x);
            for (std::size_t i = 0; i < d; ++i) dst[i] = src[i] / mass;
        }
    }
    return v;
}

FlowPair combine(const FlowPair& a, const FlowPair& b, double lambda) {
    if (a.m.values().size() != b.m.values().size() || a.w.values().size() != b.w.values().size()) {
        throw ContractError("combine: flow pairs have different shapes");
    }
    FlowPair out = a;
    auto mix = [lambda](std::span<double> dst, std::span<const double> src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = (1.0 - lambda) * dst[i] + lambda * src[i];
    };
    mix(out.m.values(), b.m.values());
    mix(out.w.values(), b.w.values());
    return out;
}

double delta_bar(const ScalarField& m1, const ScalarField& m2) {
    if (m1.values().size() != m2.values().size()) throw ContractError("delta_bar: shapes disagree");
    double worst = 0.0;
    for (std::size_t t = 0; t < m1.num_times(); ++t) {
        const auto a = m1.slice(t);
        const auto b = m2.slice(t);
        double sq = 0.0;
        for (std::size_t x = 0; x < a.size(); ++x) sq += (a[x] - b[x]) * (a[x] - b[x]);
        worst = std::max(worst, sq);
    }
    return worst;
}

GapDiagnostics gap_diagnostics(const PotentialProblem& problem, const FlowPair& current, const FlowPair& response) {
    GapDiagnostics out;
    out.gamma_bar = cost_J_linearized(problem, current.m, current) - cost_J_linearized(problem, current.m, response);
    out.delta_bar = delta_bar(current.m, response.m);
    return out;
}

double fenchel_gap(const PotentialProblem& problem, const FlowPair& current, const BestResponse& response) {
    check_pair(problem, current);
    const auto d = static_cast<std::size_t>(problem.dim);
    double acc = 0.0;
    for (std::size_t t = 0; t < current.w.num_times(); ++t) {
        double slice = 0.0;
        for (std::size_t x = 0; x < problem.states; ++x) {
            const double mass = current.m(t, x);
            const auto w = current.w.at(t, x);
            const double cost = perspective_cost(*problem.running, static_cast<int>(t), x, mass, w);
            if (cost == kInfinity) return kInfinity;
            const auto slope = response.slope.at(t, x);
            double pairing = 0.0;
            for (std::size_t i = 0; i < d; ++i) pairing += slope[i] * w[i];
            slice += cost + pairing + std::max(mass, 0.0) * response.hamiltonian(t, x);
        }
        acc += slice;
    }
    return problem.dt * acc;
}

Quadrature gauss_legendre(int n) {
    if (n < 1) throw ContractError("gauss_legendre: need at least one node");
    Quadrature q;
    q.nodes.resize(static_cast<std::size_t>(n));
    q.weights.resize(static_cast<std::size_t>(n));
    const double pi = 3.14159265358979323846;
    for (int i = 0; i < n; ++i) {
        // Newton iteration on P_n from the Chebyshev-like initial guess.
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0;
            double p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double step = p1 / dp;
            x -= step;
            if (std::abs(step) < 1e-16) break;
        }
        const auto idx = static_cast<std::size_t>(i);
        q.nodes[idx] = 0.5 * (1.0 - x);
        q.weights[idx] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    return q;
}

double potential_identity_defect(const Coupling& coupling, int t, std::span<const double> m1,
                                 std::span<const double> m2, int nodes) {
    if (m1.size() != m2.size()) throw ContractError("potential identity: slices differ in size");
    const Quadrature q = gauss_legendre(nodes);
    std::vector<double> point(m1.size()), f(m1.size());
    double integral = 0.0;
    for (std::size_t j = 0; j < q.nodes.size(); ++j) {
        for (std::size_t x = 0; x < m1.size(); ++x) point[x] = m2[x] + q.nodes[j] * (m1[x] - m2[x]);
        coupling.apply(t, point, f);
        double pairing = 0.0;
        for (std::size_t x = 0; x < m1.size(); ++x) pairing += f[x] * (m1[x] - m2[x]);
        integral += q.weights[j] * pairing;
    }
    return std::abs(coupling.potential(t, m1) - coupling.potential(t, m2) - integral);
}

double monotonicity_pairing(const Coupling& coupling, int t, std::span<const double> m1,
                            std::span<const double> m2) {
    if (m1.size() != m2.size()) throw ContractError("monotonicity: slices differ in size");
    const std::vector<double> f1 = coupling.apply(t, m1);
    const std::vector<double> f2 = coupling.apply(t, m2);
    double acc = 0.0;
    for (std::size_t x = 0; x < m1.size(); ++x) acc += (f1[x] - f2[x]) * (m1[x] - m2[x]);
    return acc;
}

double mass_error(const ScalarField& m) {
    double worst = 0.0;
    for (std::size_t t = 0; t < m.num_times(); ++t) {
        double sum = 0.0;
        for (double v : m.slice(t)) sum += v;
        worst = std::max(worst, std::abs(sum - 1.0));
    }
    return worst;
}

double min_value(const ScalarField& m) {
    const auto values = m.values();
    return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end());
}

}  // namespace mfgfw
