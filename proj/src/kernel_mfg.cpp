#include "mfgfw/kernel_mfg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "mfgfw/errors.hpp"

namespace mfgfw {

namespace {

constexpr double kBoundSlack = 1e-12;

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

std::string at_point(int t, std::size_t x) {
    std::ostringstream os;
    os << "(t=" << t << ", x=" << x << ")";
    return os.str();
}

void check_curve(const KernelProblem& problem, const ScalarField& m, const char* what) {
    if (m.num_times() != static_cast<std::size_t>(problem.base.steps) + 1 ||
        m.num_points() != problem.base.states) {
        throw ContractError(std::string(what) + ": curve has wrong shape");
    }
}

// Solution of the one-step problem at (t,x) given u(t+1,.).
struct StepSolution {
    std::vector<double> control;
    std::vector<double> slope;  // sum_y pi1(t,x,y) u(t+1,y)
    double expectation = 0.0;   // sum_y pi0(t,x,y) u(t+1,y)
    double reduced = 0.0;       // l(control) + <slope, control>
};

StepSolution solve_step(const KernelProblem& problem, int t, std::size_t x, std::span<const double> u_next) {
    const Kernel& kernel = problem.kernel;
    const auto d = static_cast<std::size_t>(kernel.dim());
    StepSolution sol;
    sol.slope.assign(d, 0.0);
    sol.control.assign(d, 0.0);
    for (std::size_t y = 0; y < kernel.states(); ++y) {
        sol.expectation += kernel.pi0(t, x, y) * u_next[y];
        const auto p1 = kernel.pi1(t, x, y);
        for (std::size_t i = 0; i < d; ++i) sol.slope[i] += p1[i] * u_next[y];
    }
    const RunningCost& running = *problem.base.running;
    const double bound = problem.control_bound;
    bool closed = false;
    if (!problem.search.force_grid_search) {
        closed = running.minimize_linear(t, x, sol.slope, bound, sol.control);
    }
    if (!closed) {
        const double resolution = problem.search.resolution > 0.0 ? problem.search.resolution : bound / 1000.0;
        try {
            sol.control = grid_search_minimize(
                [&](std::span<const double> w) { return running.value(t, x, w) + dot(sol.slope, w); },
                kernel.dim(), bound, resolution);
        } catch (const SolverError&) {
            throw SolverError("control minimization failed at " + at_point(t, x) +
                              ": no finite cost on the control ball");
        }
    }
    sol.reduced = running.value(t, x, sol.control) + dot(sol.slope, sol.control);
    if (!std::isfinite(sol.reduced)) {
        throw SolverError("control minimization failed at " + at_point(t, x) + ": minimum is not finite");
    }
    return sol;
}

struct BackwardSweep {
    ScalarField u;
    VectorField v;
    VectorField slope;
    ScalarField hamiltonian;
};

BackwardSweep backward(const KernelProblem& problem, const ScalarField& m) {
    const PotentialProblem& base = problem.base;
    const auto steps = static_cast<std::size_t>(base.steps);
    BackwardSweep out{ScalarField(steps + 1, base.states), VectorField(steps, base.states, base.dim),
                      VectorField(steps, base.states, base.dim), ScalarField(steps, base.states)};
    std::copy(base.terminal.begin(), base.terminal.end(), out.u.slice(steps).begin());
    std::vector<double> coupling(base.states);
    for (int t = base.steps - 1; t >= 0; --t) {
        const auto ts = static_cast<std::size_t>(t);
        base.coupling->apply(t, m.slice(ts), coupling);
        const auto u_next = out.u.slice(ts + 1);
        for (std::size_t x = 0; x < base.states; ++x) {
            StepSolution sol = solve_step(problem, t, x, u_next);
            out.u(ts, x) = base.dt * (sol.reduced + coupling[x]) + sol.expectation;
            std::copy(sol.control.begin(), sol.control.end(), out.v.at(ts, x).begin());
            std::copy(sol.slope.begin(), sol.slope.end(), out.slope.at(ts, x).begin());
            out.hamiltonian(ts, x) = -sol.reduced;
        }
    }
    return out;
}

}  // namespace

Kernel::Kernel(int steps, std::size_t states, int dim, double dt)
    : steps_(steps), states_(states), dim_(dim), dt_(dt) {
    if (steps < 1 || states < 1 || dim < 1) throw ContractError("kernel: empty dimensions");
    if (!(dt > 0.0)) throw ContractError("kernel: time step must be positive");
    const std::size_t n = static_cast<std::size_t>(steps) * states * states;
    pi0_.assign(n, 0.0);
    pi1_.assign(n * static_cast<std::size_t>(dim), 0.0);
}

std::span<double> Kernel::pi1(int t, std::size_t x, std::size_t y) {
    const auto d = static_cast<std::size_t>(dim_);
    return std::span<double>(pi1_).subspan(index(t, x, y) * d, d);
}

std::span<const double> Kernel::pi1(int t, std::size_t x, std::size_t y) const {
    const auto d = static_cast<std::size_t>(dim_);
    return std::span<const double>(pi1_).subspan(index(t, x, y) * d, d);
}

void write_kernel(std::ostream& out, const Kernel& kernel, double control_bound) {
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << buf;
    };
    out << kernel.steps() << ' ' << kernel.states() << ' ' << kernel.dim() << ' ';
    put(kernel.dt());
    out << ' ';
    put(control_bound);
    out << '\n';
    for (int t = 0; t < kernel.steps(); ++t) {
        for (std::size_t x = 0; x < kernel.states(); ++x) {
            for (std::size_t y = 0; y < kernel.states(); ++y) {
                if (y) out << ' ';
                put(kernel.pi0(t, x, y));
            }
            out << '\n';
        }
    }
    for (int t = 0; t < kernel.steps(); ++t) {
        for (std::size_t x = 0; x < kernel.states(); ++x) {
            bool first = true;
            for (std::size_t y = 0; y < kernel.states(); ++y) {
                for (double c : kernel.pi1(t, x, y)) {
                    if (!first) out << ' ';
                    first = false;
                    put(c);
                }
            }
            out << '\n';
        }
    }
}

Kernel read_kernel(std::istream& in, double& control_bound) {
    int steps = 0;
    long long states = 0;
    int dim = 0;
    double dt = 0.0;
    if (!(in >> steps >> states >> dim >> dt >> control_bound)) {
        throw ConfigError("kernel file: malformed header (expected steps states dim dt bound)");
    }
    if (steps < 1 || states < 1 || dim < 1 || !(dt > 0.0) || !(control_bound > 0.0)) {
        throw ConfigError("kernel file: header values out of range");
    }
    Kernel kernel(steps, static_cast<std::size_t>(states), dim, dt);
    const auto n = static_cast<std::size_t>(states);
    for (int t = 0; t < steps; ++t) {
        for (std::size_t x = 0; x < n; ++x) {
            for (std::size_t y = 0; y < n; ++y) {
                if (!(in >> kernel.pi0(t, x, y))) throw ConfigError("kernel file: truncated pi0 block");
            }
        }
    }
    for (int t = 0; t < steps; ++t) {
        for (std::size_t x = 0; x < n; ++x) {
            for (std::size_t y = 0; y < n; ++y) {
                for (double& c : kernel.pi1(t, x, y)) {
                    if (!(in >> c)) throw ConfigError("kernel file: truncated pi1 block");
                }
            }
        }
    }
    return kernel;
}

std::vector<double> Kernel::transition(int t, std::size_t x, std::span<const double> control, double bound) const {
    if (control.size() != static_cast<std::size_t>(dim_)) throw ContractError("transition: control has wrong size");
    if (euclidean(control) > bound * (1.0 + kBoundSlack)) {
        throw ContractError("transition: control exceeds the bound at " + at_point(t, x));
    }
    std::vector<double> out(states_);
    for (std::size_t y = 0; y < states_; ++y) out[y] = pi0(t, x, y) + dt_ * dot(pi1(t, x, y), control);
    return out;
}

KernelReport check_kernel(const Kernel& kernel, double control_bound, double tol) {
    KernelReport report;
    auto note = [&](const std::string& msg) {
        if (report.first_violation.empty()) report.first_violation = msg;
    };
    const auto d = static_cast<std::size_t>(kernel.dim());
    for (int t = 0; t < kernel.steps(); ++t) {
        for (std::size_t x = 0; x < kernel.states(); ++x) {
            double row = 0.0;
            std::vector<double> zero(d, 0.0);
            for (std::size_t y = 0; y < kernel.states(); ++y) {
                const double p0 = kernel.pi0(t, x, y);
                const auto p1 = kernel.pi1(t, x, y);
                row += p0;
                for (std::size_t i = 0; i < d; ++i) zero[i] += p1[i];
                if (p0 < -tol) {
                    report.stochastic = false;
                    note("pi0 negative at " + at_point(t, x) + " y=" + std::to_string(y));
                }
                const double gap = kernel.dt() * control_bound * euclidean(p1) - p0;
                report.worst_domination_gap = std::max(report.worst_domination_gap, gap);
                if (gap > tol) {
                    report.dominated = false;
                    note("pi0 < dt*D*||pi1|| at " + at_point(t, x) + " y=" + std::to_string(y));
                }
            }
            const double row_err = std::abs(row - 1.0);
            report.worst_row_error = std::max(report.worst_row_error, row_err);
            if (row_err > tol) {
                report.stochastic = false;
                note("pi0 row does not sum to 1 at " + at_point(t, x));
            }
            const double zs = euclidean(zero);
            report.worst_zero_sum_error = std::max(report.worst_zero_sum_error, zs);
            if (zs > tol) {
                report.zero_sum = false;
                note("pi1 row does not sum to 0 at " + at_point(t, x));
            }
        }
    }
    return report;
}

void validate_kernel(const Kernel& kernel, double control_bound, double tol) {
    const KernelReport report = check_kernel(kernel, control_bound, tol);
    if (!report.ok()) throw ContractError("invalid kernel: " + report.first_violation);
}

void validate(const KernelProblem& problem) {
    validate(problem.base);
    const Kernel& k = problem.kernel;
    if (k.steps() != problem.base.steps || k.states() != problem.base.states || k.dim() != problem.base.dim) {
        throw ContractError("kernel problem: kernel shape does not match the problem");
    }
    if (std::abs(k.dt() - problem.base.dt) > 1e-15) throw ContractError("kernel problem: time step mismatch");
    if (!(problem.control_bound > 0.0)) throw ContractError("kernel problem: control bound must be positive");
    validate_kernel(k, problem.control_bound);
}

std::vector<double> grid_search_minimize(const std::function<double(std::span<const double>)>& cost, int dim,
                                         double bound, double resolution) {
    if (dim < 1) throw ContractError("grid search: dimension must be positive");
    if (!(resolution > 0.0) || !(bound > 0.0)) throw ContractError("grid search: bound and resolution must be positive");
    const auto d = static_cast<std::size_t>(dim);
    const long long per_side = static_cast<long long>(std::floor(bound / resolution + 1e-9));
    std::vector<long long> idx(d, -per_side);
    std::vector<double> point(d);
    std::vector<double> best(d, 0.0);
    double best_value = kInfinity;
    bool any = false;
    bool done = false;
    while (!done) {
        for (std::size_t i = 0; i < d; ++i) point[i] = static_cast<double>(idx[i]) * resolution;
        if (euclidean(point) <= bound * (1.0 + kBoundSlack)) {
            const double value = cost(point);
            if (std::isfinite(value) && (!any || value < best_value)) {
                best_value = value;
                best = point;
                any = true;
            }
        }
        // Lexicographic odometer, last axis fastest.
        std::size_t axis = d;
        while (true) {
            if (axis == 0) {
                done = true;
                break;
            }
            --axis;
            if (idx[axis] < per_side) {
                ++idx[axis];
                break;
            }
            idx[axis] = -per_side;
        }
    }
    if (!any) throw SolverError("grid search: no finite cost on the control ball");

    // Parabolic refinement through best +- resolution, axis by axis.
    for (std::size_t i = 0; i < d; ++i) {
        std::vector<double> lo = best, hi = best;
        lo[i] -= resolution;
        hi[i] += resolution;
        const double f_lo = euclidean(lo) <= bound * (1.0 + kBoundSlack) ? cost(lo) : kInfinity;
        const double f_hi = euclidean(hi) <= bound * (1.0 + kBoundSlack) ? cost(hi) : kInfinity;
        if (!std::isfinite(f_lo) || !std::isfinite(f_hi)) continue;
        const double curvature = f_lo - 2.0 * best_value + f_hi;
        if (!(curvature > 0.0)) continue;
        double shift = 0.5 * resolution * (f_lo - f_hi) / curvature;
        shift = std::clamp(shift, -resolution, resolution);
        std::vector<double> candidate = best;
        candidate[i] += shift;
        if (euclidean(candidate) > bound * (1.0 + kBoundSlack)) continue;
        const double value = cost(candidate);
        if (std::isfinite(value) && value < best_value) {
            best_value = value;
            best = candidate;
        }
    }
    return best;
}

ScalarField hjb_solve(const KernelProblem& problem, const ScalarField& m) {
    check_curve(problem, m, "hjb_solve");
    return backward(problem, m).u;
}

VectorField v_map(const KernelProblem& problem, const ScalarField& u) {
    check_curve(problem, u, "v_map");
    const PotentialProblem& base = problem.base;
    VectorField v(static_cast<std::size_t>(base.steps), base.states, base.dim);
    for (int t = 0; t < base.steps; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        for (std::size_t x = 0; x < base.states; ++x) {
            const StepSolution sol = solve_step(problem, t, x, u.slice(ts + 1));
            std::copy(sol.control.begin(), sol.control.end(), v.at(ts, x).begin());
        }
    }
    return v;
}

ScalarField fp_solve(const KernelProblem& problem, const VectorField& v) {
    const PotentialProblem& base = problem.base;
    const auto steps = static_cast<std::size_t>(base.steps);
    if (v.num_times() != steps || v.num_points() != base.states || v.dim() != base.dim) {
        throw ContractError("fp_solve: control field has wrong shape");
    }
    const Kernel& kernel = problem.kernel;
    ScalarField m(steps + 1, base.states);
    std::copy(base.initial.begin(), base.initial.end(), m.slice(0).begin());
    for (int t = 0; t < base.steps; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        auto next = m.slice(ts + 1);
        for (std::size_t x = 0; x < base.states; ++x) {
            const double mass = m(ts, x);
            if (mass == 0.0) {
                if (euclidean(v.at(ts, x)) > problem.control_bound * (1.0 + kBoundSlack)) {
                    throw ContractError("fp_solve: control exceeds the bound at " + at_point(t, x));
                }
                continue;
            }
            const std::vector<double> row = kernel.transition(t, x, v.at(ts, x), problem.control_bound);
            for (std::size_t y = 0; y < base.states; ++y) next[y] += row[y] * mass;
        }
    }
    return m;
}

BestResponse best_response(const KernelProblem& problem, const ScalarField& m_prime) {
    check_curve(problem, m_prime, "best_response");
    BackwardSweep sweep = backward(problem, m_prime);
    BestResponse br;
    br.m = fp_solve(problem, sweep.v);
    br.w = VectorField(sweep.v.num_times(), sweep.v.num_points(), sweep.v.dim());
    const auto d = static_cast<std::size_t>(sweep.v.dim());
    for (std::size_t t = 0; t < sweep.v.num_times(); ++t) {
        for (std::size_t x = 0; x < sweep.v.num_points(); ++x) {
            for (std::size_t i = 0; i < d; ++i) br.w.at(t, x)[i] = br.m(t, x) * sweep.v.at(t, x)[i];
        }
    }
    br.v = std::move(sweep.v);
    br.u = std::move(sweep.u);
    br.slope = std::move(sweep.slope);
    br.hamiltonian = std::move(sweep.hamiltonian);
    return br;
}

KernelScheme::KernelScheme(KernelProblem problem) : problem_(std::move(problem)) { validate(problem_); }

BestResponse KernelScheme::best_response(const ScalarField& m_prime) const {
    return mfgfw::best_response(problem_, m_prime);
}

}  // namespace mfgfw
