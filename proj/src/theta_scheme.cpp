#include "mfgfw/theta_scheme.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>

#include "mfgfw/errors.hpp"

namespace mfgfw {

namespace {

constexpr double kBoundSlack = 1e-12;

// Minimal-image length of the lattice shift with per-axis offsets `shift`.
double shift_norm(std::span<const int> shift, const Grid& grid) {
    double sq = 0.0;
    for (int c : shift) {
        const int m = std::min(c, grid.points_per_axis() - c);
        const double len = static_cast<double>(m) * grid.h();
        sq += len * len;
    }
    return std::sqrt(sq);
}

// Calls fn(shift) for every nonzero lattice shift (components in 0..N-1).
template <typename Fn>
void for_each_shift(const Grid& grid, Fn&& fn) {
    const auto d = static_cast<std::size_t>(grid.dim());
    for (std::size_t s = 1; s < grid.num_points(); ++s) {
        const std::vector<int> shift = grid.multi_index(s);
        fn(s, std::span<const int>(shift.data(), d));
    }
}

}  // namespace

void validate(const ThetaConfig& config) {
    if (!(config.theta > 0.5 && config.theta < 1.0)) {
        throw ConfigError("theta must lie in (1/2, 1), got " + std::to_string(config.theta));
    }
    if (!(config.sigma > 0.0)) throw ConfigError("sigma must be positive");
    if (!(config.truncation > 0.0)) throw ConfigError("truncation radius M must be positive");
}

CflReport cfl_check(const ThetaConfig& config) {
    const Grid& g = config.grid;
    const double h = g.h();
    const double explicit_weight = (1.0 - config.theta) * config.sigma;
    CflReport r;
    r.max_dt = h * h / (2.0 * g.dim() * explicit_weight);
    r.time_step_margin = r.max_dt - g.dt();
    r.time_step_ok = g.dt() <= r.max_dt * (1.0 + 1e-12);
    r.max_h = 2.0 * explicit_weight / config.truncation;
    r.mesh_margin = r.max_h - h;
    r.mesh_ok = h <= r.max_h * (1.0 + 1e-12);
    r.velocity_threshold = 2.0 * explicit_weight / h;
    return r;
}

void require_time_step_cfl(const ThetaConfig& config) {
    validate(config);
    const CflReport r = cfl_check(config);
    if (!r.time_step_ok) {
        std::ostringstream os;
        os << "CFL violated: dt = " << config.grid.dt() << " exceeds max_dt = " << r.max_dt
           << " (h = " << config.grid.h() << ")";
        throw ConfigError(os.str());
    }
}

// ---------------------------------------------------------------------------
// Hamiltonians

double SeparableHamiltonian::axis_value(int t, std::size_t x, int axis, double p) const {
    const double v = axis_control(t, x, axis, p);
    return -p * v - axis_cost(t, x, axis, v);
}

double SeparableHamiltonian::hamiltonian(int t, std::size_t x, std::span<const double> p) const {
    double acc = 0.0;
    for (int i = 0; i < dim_; ++i) acc += axis_value(t, x, i, p[static_cast<std::size_t>(i)]);
    return acc;
}

void SeparableHamiltonian::optimal_control(int t, std::size_t x, std::span<const double> p,
                                           std::span<double> out) const {
    for (int i = 0; i < dim_; ++i) {
        out[static_cast<std::size_t>(i)] = axis_control(t, x, i, p[static_cast<std::size_t>(i)]);
    }
}

double SeparableHamiltonian::value(int t, std::size_t x, std::span<const double> control) const {
    double acc = 0.0;
    for (int i = 0; i < dim_; ++i) {
        const double v = control[static_cast<std::size_t>(i)];
        if (std::abs(v) > truncation_ * (1.0 + kBoundSlack)) return kInfinity;
        acc += axis_cost(t, x, i, v);
    }
    return acc;
}

QuadraticHamiltonian::QuadraticHamiltonian(int dim, double alpha, double truncation)
    : SeparableHamiltonian(dim, truncation), alpha_(alpha) {
    if (!(alpha > 0.0)) throw ContractError("quadratic hamiltonian: alpha must be positive");
    if (!(truncation > 0.0)) throw ContractError("quadratic hamiltonian: truncation must be positive");
}

double QuadraticHamiltonian::axis_cost(int, std::size_t, int, double v) const { return 0.5 * alpha_ * v * v; }

double QuadraticHamiltonian::axis_control(int, std::size_t, int, double p) const {
    return std::clamp(-p / alpha_, -truncation(), truncation());
}

bool QuadraticHamiltonian::minimize_linear(int t, std::size_t x, std::span<const double> slope, double bound,
                                           std::span<double> out) const {
    // Box-truncated costs only coincide with a ball constraint in one dimension.
    if (dim() != 1) return false;
    out[0] = std::clamp(axis_control(t, x, 0, slope[0]), -bound, bound);
    return true;
}

NumericHamiltonian::NumericHamiltonian(int dim, double truncation, AxisCost cost)
    : SeparableHamiltonian(dim, truncation), cost_(std::move(cost)) {
    if (!cost_) throw ContractError("numeric hamiltonian: cost function missing");
}

double NumericHamiltonian::axis_cost(int t, std::size_t x, int axis, double v) const { return cost_(t, x, axis, v); }

double NumericHamiltonian::axis_control(int t, std::size_t x, int axis, double p) const {
    // Golden-section search of the strictly concave map v -> -p v - l_i(v).
    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = -truncation();
    double hi = truncation();
    auto objective = [&](double v) { return -p * v - cost_(t, x, axis, v); };
    double a = hi - inv_phi * (hi - lo);
    double b = lo + inv_phi * (hi - lo);
    double fa = objective(a);
    double fb = objective(b);
    while (hi - lo > 1e-13 * truncation()) {
        if (fa < fb) {
            lo = a;
            a = b;
            fa = fb;
            b = lo + inv_phi * (hi - lo);
            fb = objective(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - inv_phi * (hi - lo);
            fa = objective(a);
        }
    }
    double best = 0.5 * (lo + hi);
    double best_value = objective(best);
    for (double edge : {-truncation(), truncation()}) {
        const double value = objective(edge);
        if (value > best_value) {
            best_value = value;
            best = edge;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Implicit heat solve

ImplicitHeatSolver::ImplicitHeatSolver(const Grid& grid, double coefficient) : grid_(grid) {
    if (!(coefficient >= 0.0)) throw ContractError("implicit heat solve: coefficient must be nonnegative");
    gamma_ = coefficient * grid.dt() / (grid.h() * grid.h());
    const std::size_t n = grid.num_points();
    if (grid.dim() != 1 || n < 3 || gamma_ == 0.0) return;

    // Sherman-Morrison reduction of the cyclic system to a tridiagonal one.
    const double a = -gamma_;
    const double b = 1.0 + 2.0 * gamma_;
    const double c = -gamma_;
    const double shift = -b;
    std::vector<double> main(n, b);
    main[0] = b - shift;
    main[n - 1] = b - a * c / shift;

    diag_.assign(n, 0.0);
    upper_.assign(n, 0.0);
    double bet = main[0];
    diag_[0] = 1.0 / bet;
    for (std::size_t j = 1; j < n; ++j) {
        upper_[j] = c * diag_[j - 1];
        bet = main[j] - a * upper_[j];
        diag_[j] = 1.0 / bet;
    }

    std::vector<double> u(n, 0.0);
    u[0] = shift;
    u[n - 1] = a;
    correction_.assign(n, 0.0);
    correction_[0] = u[0] * diag_[0];
    for (std::size_t j = 1; j < n; ++j) correction_[j] = (u[j] - a * correction_[j - 1]) * diag_[j];
    for (std::size_t j = n - 1; j-- > 0;) correction_[j] -= upper_[j + 1] * correction_[j + 1];
    corner_factor_ = 1.0 / (1.0 + correction_[0] + c * correction_[n - 1] / shift);
}

void ImplicitHeatSolver::solve(std::span<const double> rhs, std::span<double> out) const {
    const std::size_t n = grid_.num_points();
    if (rhs.size() != n || out.size() != n) throw ContractError("implicit heat solve: slice size mismatch");
    if (gamma_ == 0.0 || n == 1) {
        std::copy(rhs.begin(), rhs.end(), out.begin());
        return;
    }
    if (grid_.dim() == 1) {
        solve_direct(rhs, out);
    } else {
        solve_iterative(rhs, out);
    }
}

std::vector<double> ImplicitHeatSolver::solve(std::span<const double> rhs) const {
    std::vector<double> out(rhs.size());
    solve(rhs, out);
    return out;
}

void ImplicitHeatSolver::solve_direct(std::span<const double> rhs, std::span<double> out) const {
    const std::size_t n = grid_.num_points();
    if (n == 2) {
        // Both neighbours coincide: (1+2g) Y0 - 2g Y1 = X0 and symmetrically.
        const double g = gamma_;
        const double det = 1.0 + 4.0 * g;
        const double y0 = ((1.0 + 2.0 * g) * rhs[0] + 2.0 * g * rhs[1]) / det;
        const double y1 = ((1.0 + 2.0 * g) * rhs[1] + 2.0 * g * rhs[0]) / det;
        out[0] = y0;
        out[1] = y1;
        return;
    }
    const double a = -gamma_;
    const double c = -gamma_;
    const double shift = -(1.0 + 2.0 * gamma_);
    out[0] = rhs[0] * diag_[0];
    for (std::size_t j = 1; j < n; ++j) out[j] = (rhs[j] - a * out[j - 1]) * diag_[j];
    for (std::size_t j = n - 1; j-- > 0;) out[j] -= upper_[j + 1] * out[j + 1];
    const double fact = (out[0] + c * out[n - 1] / shift) * corner_factor_;
    for (std::size_t j = 0; j < n; ++j) out[j] -= fact * correction_[j];
}

void ImplicitHeatSolver::solve_iterative(std::span<const double> rhs, std::span<double> out) const {
    const std::size_t n = grid_.num_points();
    const int d = grid_.dim();
    const double denom = 1.0 + 2.0 * d * gamma_;
    const auto cap = static_cast<long long>(std::ceil(100.0 * denom));
    double scale = 0.0;
    for (double v : rhs) scale = std::max(scale, std::abs(v));
    if (scale == 0.0) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    std::vector<double> current(rhs.begin(), rhs.end());
    std::vector<double> next(n);
    for (long long it = 0; it < cap; ++it) {
        double change = 0.0;
        for (std::size_t x = 0; x < n; ++x) {
            double acc = 0.0;
            for (int i = 0; i < d; ++i) acc += current[grid_.neighbor(x, i, 1)] + current[grid_.neighbor(x, i, -1)];
            next[x] = (rhs[x] + gamma_ * acc) / denom;
            change = std::max(change, std::abs(next[x] - current[x]));
        }
        current.swap(next);
        // Stop at the rounding floor of the update.
        if (change <= 4.0 * std::numeric_limits<double>::epsilon() * scale) {
            std::copy(current.begin(), current.end(), out.begin());
            return;
        }
    }
    throw ConvergenceError("implicit heat solve: contraction iteration did not converge within " +
                           std::to_string(cap) + " sweeps");
}

std::vector<double> implicit_heat_solve(std::span<const double> rhs, double coefficient, const Grid& grid) {
    return ImplicitHeatSolver(grid, coefficient).solve(rhs);
}

// ---------------------------------------------------------------------------
// Theta-scheme maps

ThetaProblem make_theta_problem(const ThetaConfig& config, std::shared_ptr<const SeparableHamiltonian> hamiltonian,
                                std::shared_ptr<const Coupling> coupling, std::vector<double> terminal,
                                std::vector<double> initial, double coupling_lipschitz) {
    ThetaProblem p;
    p.config = config;
    p.hamiltonian = std::move(hamiltonian);
    p.base.steps = config.grid.time_steps();
    p.base.states = config.grid.num_points();
    p.base.dim = config.grid.dim();
    p.base.dt = config.grid.dt();
    p.base.running = p.hamiltonian;
    p.base.coupling = std::move(coupling);
    p.base.terminal = std::move(terminal);
    p.base.initial = std::move(initial);
    p.base.coupling_lipschitz = coupling_lipschitz;
    return p;
}

namespace {

void check_theta(const ThetaProblem& problem) {
    require_time_step_cfl(problem.config);
    validate(problem.base);
    if (!problem.hamiltonian) throw ContractError("theta problem: hamiltonian missing");
    if (problem.hamiltonian->dim() != problem.config.grid.dim()) {
        throw ContractError("theta problem: hamiltonian dimension does not match the grid");
    }
    if (std::abs(problem.hamiltonian->truncation() - problem.config.truncation) >
        1e-12 * problem.config.truncation) {
        throw ContractError("theta problem: hamiltonian truncation differs from the configured M");
    }
}

}  // namespace

HjbThetaResult hjb_theta(const ThetaProblem& problem, const ScalarField& m) {
    check_theta(problem);
    const Grid& grid = problem.config.grid;
    const auto steps = static_cast<std::size_t>(grid.time_steps());
    const std::size_t n = grid.num_points();
    const auto d = static_cast<std::size_t>(grid.dim());
    if (m.num_times() != steps + 1 || m.num_points() != n) throw ContractError("hjb_theta: curve has wrong shape");

    const double dt = grid.dt();
    const double explicit_diffusion = (1.0 - problem.config.theta) * problem.config.sigma * dt;
    const ImplicitHeatSolver implicit(grid, problem.config.theta * problem.config.sigma);
    const SeparableHamiltonian& ham = *problem.hamiltonian;

    HjbThetaResult out{ScalarField(steps + 1, n), VectorField(steps, n, grid.dim()), ScalarField(steps, n)};
    std::copy(problem.base.terminal.begin(), problem.base.terminal.end(), out.u.slice(steps).begin());
    std::vector<double> half(n), lap(n), coupling(n);
    for (std::size_t t = steps; t-- > 0;) {
        implicit.solve(out.u.slice(t + 1), half);
        laplacian_h(half, grid, lap);
        auto grad = out.gradients.slice(t);
        gradient_h(half, grid, grad);
        problem.base.coupling->apply(static_cast<int>(t), m.slice(t), coupling);
        auto u_now = out.u.slice(t);
        for (std::size_t x = 0; x < n; ++x) {
            const double hval = ham.hamiltonian(static_cast<int>(t), x, grad.subspan(x * d, d));
            out.hamiltonian(t, x) = hval;
            u_now[x] = half[x] + explicit_diffusion * lap[x] + dt * (coupling[x] - hval);
        }
    }
    return out;
}

VectorField v_theta(const ThetaProblem& problem, const VectorField& gradients) {
    const Grid& grid = problem.config.grid;
    const std::size_t n = grid.num_points();
    const auto d = static_cast<std::size_t>(grid.dim());
    if (gradients.num_times() != static_cast<std::size_t>(grid.time_steps()) || gradients.num_points() != n ||
        gradients.dim() != grid.dim()) {
        throw ContractError("v_theta: gradient field has wrong shape");
    }
    VectorField v(gradients.num_times(), n, grid.dim());
    for (std::size_t t = 0; t < gradients.num_times(); ++t) {
        const auto grad = gradients.slice(t);
        auto out = v.slice(t);
        for (std::size_t x = 0; x < n; ++x) {
            problem.hamiltonian->optimal_control(static_cast<int>(t), x, grad.subspan(x * d, d), out.subspan(x * d, d));
        }
    }
    return v;
}

ScalarField fp_theta(const ThetaProblem& problem, const VectorField& v) {
    check_theta(problem);
    const Grid& grid = problem.config.grid;
    const auto steps = static_cast<std::size_t>(grid.time_steps());
    const std::size_t n = grid.num_points();
    const auto d = static_cast<std::size_t>(grid.dim());
    if (v.num_times() != steps || v.num_points() != n || v.dim() != grid.dim()) {
        throw ContractError("fp_theta: control field has wrong shape");
    }
    const double bound = problem.config.truncation * (1.0 + kBoundSlack);
    for (double c : v.values()) {
        if (std::abs(c) > bound) throw ContractError("fp_theta: control exceeds the truncation radius M");
    }
    const double dt = grid.dt();
    const double explicit_diffusion = (1.0 - problem.config.theta) * problem.config.sigma * dt;
    const ImplicitHeatSolver implicit(grid, problem.config.theta * problem.config.sigma);

    ScalarField m(steps + 1, n);
    std::copy(problem.base.initial.begin(), problem.base.initial.end(), m.slice(0).begin());
    std::vector<double> flux(n * d), div(n), lap(n), half(n);
    for (std::size_t t = 0; t < steps; ++t) {
        const auto now = m.slice(t);
        const auto vt = v.slice(t);
        for (std::size_t x = 0; x < n; ++x) {
            for (std::size_t i = 0; i < d; ++i) flux[x * d + i] = vt[x * d + i] * now[x];
        }
        divergence_h(flux, grid, div);
        laplacian_h(now, grid, lap);
        for (std::size_t x = 0; x < n; ++x) half[x] = now[x] + explicit_diffusion * lap[x] - dt * div[x];
        implicit.solve(half, m.slice(t + 1));
    }
    return m;
}

BestResponse best_response(const ThetaProblem& problem, const ScalarField& m_prime) {
    HjbThetaResult hjb = hjb_theta(problem, m_prime);
    BestResponse br;
    br.v = v_theta(problem, hjb.gradients);
    br.m = fp_theta(problem, br.v);
    br.w = VectorField(br.v.num_times(), br.v.num_points(), br.v.dim());
    const auto d = static_cast<std::size_t>(br.v.dim());
    for (std::size_t t = 0; t < br.v.num_times(); ++t) {
        for (std::size_t x = 0; x < br.v.num_points(); ++x) {
            const double mass = br.m(t, x);
            for (std::size_t i = 0; i < d; ++i) br.w.at(t, x)[i] = mass * br.v.at(t, x)[i];
        }
    }
    br.u = std::move(hjb.u);
    br.slope = std::move(hjb.gradients);
    br.hamiltonian = std::move(hjb.hamiltonian);
    return br;
}

ThetaScheme::ThetaScheme(ThetaProblem problem) : problem_(std::move(problem)) { check_theta(problem_); }

BestResponse ThetaScheme::best_response(const ScalarField& m_prime) const {
    return mfgfw::best_response(problem_, m_prime);
}

// ---------------------------------------------------------------------------
// Kernel form

Kernel theta_kernel(const ThetaConfig& config, int steps) {
    validate(config);
    if (steps < 0) throw ContractError("theta_kernel: negative step count");
    if (steps == 0) steps = config.grid.time_steps();
    const Grid& grid = config.grid;
    const std::size_t n = grid.num_points();
    const auto d = static_cast<std::size_t>(grid.dim());
    const ImplicitHeatSolver implicit(grid, config.theta * config.sigma);

    // inverse(z, y) = (Id - theta sigma dt Lap_h)^{-1} e_y evaluated at z.
    std::vector<double> inverse(n * n);
    std::vector<double> unit(n, 0.0), column(n);
    for (std::size_t y = 0; y < n; ++y) {
        unit[y] = 1.0;
        implicit.solve(unit, column);
        unit[y] = 0.0;
        for (std::size_t z = 0; z < n; ++z) inverse[z * n + y] = column[z];
    }
    const double r = (1.0 - config.theta) * config.sigma * grid.dt() / (grid.h() * grid.h());
    Kernel kernel(steps, n, grid.dim(), grid.dt());
    for (std::size_t x = 0; x < n; ++x) {
        for (std::size_t y = 0; y < n; ++y) {
            double p0 = (1.0 - 2.0 * static_cast<double>(d) * r) * inverse[x * n + y];
            std::vector<double> p1(d);
            for (int i = 0; i < grid.dim(); ++i) {
                const std::size_t xp = grid.neighbor(x, i, 1);
                const std::size_t xm = grid.neighbor(x, i, -1);
                p0 += r * (inverse[xp * n + y] + inverse[xm * n + y]);
                p1[static_cast<std::size_t>(i)] = (inverse[xp * n + y] - inverse[xm * n + y]) / (2.0 * grid.h());
            }
            for (int t = 0; t < steps; ++t) {
                kernel.pi0(t, x, y) = p0;
                std::copy(p1.begin(), p1.end(), kernel.pi1(t, x, y).begin());
            }
        }
    }
    return kernel;
}

// ---------------------------------------------------------------------------
// Functionals and data projection

double lipschitz_functional(std::span<const double> values, const Grid& grid) {
    double best = -kInfinity;
    for_each_shift(grid, [&](std::size_t, std::span<const int> shift) {
        const double len = shift_norm(shift, grid);
        for (std::size_t x = 0; x < grid.num_points(); ++x) {
            std::vector<int> mi = grid.multi_index(x);
            for (std::size_t i = 0; i < mi.size(); ++i) mi[i] += shift[i];
            const std::size_t xy = grid.flat_index(mi);
            best = std::max(best, (values[xy] - values[x]) / len);
        }
    });
    return best;
}

double semiconcavity_functional(std::span<const double> values, const Grid& grid) {
    double best = -kInfinity;
    for_each_shift(grid, [&](std::size_t, std::span<const int> shift) {
        const double len = shift_norm(shift, grid);
        for (std::size_t x = 0; x < grid.num_points(); ++x) {
            std::vector<int> plus = grid.multi_index(x);
            std::vector<int> minus = plus;
            for (std::size_t i = 0; i < plus.size(); ++i) {
                plus[i] += shift[i];
                minus[i] -= shift[i];
            }
            const double second = values[grid.flat_index(plus)] + values[grid.flat_index(minus)] - 2.0 * values[x];
            best = std::max(best, second / (len * len));
        }
    });
    return best;
}

std::vector<double> cell_integrals(const std::function<double(std::span<const double>)>& fn, const Grid& grid,
                                   int order) {
    if (order < 1) throw ContractError("quadrature order must be at least 1");
    const auto d = static_cast<std::size_t>(grid.dim());
    const double h = grid.h();
    const double sub = h / order;
    std::size_t subcells = 1;
    for (std::size_t i = 0; i < d; ++i) subcells *= static_cast<std::size_t>(order);
    const double weight = std::pow(sub, static_cast<double>(d));

    std::vector<double> out(grid.num_points());
    std::vector<double> point(d);
    for (std::size_t x = 0; x < grid.num_points(); ++x) {
        const std::vector<int> mi = grid.multi_index(x);
        double acc = 0.0;
        for (std::size_t s = 0; s < subcells; ++s) {
            std::size_t rest = s;
            for (std::size_t i = d; i-- > 0;) {
                const auto j = static_cast<double>(rest % static_cast<std::size_t>(order));
                rest /= static_cast<std::size_t>(order);
                double p = static_cast<double>(mi[i]) * h - 0.5 * h + (j + 0.5) * sub;
                p -= std::floor(p);
                point[i] = p;
            }
            acc += fn(point);
        }
        out[x] = acc * weight;
    }
    return out;
}

std::vector<double> cell_averages(const std::function<double(std::span<const double>)>& fn, const Grid& grid,
                                  int order) {
    std::vector<double> out = cell_integrals(fn, grid, order);
    const double volume = std::pow(grid.h(), static_cast<double>(grid.dim()));
    for (double& v : out) v /= volume;
    return out;
}

DiscretizedData discretize_data(const ContinuousData& data, const Grid& grid, int order) {
    if (!data.terminal || !data.initial_density) throw ContractError("discretize_data: terminal and initial data required");
    DiscretizedData out;
    const auto d = static_cast<std::size_t>(grid.dim());
    out.terminal.resize(grid.num_points());
    std::vector<double> point(d);
    for (std::size_t x = 0; x < grid.num_points(); ++x) {
        for (std::size_t i = 0; i < d; ++i) point[i] = grid.coordinate(x, static_cast<int>(i));
        out.terminal[x] = data.terminal(point);
    }
    out.initial = cell_integrals(data.initial_density, grid, order);
    double mass = 0.0;
    for (double v : out.initial) mass += v;
    out.initial_raw_mass = mass;
    if (!(mass > 0.0)) throw ContractError("discretize_data: initial density has nonpositive total mass");
    for (double& v : out.initial) v /= mass;
    if (data.congestion_profile) out.congestion_profile = cell_averages(data.congestion_profile, grid, order);
    return out;
}

}  // namespace mfgfw
