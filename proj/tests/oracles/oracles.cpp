#include "oracles/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace oracle {

using mfgfw::Grid;

Matrix identity(std::size_t n) {
    Matrix a(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) a[i][i] = 1.0;
    return a;
}

Matrix multiply(const Matrix& a, const Matrix& b) {
    const std::size_t n = a.size();
    const std::size_t m = b.front().size();
    Matrix c(n, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < b.size(); ++k)
            for (std::size_t j = 0; j < m; ++j) c[i][j] += a[i][k] * b[k][j];
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.front().size(), std::vector<double>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a[i].size(); ++j) t[j][i] = a[i][j];
    return t;
}

std::vector<double> apply(const Matrix& a, const std::vector<double>& x) {
    std::vector<double> y(a.size(), 0.0);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) y[i] += a[i][j] * x[j];
    return y;
}

std::vector<double> dense_solve(Matrix a, std::vector<double> b) {
    const std::size_t n = a.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= factor * a[col][c];
            b[r] -= factor * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double acc = b[i];
        for (std::size_t c = i + 1; c < n; ++c) acc -= a[i][c] * x[c];
        x[i] = acc / a[i][i];
    }
    return x;
}

Matrix laplacian_matrix(const Grid& grid) {
    const std::size_t n = grid.num_points();
    Matrix a(n, std::vector<double>(n, 0.0));
    const double inv = 1.0 / (grid.h() * grid.h());
    for (std::size_t x = 0; x < n; ++x) {
        for (int i = 0; i < grid.dim(); ++i) {
            a[x][grid.neighbor(x, i, 1)] += inv;
            a[x][grid.neighbor(x, i, -1)] += inv;
            a[x][x] -= 2.0 * inv;
        }
    }
    return a;
}

Matrix gradient_matrix(const Grid& grid, int axis) {
    const std::size_t n = grid.num_points();
    Matrix a(n, std::vector<double>(n, 0.0));
    const double inv = 1.0 / (2.0 * grid.h());
    for (std::size_t x = 0; x < n; ++x) {
        a[x][grid.neighbor(x, axis, 1)] += inv;
        a[x][grid.neighbor(x, axis, -1)] -= inv;
    }
    return a;
}

Matrix divergence_matrix(const Grid& grid, int axis) { return gradient_matrix(grid, axis); }

std::vector<double> dense_implicit_solve(const std::vector<double>& x, double c, const Grid& grid) {
    Matrix a = laplacian_matrix(grid);
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < a.size(); ++j) a[i][j] *= -c * grid.dt();
        a[i][i] += 1.0;
    }
    return dense_solve(a, x);
}

Matrix explicit_fp_matrix(const mfgfw::ThetaConfig& config, const std::vector<double>& v) {
    const Grid& grid = config.grid;
    const std::size_t n = grid.num_points();
    const double r = (1.0 - config.theta) * config.sigma * grid.dt();
    Matrix lap = laplacian_matrix(grid);
    Matrix div = divergence_matrix(grid, 0);
    Matrix out = identity(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i][j] += r * lap[i][j] - grid.dt() * div[i][j] * v[j];
    return out;
}

Matrix explicit_hjb_matrix(const mfgfw::ThetaConfig& config, const std::vector<double>& v) {
    const Grid& grid = config.grid;
    const std::size_t n = grid.num_points();
    const double r = (1.0 - config.theta) * config.sigma * grid.dt();
    Matrix lap = laplacian_matrix(grid);
    Matrix grad = gradient_matrix(grid, 0);
    Matrix out = identity(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i][j] += r * lap[i][j] + grid.dt() * v[i] * grad[i][j];
    return out;
}

std::vector<double> random_law(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> dist(0.05, 1.0);
    std::vector<double> out(n);
    double sum = 0.0;
    for (double& v : out) {
        v = dist(rng);
        sum += v;
    }
    for (double& v : out) v /= sum;
    return out;
}

mfgfw::KernelProblem tiny_instance(std::uint64_t seed, double bound, double coupling_scale) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int steps = 3;
    const std::size_t states = 3;
    const double dt = 1.0 / steps;
    mfgfw::Kernel kernel(steps, states, 1, dt);
    for (int t = 0; t < steps; ++t) {
        for (std::size_t x = 0; x < states; ++x) {
            const std::vector<double> row = random_law(rng, states);
            std::vector<double> raw(states);
            double mean = 0.0;
            for (auto& r : raw) {
                r = unit(rng) - 0.5;
                mean += r / states;
            }
            double scale = std::numeric_limits<double>::infinity();
            for (std::size_t y = 0; y < states; ++y) {
                raw[y] -= mean;
                if (raw[y] != 0.0) scale = std::min(scale, 0.9 * row[y] / (dt * bound * std::abs(raw[y])));
            }
            for (std::size_t y = 0; y < states; ++y) {
                kernel.pi0(t, x, y) = row[y];
                kernel.pi1(t, x, y)[0] = raw[y] * scale;
            }
        }
    }
    std::vector<double> b(states * states);
    for (auto& e : b) e = unit(rng) - 0.5;
    std::vector<double> k(states * states, 0.0);
    for (std::size_t i = 0; i < states; ++i)
        for (std::size_t j = 0; j < states; ++j)
            for (std::size_t l = 0; l < states; ++l) k[i * states + j] += coupling_scale * b[l * states + i] * b[l * states + j];
    auto coupling = std::make_shared<mfgfw::QuadraticCoupling>(states, k);

    mfgfw::PotentialProblem base;
    base.steps = steps;
    base.states = states;
    base.dim = 1;
    base.dt = dt;
    base.running = std::make_shared<mfgfw::QuadraticRunningCost>(1.0, bound);
    base.coupling = coupling;
    base.terminal.resize(states);
    for (auto& g : base.terminal) g = unit(rng);
    base.initial = random_law(rng, states);
    base.coupling_lipschitz = coupling->lipschitz();
    return mfgfw::KernelProblem{base, kernel, bound, 1.0, mfgfw::ControlSearch{}};
}

OracleResponse grid_search_best_response(const mfgfw::KernelProblem& problem, const mfgfw::ScalarField& m_prime,
                                         double resolution) {
    const auto& base = problem.base;
    const auto steps = static_cast<std::size_t>(base.steps);
    const std::size_t n = base.states;
    const double bound = problem.control_bound;
    const auto count = static_cast<long long>(std::floor(bound / resolution + 1e-9));
    OracleResponse out{mfgfw::ScalarField(steps + 1, n), mfgfw::VectorField(steps, n, 1), {}};
    for (std::size_t x = 0; x < n; ++x) out.u(steps, x) = base.terminal[x];
    for (std::size_t t = steps; t-- > 0;) {
        const auto f = base.coupling->apply(static_cast<int>(t), m_prime.slice(t));
        for (std::size_t x = 0; x < n; ++x) {
            double best = std::numeric_limits<double>::infinity();
            double arg = 0.0;
            for (long long i = -count; i <= count; ++i) {
                const double w = static_cast<double>(i) * resolution;
                double next = 0.0;
                for (std::size_t y = 0; y < n; ++y) {
                    const double p = problem.kernel.pi0(static_cast<int>(t), x, y) +
                                     base.dt * problem.kernel.pi1(static_cast<int>(t), x, y)[0] * w;
                    next += p * out.u(t + 1, y);
                }
                const double control[1] = {w};
                const double value = base.dt * (base.running->value(static_cast<int>(t), x, control) + f[x]) + next;
                if (value < best) {
                    best = value;
                    arg = w;
                }
            }
            out.u(t, x) = best;
            out.v.at(t, x)[0] = arg;
        }
    }
    out.m = kernel_forward(problem, out.v);
    return out;
}

mfgfw::ScalarField kernel_forward(const mfgfw::KernelProblem& problem, const mfgfw::VectorField& v) {
    const auto steps = static_cast<std::size_t>(problem.base.steps);
    const std::size_t n = problem.base.states;
    mfgfw::ScalarField m(steps + 1, n);
    for (std::size_t x = 0; x < n; ++x) m(0, x) = problem.base.initial[x];
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t x = 0; x < n; ++x) {
            for (std::size_t y = 0; y < n; ++y) {
                double p = problem.kernel.pi0(static_cast<int>(t), x, y);
                const auto p1 = problem.kernel.pi1(static_cast<int>(t), x, y);
                for (std::size_t i = 0; i < p1.size(); ++i) p += problem.base.dt * p1[i] * v.at(t, x)[i];
                m(t + 1, y) += m(t, x) * p;
            }
        }
    }
    return m;
}

mfgfw::FlowPair random_feasible_pair(const mfgfw::KernelProblem& problem, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-problem.control_bound, problem.control_bound);
    mfgfw::VectorField v(static_cast<std::size_t>(problem.base.steps), problem.base.states, 1);
    for (double& c : v.values()) c = dist(rng);
    return mfgfw::chi_transform(kernel_forward(problem, v), v);
}

double simpson(const std::function<double(double)>& fn, int intervals) {
    if (intervals % 2) ++intervals;
    const double h = 1.0 / intervals;
    double acc = fn(0.0) + fn(1.0);
    for (int i = 1; i < intervals; ++i) acc += (i % 2 ? 4.0 : 2.0) * fn(i * h);
    return acc * h / 3.0;
}

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need matching samples");
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

}  // namespace oracle
