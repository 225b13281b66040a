#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include "mfgfw/bench1d.hpp"
#include "mfgfw/errors.hpp"
#include "mfgfw/theta_scheme.hpp"
#include "oracles/oracles.hpp"

using namespace mfgfw;

namespace {

std::vector<double> random_slice(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> out(n);
    for (auto& v : out) v = dist(rng);
    return out;
}

ThetaConfig config_for(int d, int n, int steps, double truncation = 1.0) {
    ThetaConfig c;
    c.theta = 0.8;
    c.sigma = 0.02;
    c.truncation = truncation;
    c.grid = Grid(d, n, steps);
    return c;
}

ThetaProblem simple_problem(const ThetaConfig& config, std::vector<double> terminal, std::vector<double> initial,
                            std::shared_ptr<const Coupling> coupling = std::make_shared<ZeroCoupling>()) {
    auto ham = std::make_shared<QuadraticHamiltonian>(config.grid.dim(), 1.0, config.truncation);
    return make_theta_problem(config, ham, std::move(coupling), std::move(terminal), std::move(initial), 0.0);
}

std::vector<double> uniform(std::size_t n) { return std::vector<double>(n, 1.0 / static_cast<double>(n)); }

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    double out = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) out = std::max(out, std::abs(a[i] - b[i]));
    return out;
}

}  // namespace

TEST(ThetaConfigCheck, RejectsOutOfRangeValues) {
    ThetaConfig c = config_for(1, 10, 10);
    EXPECT_NO_THROW(validate(c));
    c.theta = 0.4;
    EXPECT_THROW(validate(c), ConfigError);
    c.theta = 1.0;
    EXPECT_THROW(validate(c), ConfigError);
    c = config_for(1, 10, 10);
    c.sigma = 0.0;
    EXPECT_THROW(validate(c), ConfigError);
    c = config_for(1, 10, 10);
    c.truncation = -1.0;
    EXPECT_THROW(validate(c), ConfigError);
}

TEST(Cfl, MaxTimeStepValues) {
    EXPECT_NEAR(cfl_check(config_for(1, 300, 720)).max_dt, 1.0 / 720.0, 1e-18);
    EXPECT_TRUE(cfl_check(config_for(1, 300, 720)).time_step_ok);
    EXPECT_NEAR(cfl_check(config_for(1, 100, 80)).max_dt, 1.0 / 80.0, 1e-16);
    ThetaConfig low = config_for(1, 100, 80);
    low.theta = 0.5 + 1e-12;
    ThetaConfig mid = config_for(1, 100, 80);
    mid.theta = 0.75;
    EXPECT_NEAR(cfl_check(mid).max_dt / cfl_check(low).max_dt, 2.0, 1e-9);
    EXPECT_LT(cfl_check(low).max_dt, cfl_check(config_for(1, 100, 80)).max_dt);
}

TEST(Cfl, MeshConditionAndVelocityThreshold) {
    const CflReport r = cfl_check(config_for(1, 100, 80, 10.0));
    EXPECT_NEAR(r.max_h, 0.0008, 1e-15);
    EXPECT_FALSE(r.mesh_ok);
    EXPECT_NEAR(r.velocity_threshold, 0.8, 1e-14);
    EXPECT_TRUE(cfl_check(config_for(1, 100, 80, 0.8)).mesh_ok);
}

TEST(Cfl, EnforcementQuotesMaxDt) {
    try {
        require_time_step_cfl(config_for(1, 100, 40));
        FAIL() << "expected a CFL error";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("max_dt"), std::string::npos);
    }
    EXPECT_NO_THROW(require_time_step_cfl(config_for(1, 100, 80)));
}

TEST(ImplicitSolve, ConstantAndZeroCoefficient) {
    std::mt19937_64 rng(1);
    const Grid g(1, 9, 10);
    const std::vector<double> c(9, 2.5);
    for (double v : implicit_heat_solve(c, 3.0, g)) EXPECT_NEAR(v, 2.5, 1e-14);
    const auto x = random_slice(rng, 9);
    EXPECT_EQ(implicit_heat_solve(x, 0.0, g), x);
    EXPECT_THROW(ImplicitHeatSolver(g, -1.0), ContractError);
}

TEST(ImplicitSolve, TwoPointHandSolution) {
    const Grid g(1, 2, 4);  // c dt / h^2 = 1 with c = 1
    const ImplicitHeatSolver solver(g, 1.0);
    EXPECT_DOUBLE_EQ(solver.gamma(), 1.0);
    const std::vector<double> x = {1.0, 0.0};
    const auto y = solver.solve(x);
    EXPECT_NEAR(y[0], 0.6, 1e-15);
    EXPECT_NEAR(y[1], 0.4, 1e-15);
}

TEST(ImplicitSolve, SinglePointIsIdentity) {
    const Grid g(1, 1, 4);
    const std::vector<double> x = {0.7};
    EXPECT_DOUBLE_EQ(implicit_heat_solve(x, 1.0, g)[0], 0.7);
}

TEST(ImplicitSolve, MatchesDenseSolve) {
    std::mt19937_64 rng(2);
    const std::pair<int, int> cases[] = {{1, 3}, {1, 7}, {1, 16}, {1, 64}, {2, 5}, {2, 8}};
    for (const auto& [d, n] : cases) {
        const Grid g(d, n, 10);
        for (double c : {0.016, 1.0, 25.0}) {
            const auto x = random_slice(rng, g.num_points());
            const auto y = implicit_heat_solve(x, c, g);
            const auto ref = oracle::dense_implicit_solve(x, c, g);
            EXPECT_LE(max_abs_diff(y, ref), 1e-11) << "d=" << d << " N=" << n << " c=" << c;
            const auto lap = laplacian_h(y, g);
            double residual = 0.0;
            double scale = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                residual = std::max(residual, std::abs(y[i] - c * g.dt() * lap[i] - x[i]));
                scale = std::max(scale, std::abs(x[i]));
            }
            EXPECT_LE(residual, 1e-12 * scale * std::max(1.0, 4.0 * d * c * g.dt() / (g.h() * g.h())));
        }
    }
}

TEST(ImplicitSolve, PreservesMassBoundsAndFunctionals) {
    std::mt19937_64 rng(3);
    const Grid g(1, 32, 80);
    const ImplicitHeatSolver solver(g, 0.016);
    for (int i = 0; i < 50; ++i) {
        const auto x = random_slice(rng, 32);
        const auto y = solver.solve(x);
        double sx = 0.0, sy = 0.0;
        for (std::size_t k = 0; k < 32; ++k) {
            sx += x[k];
            sy += y[k];
        }
        EXPECT_NEAR(sy, sx, 1e-12);
        EXPECT_GE(*std::min_element(y.begin(), y.end()), *std::min_element(x.begin(), x.end()) - 1e-12);
        EXPECT_LE(*std::max_element(y.begin(), y.end()), *std::max_element(x.begin(), x.end()) + 1e-12);
        EXPECT_LE(lipschitz_functional(y, g), lipschitz_functional(x, g) + 1e-10);
        EXPECT_LE(semiconcavity_functional(y, g), semiconcavity_functional(x, g) + 1e-10);
    }
}

TEST(ImplicitSolve, TwoDimensionalPreservation) {
    std::mt19937_64 rng(4);
    const Grid g(2, 6, 10);
    const auto x = random_slice(rng, g.num_points(), 0.0, 1.0);
    const auto y = implicit_heat_solve(x, 0.5, g);
    double sx = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sx += x[k];
        sy += y[k];
    }
    EXPECT_NEAR(sx, sy, 1e-12);
    EXPECT_LE(lipschitz_functional(y, g), lipschitz_functional(x, g) + 1e-10);
}

TEST(Functionals, HandValues) {
    const Grid g(1, 4, 1);
    const std::vector<double> mu = {0, 1, 0, 0};
    EXPECT_DOUBLE_EQ(lipschitz_functional(mu, g), 4.0);
    EXPECT_DOUBLE_EQ(semiconcavity_functional(mu, g), 16.0);
    const std::vector<double> flat(4, 1.0);
    EXPECT_DOUBLE_EQ(lipschitz_functional(flat, g), 0.0);
}

TEST(Hamiltonian, QuadraticClosedForms) {
    const QuadraticHamiltonian ham(1, 1.0, 2.0);
    const double one[] = {1.0};
    const double big[] = {4.0};
    double v[1];
    ham.optimal_control(0, 0, one, v);
    EXPECT_DOUBLE_EQ(v[0], -1.0);
    EXPECT_DOUBLE_EQ(ham.hamiltonian(0, 0, one), 0.5);
    ham.optimal_control(0, 0, big, v);
    EXPECT_DOUBLE_EQ(v[0], -2.0);
    EXPECT_DOUBLE_EQ(ham.hamiltonian(0, 0, big), 6.0);
    const double outside[] = {2.5};
    EXPECT_EQ(ham.value(0, 0, outside), kInfinity);
}

TEST(Hamiltonian, NumericMatchesQuadratic) {
    const QuadraticHamiltonian exact(2, 2.0, 1.5);
    const NumericHamiltonian numeric(2, 1.5, [](int, std::size_t, int, double v) { return v * v; });
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        const auto p = random_slice(rng, 2, -5.0, 5.0);
        EXPECT_NEAR(numeric.hamiltonian(0, 0, p), exact.hamiltonian(0, 0, p), 1e-10);
        double a[2], b[2];
        numeric.optimal_control(0, 0, p, a);
        exact.optimal_control(0, 0, p, b);
        EXPECT_NEAR(a[0], b[0], 1e-7);
        EXPECT_NEAR(a[1], b[1], 1e-7);
    }
}

TEST(Hamiltonian, MonotoneDerivative) {
    const QuadraticHamiltonian ham(1, 1.0, 1.0);
    double prev = kInfinity;
    for (double p = -3.0; p <= 3.0; p += 0.1) {
        const double v = ham.axis_control(0, 0, 0, p);
        EXPECT_LE(v, prev);  // H_p = -v nondecreasing
        prev = v;
    }
}

TEST(VTheta, ExamplesFromGradients) {
    const ThetaConfig c = config_for(1, 4, 1, 3.0);
    const ThetaProblem p = simple_problem(c, std::vector<double>(4, 0.0), uniform(4));
    VectorField grad(1, 4, 1);
    grad.at(0, 1)[0] = 1.0;
    grad.at(0, 2)[0] = 6.0;
    grad.at(0, 3)[0] = -6.0;
    const VectorField v = v_theta(p, grad);
    EXPECT_DOUBLE_EQ(v.at(0, 0)[0], 0.0);
    EXPECT_DOUBLE_EQ(v.at(0, 1)[0], -1.0);
    EXPECT_DOUBLE_EQ(v.at(0, 2)[0], -3.0);
    EXPECT_DOUBLE_EQ(v.at(0, 3)[0], 3.0);
}

TEST(HjbTheta, ConstantTerminalStaysConstant) {
    const ThetaConfig c = config_for(1, 20, 8);
    const ThetaProblem p = simple_problem(c, std::vector<double>(20, 1.7), uniform(20));
    const auto r = hjb_theta(p, ScalarField(9, 20, 0.05));
    for (double v : r.u.values()) EXPECT_NEAR(v, 1.7, 1e-13);
    for (double v : r.gradients.values()) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(HjbTheta, OneStepMatchesKernelDynamicProgramming) {
    std::mt19937_64 rng(6);
    const ThetaConfig c = config_for(1, 10, 1, 0.5);
    const auto g = random_slice(rng, 10, 0.0, 0.02);
    const auto m0 = uniform(10);
    const auto coupling = std::make_shared<RankOneCoupling>(random_slice(rng, 10, 0.0, 1.0), 1.0);
    const ThetaProblem tp = simple_problem(c, g, m0, coupling);
    const ScalarField m(2, 10, 0.1);
    const auto hjb = hjb_theta(tp, m);

    KernelProblem kp{tp.base, theta_kernel(c), 0.5, 1.0, ControlSearch{1e-4, true}};
    kp.base.running = std::make_shared<QuadraticRunningCost>(1.0, 0.5);
    const ScalarField uk = hjb_solve(kp, m);
    for (std::size_t x = 0; x < 10; ++x) EXPECT_NEAR(uk(0, x), hjb.u(0, x), 1e-9);
}

TEST(ThetaKernel, ValidityWithEffectiveBound) {
    const ThetaConfig c = config_for(1, 12, 58, 10.0);
    const Kernel k = theta_kernel(c, 2);
    const double threshold = cfl_check(c).velocity_threshold;
    EXPECT_TRUE(check_kernel(k, std::min(c.truncation, threshold)).ok());
    EXPECT_FALSE(check_kernel(k, 10.0 * threshold).dominated);
}

TEST(ThetaKernel, BestResponseMatchesThetaScheme) {
    std::mt19937_64 rng(7);
    const int n = 8;
    const int steps = 6;
    const ThetaConfig c = config_for(1, n, steps, 0.05);
    ASSERT_TRUE(cfl_check(c).time_step_ok);
    const auto g = random_slice(rng, n, 0.0, 0.05);
    const auto m0 = oracle::random_law(rng, n);
    const ThetaProblem tp = simple_problem(c, g, m0);
    KernelProblem kp{tp.base, theta_kernel(c), std::min(c.truncation, cfl_check(c).velocity_threshold), 1.0, {}};
    kp.base.running = std::make_shared<QuadraticRunningCost>(1.0, kp.control_bound);
    ASSERT_NO_THROW(validate(kp));

    ScalarField mp(steps + 1, n);
    for (double& v : mp.values()) v = 1.0 / n;
    const BestResponse a = best_response(tp, mp);
    const BestResponse b = best_response(kp, mp);
    EXPECT_LE(max_abs_diff(a.u.values(), b.u.values()), 1e-12);
    EXPECT_LE(max_abs_diff(a.v.values(), b.v.values()), 1e-10);
    EXPECT_LE(max_abs_diff(a.m.values(), b.m.values()), 1e-12);
}

TEST(FpTheta, UniformIsInvariant) {
    const ThetaConfig c = config_for(1, 16, 10);
    const ThetaProblem p = simple_problem(c, std::vector<double>(16, 0.0), uniform(16));
    const ScalarField m = fp_theta(p, VectorField(10, 16, 1));
    for (double v : m.values()) EXPECT_NEAR(v, 1.0 / 16.0, 1e-15);
}

TEST(FpTheta, HeatDecayTowardUniform) {
    std::mt19937_64 rng(8);
    const ThetaConfig c = config_for(1, 20, 40);
    const ThetaProblem p = simple_problem(c, std::vector<double>(20, 0.0), oracle::random_law(rng, 20));
    const ScalarField m = fp_theta(p, VectorField(40, 20, 1));
    double prev = kInfinity;
    for (std::size_t t = 0; t <= 40; ++t) {
        double sum = 0.0, dist = 0.0;
        for (std::size_t x = 0; x < 20; ++x) {
            sum += m(t, x);
            dist += (m(t, x) - 0.05) * (m(t, x) - 0.05);
        }
        EXPECT_NEAR(sum, 1.0, 1e-14);
        EXPECT_LE(dist, prev);
        prev = dist;
    }
}

TEST(FpTheta, OneStepMatchesDenseMatrices) {
    const ThetaConfig cfg = config_for(1, 4, 1, 0.5);
    ASSERT_TRUE(cfl_check(cfg).time_step_ok);
    const std::vector<double> m0 = {0.1, 0.4, 0.3, 0.2};
    const std::vector<double> vt = {0.3, -0.2, 0.5, -0.4};
    const ThetaProblem p = simple_problem(cfg, std::vector<double>(4, 0.0), m0);
    VectorField v(1, 4, 1);
    for (std::size_t x = 0; x < 4; ++x) v.at(0, x)[0] = vt[x];
    const ScalarField m = fp_theta(p, v);
    const auto explicit_step = oracle::apply(oracle::explicit_fp_matrix(cfg, vt), m0);
    const auto ref = oracle::dense_implicit_solve(explicit_step, cfg.theta * cfg.sigma, cfg.grid);
    for (std::size_t x = 0; x < 4; ++x) EXPECT_NEAR(m(1, x), ref[x], 1e-15);
}

TEST(FpTheta, AdjointOfLinearizedHjbStep) {
    std::mt19937_64 rng(9);
    for (int n : {5, 16}) {
        const ThetaConfig cfg = config_for(1, n, 4, 0.5);
        ASSERT_TRUE(cfl_check(cfg).time_step_ok);
        const auto vt = random_slice(rng, static_cast<std::size_t>(n), -0.5, 0.5);
        const auto fp = oracle::explicit_fp_matrix(cfg, vt);
        const auto hjb_t = oracle::transpose(oracle::explicit_hjb_matrix(cfg, vt));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) EXPECT_NEAR(fp[i][j], hjb_t[i][j], 1e-14);

        // Library FP step columns against A^{-1} E_hjb^T.
        oracle::Matrix inverse(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j) {
            std::vector<double> e(static_cast<std::size_t>(n), 0.0);
            e[static_cast<std::size_t>(j)] = 1.0;
            const auto col = oracle::dense_implicit_solve(e, cfg.theta * cfg.sigma, cfg.grid);
            for (int i = 0; i < n; ++i) inverse[static_cast<std::size_t>(i)].push_back(col[static_cast<std::size_t>(i)]);
        }
        const auto step = oracle::multiply(inverse, hjb_t);
        VectorField v(static_cast<std::size_t>(cfg.grid.time_steps()), static_cast<std::size_t>(n), 1);
        for (int x = 0; x < n; ++x) v.at(0, static_cast<std::size_t>(x))[0] = vt[static_cast<std::size_t>(x)];
        for (int j = 0; j < n; ++j) {
            std::vector<double> e(static_cast<std::size_t>(n), 0.0);
            e[static_cast<std::size_t>(j)] = 1.0;
            const ThetaProblem p = simple_problem(cfg, std::vector<double>(static_cast<std::size_t>(n), 0.0), e);
            const ScalarField m = fp_theta(p, v);
            for (int i = 0; i < n; ++i) EXPECT_NEAR(m(1, static_cast<std::size_t>(i)), step[i][j], 1e-13);
        }
    }
}

TEST(FpTheta, NonnegativeBelowVelocityThreshold) {
    std::mt19937_64 rng(10);
    const ThetaConfig c = config_for(1, 50, 20, 0.4);
    const double threshold = cfl_check(c).velocity_threshold;
    const ThetaProblem p = simple_problem(c, std::vector<double>(50, 0.0), oracle::random_law(rng, 50));
    for (int trial = 0; trial < 10; ++trial) {
        VectorField v(20, 50, 1);
        for (double& x : v.values()) x = std::uniform_real_distribution<double>(-threshold, threshold)(rng);
        const ScalarField m = fp_theta(p, v);
        double lo = kInfinity;
        for (double x : m.values()) lo = std::min(lo, x);
        EXPECT_GE(lo, -1e-12);
    }
    VectorField too_big(20, 50, 1, 0.5);
    EXPECT_THROW(fp_theta(p, too_big), ContractError);
}

TEST(Discretize, UniformDensityGivesCellVolumes) {
    for (int d = 1; d <= 2; ++d) {
        const Grid g(d, 6, 1);
        for (int q : {1, 8}) {
            ContinuousData data;
            data.terminal = [](std::span<const double>) { return 0.0; };
            data.initial_density = [](std::span<const double>) { return 1.0; };
            const DiscretizedData out = discretize_data(data, g, q);
            const double cell = std::pow(g.h(), d);
            for (double v : out.initial) EXPECT_NEAR(v, cell, 1e-15);
            EXPECT_NEAR(out.initial_raw_mass, 1.0, 1e-13);
        }
    }
}

TEST(Discretize, ConstantCellAveragesAndPointwiseTerminal) {
    const Grid g(1, 10, 1);
    const auto avg = cell_averages([](std::span<const double>) { return 3.0; }, g, 4);
    for (double v : avg) EXPECT_NEAR(v, 3.0, 1e-14);
    ContinuousData data;
    data.terminal = [](std::span<const double> x) { return x[0]; };
    data.initial_density = [](std::span<const double>) { return 1.0; };
    const auto out = discretize_data(data, g, 2);
    for (std::size_t x = 0; x < 10; ++x) EXPECT_DOUBLE_EQ(out.terminal[x], g.coordinate(x, 0));
    data.initial_density = [](std::span<const double>) { return 0.0; };
    EXPECT_THROW(discretize_data(data, g), ContractError);
}

TEST(Discretize, BenchmarkInitialLawQuadratureDefect) {
    const BenchParams params;
    const Grid g(1, 300, 720);
    ContinuousData data;
    data.terminal = [&](std::span<const double> x) { return terminal_cost(params, x[0]); };
    data.initial_density = [&](std::span<const double> x) { return initial_density(params, x[0]); };
    const auto q8 = discretize_data(data, g, 8);
    const auto q64 = discretize_data(data, g, 64);
    double sum = 0.0;
    for (double v : q8.initial) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-13);
    EXPECT_LE(std::abs(q8.initial_raw_mass - q64.initial_raw_mass), 1e-3);
    double l1 = 0.0;
    for (std::size_t x = 0; x < 300; ++x) l1 += std::abs(q8.initial[x] - q64.initial[x]);
    EXPECT_LE(l1, 1e-3);
}
