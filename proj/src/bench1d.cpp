#include "mfgfw/bench1d.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <memory>
#include <numbers>

#include "mfgfw/errors.hpp"

namespace mfgfw {

double varphi(double A, double k, double x) {
    const double kx = k * x;
    if (std::abs(kx) >= 1.0) return 0.0;
    return A * std::exp(-1.0 / (1.0 - kx * kx));
}

double phi(double A, double k, double l1, double l2, double x) {
    if (x < l1) return varphi(A, k, x - l1);
    if (x > l2) return varphi(A, k, x - l2);
    return A / std::numbers::e;
}

double default_coupling_lipschitz(const BenchParams& params) {
    return params.a2 * params.a2 * params.k2 / std::numbers::e;
}

double effective_truncation(const BenchParams& params) {
    return params.M ? *params.M : 2.0 * (1.0 - params.theta) * params.sigma * params.N;
}

double effective_coupling_lipschitz_c(const BenchParams& params) {
    return params.L_f_c ? *params.L_f_c : default_coupling_lipschitz(params);
}

double terminal_cost(const BenchParams& p, double x) { return phi(p.a1, p.k1, 1.0 / 3.0, 2.0 / 3.0, x); }

namespace {

double raw_initial(const BenchParams& p, double x) { return phi(1.0, p.k0, 0.49, 0.51, x); }

// Integral of the unnormalized initial bump by composite Simpson on its support.
double initial_normalization(const BenchParams& p) {
    const double lo = std::max(0.0, 0.49 - 1.0 / p.k0);
    const double hi = std::min(1.0, 0.51 + 1.0 / p.k0);
    const int n = 20000;
    const double step = (hi - lo) / n;
    double acc = raw_initial(p, lo) + raw_initial(p, hi);
    for (int i = 1; i < n; ++i) acc += (i % 2 ? 4.0 : 2.0) * raw_initial(p, lo + i * step);
    return acc * step / 3.0;
}

template <typename Fn>
double sup_second_derivative(Fn&& fn, bool positive_part) {
    const int n = 20000;
    const double step = 1e-4;
    double best = positive_part ? 0.0 : -kInfinity;
    for (int i = 0; i < n; ++i) {
        const double x = (i + 0.5) / n;
        const double second = (fn(x + step) + fn(x - step) - 2.0 * fn(x)) / (step * step);
        best = std::max(best, second);
    }
    return best;
}

}  // namespace

double initial_density(const BenchParams& p, double x) { return raw_initial(p, x) / initial_normalization(p); }

double congestion_profile(const BenchParams& p, double x) {
    return phi(p.a2, p.k2, 0.24, 0.25, x) + phi(p.a2, p.k2, 0.75, 0.76, x);
}

double semiconcavity_constant(const BenchParams& p) {
    const double g2 = sup_second_derivative([&](double x) { return terminal_cost(p, x); }, false);
    const double h2 = sup_second_derivative([&](double x) { return congestion_profile(p, x); }, true);
    return 0.5 * std::max(g2, p.a2 / std::numbers::e * h2);
}

Benchmark build_benchmark(const BenchParams& params) {
    if (params.N < 1 || params.T < 1) throw ConfigError("mesh sizes N and T must be positive");
    if (!(params.a1 >= 0.0 && params.a2 >= 0.0 && params.k0 > 0.0 && params.k1 > 0.0 && params.k2 > 0.0)) {
        throw ConfigError("benchmark amplitudes must be nonnegative and frequencies positive");
    }
    if (params.L_f_c && !(*params.L_f_c >= 0.0)) throw ConfigError("L_f^c must be nonnegative");
    ThetaConfig config;
    config.theta = params.theta;
    config.sigma = params.sigma;
    config.truncation = effective_truncation(params);
    config.grid = Grid(1, params.N, params.T);
    require_time_step_cfl(config);

    const double norm = initial_normalization(params);
    ContinuousData data;
    data.terminal = [params](std::span<const double> x) { return terminal_cost(params, x[0]); };
    data.initial_density = [params, norm](std::span<const double> x) { return raw_initial(params, x[0]) / norm; };
    data.congestion_profile = [params](std::span<const double> x) { return congestion_profile(params, x[0]); };
    DiscretizedData disc = discretize_data(data, config.grid, params.quadrature);

    Benchmark bench;
    bench.params = params;
    bench.params.M = config.truncation;
    bench.congestion = disc.congestion_profile;
    bench.initial_raw_mass = disc.initial_raw_mass;
    bench.L_f_c = effective_coupling_lipschitz_c(params);
    bench.semiconcavity = semiconcavity_constant(params);
    bench.cfl = cfl_check(config);

    double profile_sq = 0.0;
    for (double b : bench.congestion) profile_sq += b * b;
    auto coupling = std::make_shared<RankOneCoupling>(bench.congestion, profile_sq);
    auto hamiltonian = std::make_shared<QuadraticHamiltonian>(1, 1.0, config.truncation);
    const double L_f = bench.L_f_c / std::sqrt(config.grid.h());
    bench.problem = make_theta_problem(config, hamiltonian, coupling, std::move(disc.terminal),
                                       std::move(disc.initial), L_f);
    return bench;
}

Preset preset(const std::string& name) {
    Preset p;
    p.name = name;
    if (name == "paper-full") {
        p.N = 300;
        p.T = 720;
        p.meshes = {{300, 720}};
    } else if (name == "paper-sweep") {
        p.N = 250;
        p.T = 500;
        p.meshes = {{250, 500}, {500, 2000}, {1000, 8000}};
    } else if (name == "desk") {
        p.N = 100;
        p.T = 80;
        p.meshes = {{100, 80}};
    } else if (name == "desk-sweep") {
        p.N = 50;
        p.T = 20;
        p.meshes = {{50, 20}, {100, 80}, {200, 320}};
    } else {
        throw ConfigError("unknown preset '" + name + "' (expected paper-full, paper-sweep, desk or desk-sweep)");
    }
    return p;
}

std::vector<std::string> preset_names() { return {"paper-full", "paper-sweep", "desk", "desk-sweep"}; }

int k_star(const std::vector<IterationRecord>& records, double rel_tol) {
    if (records.empty()) return -1;
    const double threshold = rel_tol * records.front().gamma_bar;
    for (const auto& r : records) {
        if (r.gamma_bar <= threshold) return r.k;
    }
    return -1;
}

std::vector<SweepEntry> mesh_sweep(const BenchParams& base, const std::vector<std::pair<int, int>>& meshes,
                                   const GfwConfig& config, double rel_tol) {
    BenchParams shared = base;
    if (!shared.M && !meshes.empty()) {
        int coarsest = meshes.front().first;
        for (const auto& mesh : meshes) coarsest = std::min(coarsest, mesh.first);
        shared.N = coarsest;
        shared.M = effective_truncation(shared);
    }
    std::vector<Benchmark> benches;
    for (const auto& [n, t] : meshes) {
        BenchParams p = shared;
        p.N = n;
        p.T = t;
        benches.push_back(build_benchmark(p));
    }
    std::vector<std::future<GfwResult>> runs;
    for (const auto& bench : benches) {
        runs.push_back(std::async(std::launch::async, [&bench, config] {
            const ThetaScheme scheme(bench.problem);
            return solve(scheme, config);
        }));
    }
    std::vector<SweepEntry> out;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        SweepEntry e;
        e.N = meshes[i].first;
        e.T = meshes[i].second;
        e.h = 1.0 / e.N;
        e.dt = 1.0 / e.T;
        e.result = runs[i].get();
        e.k_star = k_star(e.result.records, rel_tol);
        e.final_gamma_bar = e.result.records.empty() ? 0.0 : e.result.records.back().gamma_bar;
        out.push_back(std::move(e));
    }
    return out;
}

bool in_congestion_zone(double x) {
    // Lattice coordinates carry rounding; zone edges are closed.
    constexpr double slack = 1e-12;
    return (x >= 0.2 - slack && x <= 0.3 + slack) || (x >= 0.7 - slack && x <= 0.8 + slack);
}

double zone_mass(const ScalarField& m, const Grid& grid) {
    double acc = 0.0;
    const std::size_t steps = std::min<std::size_t>(m.num_times(), static_cast<std::size_t>(grid.time_steps()));
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t x = 0; x < grid.num_points(); ++x) {
            if (in_congestion_zone(grid.coordinate(x, 0))) acc += m(t, x);
        }
    }
    return grid.dt() * acc;
}

CongestionComparison compare_congestion(const BenchParams& params, const GfwConfig& config) {
    BenchParams free = params;
    free.a2 = 0.0;
    const Benchmark with = build_benchmark(params);
    const Benchmark without = build_benchmark(free);
    CongestionComparison out;
    out.coupled = solve(ThetaScheme(with.problem), config);
    // The decoupled problem is solved by its first best response.
    GfwConfig single = config;
    single.tol_gamma_bar = std::max(config.tol_gamma_bar, 1e-12);
    out.uncoupled = solve(ThetaScheme(without.problem), single);
    const Grid& grid = with.problem.config.grid;
    out.zone_mass_coupled = zone_mass(out.coupled.pair.m, grid);
    out.zone_mass_uncoupled = zone_mass(out.uncoupled.pair.m, grid);
    out.relative_reduction = out.zone_mass_uncoupled > 0.0
                                 ? (out.zone_mass_uncoupled - out.zone_mass_coupled) / out.zone_mass_uncoupled
                                 : 0.0;
    return out;
}

}  // namespace mfgfw
