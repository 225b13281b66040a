#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mfgfw/gfw.hpp"
#include "mfgfw/theta_scheme.hpp"

namespace mfgfw {

// A exp(-1 / (1 - (k x)^2)) for |x| < 1/k, else 0.
double varphi(double A, double k, double x);
// varphi(x - l1) left of l1, A/e on [l1, l2], varphi(x - l2) right of l2.
double phi(double A, double k, double l1, double l2, double x);

/// One-dimensional congestion benchmark on the unit torus.
struct BenchParams {
    double a1 = 2.0;
    double a2 = 20.0;
    double k0 = 10.0;
    double k1 = 3.0;
    double k2 = 20.0;
    double sigma = 0.02;
    double theta = 0.8;
    int N = 100;
    int T = 80;
    std::optional<double> M;      // unset: 2 (1-theta) sigma N, the largest M meeting CFL bullet 2
    std::optional<double> L_f_c;  // unset: a2^2 k2 / e
    int quadrature = 8;
};

double default_coupling_lipschitz(const BenchParams& params);
double effective_truncation(const BenchParams& params);
double effective_coupling_lipschitz_c(const BenchParams& params);

// Continuous data g^c, m0^c (normalized) and h^c.
double terminal_cost(const BenchParams& params, double x);
double initial_density(const BenchParams& params, double x);
double congestion_profile(const BenchParams& params, double x);

/**
 * Semi-concavity constant L^c shared by g^c and f^c(., m):
 * (1/2) max(sup g'', (a2/e) sup (h'')^+), with second derivatives taken by
 * central differences on a fine grid.
 */
double semiconcavity_constant(const BenchParams& params);

struct Benchmark {
    BenchParams params;
    ThetaProblem problem;
    std::vector<double> congestion;  // cell averages h_bar
    double initial_raw_mass = 0.0;
    double L_f_c = 0.0;
    double semiconcavity = 0.0;
    CflReport cfl;
};

// Throws ConfigError when the time-step CFL condition fails.
Benchmark build_benchmark(const BenchParams& params);

struct Preset {
    std::string name;
    int N = 100;
    int T = 80;
    int iters = 1000;
    std::vector<std::pair<int, int>> meshes;  // (N, T) for sweeps
};

// paper-full, paper-sweep, desk, desk-sweep. Throws ConfigError otherwise.
Preset preset(const std::string& name);
std::vector<std::string> preset_names();

// First k with gamma_bar_k <= rel_tol * gamma_bar_1, or -1.
int k_star(const std::vector<IterationRecord>& records, double rel_tol);

struct SweepEntry {
    int N = 0;
    int T = 0;
    double h = 0.0;
    double dt = 0.0;
    GfwResult result;
    int k_star = -1;
    double final_gamma_bar = 0.0;
};

// Independent solves per mesh, run concurrently. An unset M is resolved on
// the coarsest mesh so that every mesh solves the same truncated problem.
std::vector<SweepEntry> mesh_sweep(const BenchParams& base, const std::vector<std::pair<int, int>>& meshes,
                                   const GfwConfig& config, double rel_tol);

bool in_congestion_zone(double x);
// dt sum_{t<T} sum_{x in [0.2,0.3] u [0.7,0.8]} m(t,x).
double zone_mass(const ScalarField& m, const Grid& grid);

struct CongestionComparison {
    GfwResult coupled;
    GfwResult uncoupled;
    double zone_mass_coupled = 0.0;
    double zone_mass_uncoupled = 0.0;
    // (uncoupled - coupled) / uncoupled
    double relative_reduction = 0.0;
};

CongestionComparison compare_congestion(const BenchParams& params, const GfwConfig& config);

}  // namespace mfgfw
