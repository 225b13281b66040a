#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "mfgfw/potential.hpp"
#include "mfgfw/problem.hpp"

namespace mfgfw {

enum class StepsizeRule { open_loop, line_search, best_response, fixed };

// Accepts "open-loop", "line-search", "best-response" and "fixed:<lambda>".
StepsizeRule parse_stepsize(const std::string& text, double& fixed_lambda);
std::string format_stepsize(StepsizeRule rule, double fixed_lambda);

struct GfwConfig {
    StepsizeRule rule = StepsizeRule::open_loop;
    double fixed_lambda = 0.5;
    int max_iters = 1000;
    double tol_gamma_bar = 0.0;
    bool assert_descent = false;
    int record_fields_every = 0;  // 0 = never
    bool timing = true;           // false writes wall_ms = 0 for reproducible logs
};

// Throws ConfigError on out-of-range fields.
void validate(const GfwConfig& config);

struct IterationRecord {
    int k = 0;
    double lambda = 0.0;
    double gamma_bar = 0.0;
    double delta_bar = 0.0;
    double J_tilde = 0.0;
    double mass_error = 0.0;
    double min_m = 0.0;
    double wall_ms = 0.0;
};

/**
 * Stepsize lambda_k in [0, 1]. k = 0 always returns 1. Line search returns
 * min{gamma_bar / (L_f sqrt|S| delta_bar), 1}, and 1 when delta_bar <= 1e-300.
 */
double stepsize(StepsizeRule rule, int k, double gamma_bar, double delta_bar, double coupling_lipschitz,
                std::size_t states, double fixed_lambda = 0.5);

// Callbacks invoked during a solve; any of them may be empty.
struct GfwObserver {
    std::function<void(const IterationRecord&)> on_record;
    // Called at k = every, 2 every, ... with the iterate and its best response.
    std::function<void(int k, const FlowPair& iterate, const BestResponse& response)> on_fields;
};

struct GfwResult {
    FlowPair pair;               // final iterate (m^K, w^K)
    BestResponse response;       // BR(m^K): value function u and control v at the final iterate
    std::vector<IterationRecord> records;
    double max_control = 0.0;    // largest |v| over all best responses computed
    bool converged = false;      // gamma_bar reached tol
};

// Default starting curve: m0 at every time.
ScalarField constant_curve(const PotentialProblem& problem);

/**
 * Generalized Frank-Wolfe iteration. (m^1, w^1) = BR(m^0); then for
 * k = 1..max_iters the best response, gap, stepsize and record of iterate k
 * are computed, and the iterate moves to (1 - lambda_k) (m^k, w^k) +
 * lambda_k BR(m^k) unless gamma_bar_k <= tol. Throws ConvergenceError when
 * the descent assertion fails.
 */
GfwResult solve(const MfgScheme& scheme, const GfwConfig& config, const ScalarField& initial_curve,
                const GfwObserver& observer = {});
GfwResult solve(const MfgScheme& scheme, const GfwConfig& config, const GfwObserver& observer = {});

// CSV with header k,lambda,gamma_bar,delta_bar,J_tilde,mass_error,min_m,wall_ms.
extern const char* const kRecordsHeader;
std::string format_record(const IterationRecord& record);
void write_records_csv(std::ostream& out, const std::vector<IterationRecord>& records);
std::vector<IterationRecord> read_records_csv(std::istream& in);

}  // namespace mfgfw
