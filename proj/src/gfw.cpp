#include "mfgfw/gfw.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "mfgfw/errors.hpp"

namespace mfgfw {

const char* const kRecordsHeader = "k,lambda,gamma_bar,delta_bar,J_tilde,mass_error,min_m,wall_ms";

StepsizeRule parse_stepsize(const std::string& text, double& fixed_lambda) {
    if (text == "open-loop") return StepsizeRule::open_loop;
    if (text == "line-search") return StepsizeRule::line_search;
    if (text == "best-response") return StepsizeRule::best_response;
    const std::string prefix = "fixed:";
    if (text.rfind(prefix, 0) == 0) {
        const std::string number = text.substr(prefix.size());
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(number, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != number.size()) throw ConfigError("invalid fixed stepsize: " + text);
        if (!(value > 0.0 && value <= 1.0)) throw ConfigError("fixed stepsize must lie in (0, 1]: " + text);
        fixed_lambda = value;
        return StepsizeRule::fixed;
    }
    throw ConfigError("unknown stepsize rule '" + text +
                      "' (expected open-loop, line-search, best-response or fixed:<lambda>)");
}

std::string format_stepsize(StepsizeRule rule, double fixed_lambda) {
    switch (rule) {
        case StepsizeRule::open_loop:
            return "open-loop";
        case StepsizeRule::line_search:
            return "line-search";
        case StepsizeRule::best_response:
            return "best-response";
        case StepsizeRule::fixed: {
            char buf[64];
            std::snprintf(buf, sizeof buf, "fixed:%.17g", fixed_lambda);
            return buf;
        }
    }
    return "open-loop";
}

void validate(const GfwConfig& config) {
    if (config.max_iters < 1) throw ConfigError("max_iters must be positive");
    if (!(config.tol_gamma_bar >= 0.0)) throw ConfigError("tolerance on gamma_bar must be nonnegative");
    if (config.record_fields_every < 0) throw ConfigError("record_fields_every must be nonnegative");
    if (config.rule == StepsizeRule::fixed && !(config.fixed_lambda > 0.0 && config.fixed_lambda <= 1.0)) {
        throw ConfigError("fixed stepsize must lie in (0, 1]");
    }
}

double stepsize(StepsizeRule rule, int k, double gamma_bar, double delta_bar, double coupling_lipschitz,
                std::size_t states, double fixed_lambda) {
    if (k <= 0) return 1.0;
    switch (rule) {
        case StepsizeRule::open_loop:
            return 2.0 / (k + 2.0);
        case StepsizeRule::best_response:
            return 1.0;
        case StepsizeRule::fixed:
            return fixed_lambda;
        case StepsizeRule::line_search: {
            if (delta_bar <= 1e-300) return 1.0;
            const double curvature = coupling_lipschitz * std::sqrt(static_cast<double>(states)) * delta_bar;
            if (gamma_bar >= curvature) return 1.0;
            return std::max(0.0, gamma_bar / curvature);
        }
    }
    return 1.0;
}

ScalarField constant_curve(const PotentialProblem& problem) {
    ScalarField m(static_cast<std::size_t>(problem.steps) + 1, problem.states);
    for (std::size_t t = 0; t < m.num_times(); ++t) {
        std::copy(problem.initial.begin(), problem.initial.end(), m.slice(t).begin());
    }
    return m;
}

namespace {

FlowPair pair_of(const BestResponse& br) { return FlowPair{br.m, br.w}; }

double max_abs(std::span<const double> values) {
    double worst = 0.0;
    for (double v : values) worst = std::max(worst, std::abs(v));
    return worst;
}

}  // namespace

GfwResult solve(const MfgScheme& scheme, const GfwConfig& config, const GfwObserver& observer) {
    return solve(scheme, config, constant_curve(scheme.problem()), observer);
}

GfwResult solve(const MfgScheme& scheme, const GfwConfig& config, const ScalarField& initial_curve,
                const GfwObserver& observer) {
    validate(config);
    const PotentialProblem& problem = scheme.problem();
    const auto start = std::chrono::steady_clock::now();
    const double curvature = problem.coupling_lipschitz * std::sqrt(static_cast<double>(problem.states));

    GfwResult result;
    BestResponse first = scheme.best_response(initial_curve);
    result.max_control = max_abs(first.v.values());
    FlowPair current = pair_of(first);
    double current_cost = cost_J_tilde(problem, current);

    for (int k = 1; k <= config.max_iters; ++k) {
        BestResponse br = scheme.best_response(current.m);
        result.max_control = std::max(result.max_control, max_abs(br.v.values()));

        IterationRecord rec;
        rec.k = k;
        rec.gamma_bar = fenchel_gap(problem, current, br);
        rec.delta_bar = delta_bar(current.m, br.m);
        rec.lambda = stepsize(config.rule, k, rec.gamma_bar, rec.delta_bar, problem.coupling_lipschitz,
                              problem.states, config.fixed_lambda);
        rec.J_tilde = current_cost;
        rec.mass_error = mass_error(current.m);
        rec.min_m = min_value(current.m);
        if (config.timing) {
            rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        }
        result.records.push_back(rec);
        if (observer.on_record) observer.on_record(rec);
        if (config.record_fields_every > 0 && k % config.record_fields_every == 0 && observer.on_fields) {
            observer.on_fields(k, current, br);
        }

        const bool reached = rec.gamma_bar <= config.tol_gamma_bar;
        const bool stalled = config.rule == StepsizeRule::line_search && rec.delta_bar <= 1e-300;
        if (reached || stalled || k == config.max_iters) {
            result.converged = reached;
            result.response = std::move(br);
            break;
        }

        FlowPair next = combine(current, pair_of(br), rec.lambda);
        const double next_cost = cost_J_tilde(problem, next);
        if (config.assert_descent) {
            const double bound = current_cost - rec.lambda * rec.gamma_bar +
                                 rec.lambda * rec.lambda * 0.5 * curvature * rec.delta_bar + 1e-9;
            if (!(next_cost <= bound)) {
                std::ostringstream os;
                os.precision(17);
                os << "descent bound violated at iteration " << k << ": J_tilde(next) = " << next_cost
                   << " exceeds " << bound;
                throw ConvergenceError(os.str());
            }
        }
        current = std::move(next);
        current_cost = next_cost;
    }
    result.pair = std::move(current);
    return result;
}

std::string format_record(const IterationRecord& r) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.6f", r.k, r.lambda, r.gamma_bar,
                  r.delta_bar, r.J_tilde, r.mass_error, r.min_m, r.wall_ms);
    return buf;
}

void write_records_csv(std::ostream& out, const std::vector<IterationRecord>& records) {
    out << kRecordsHeader << '\n';
    for (const auto& r : records) out << format_record(r) << '\n';
}

std::vector<IterationRecord> read_records_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != kRecordsHeader) {
        throw ConfigError("records file does not start with the expected header: " + std::string(kRecordsHeader));
    }
    std::vector<IterationRecord> out;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::vector<std::string> cells;
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 8) throw ConfigError("records row " + std::to_string(row) + " does not have 8 columns");
        IterationRecord r;
        try {
            r.k = std::stoi(cells[0]);
            r.lambda = std::stod(cells[1]);
            r.gamma_bar = std::stod(cells[2]);
            r.delta_bar = std::stod(cells[3]);
            r.J_tilde = std::stod(cells[4]);
            r.mass_error = std::stod(cells[5]);
            r.min_m = std::stod(cells[6]);
            r.wall_ms = std::stod(cells[7]);
        } catch (const std::exception&) {
            throw ConfigError("records row " + std::to_string(row) + " has a malformed number");
        }
        out.push_back(r);
    }
    return out;
}

}  // namespace mfgfw
