#include "mfgfw/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>

#include "mfgfw/errors.hpp"
#include "mfgfw/kernel_mfg.hpp"

namespace mfgfw {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size() || !std::isfinite(out)) {
        throw ConfigError("setting '" + key + "': expected a number, got '" + value + "'");
    }
    return out;
}

long long parse_integer(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size()) {
        throw ConfigError("setting '" + key + "': expected an integer, got '" + value + "'");
    }
    return out;
}

int parse_int(const std::string& key, const std::string& value) {
    const long long v = parse_integer(key, value);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
        throw ConfigError("setting '" + key + "': value out of range");
    }
    return static_cast<int>(v);
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
    if (value == "false" || value == "0" || value == "no" || value == "off") return false;
    throw ConfigError("setting '" + key + "': expected true or false, got '" + value + "'");
}

std::string format_meshes(const std::vector<std::pair<int, int>>& meshes) {
    std::string out;
    for (const auto& [n, t] : meshes) {
        if (!out.empty()) out += ',';
        out += std::to_string(n) + "x" + std::to_string(t);
    }
    return out;
}

void check_ranges(const RunConfig& c) {
    if (c.bench.N < 1 || c.bench.T < 1) throw ConfigError("N and T must be positive");
    if (c.bench.quadrature < 1) throw ConfigError("quadrature order must be at least 1");
    if (c.kstar_tol < 0.0) throw ConfigError("kstar_tol must be nonnegative");
    if (c.samples < 1) throw ConfigError("samples must be positive");
    if (c.scheme != "theta" && c.scheme != "kernel") throw ConfigError("scheme must be theta or kernel");
    if (c.out.empty()) throw ConfigError("output directory must not be empty");
    validate(c.gfw);
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    return out;
}

void prepare_directory(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir.string());
}

void dump_triplet(const fs::path& dir, const std::string& suffix, const Grid& grid, const ScalarField& m,
                  const BestResponse& br) {
    prepare_directory(dir);
    {
        auto out = open_output(dir / ("m_" + suffix + ".csv"));
        write_field_dump(out, grid, "m", m.values(), m.num_times());
    }
    {
        auto out = open_output(dir / ("u_" + suffix + ".csv"));
        write_field_dump(out, grid, "u", br.u.values(), br.u.num_times());
    }
    {
        auto out = open_output(dir / ("v_" + suffix + ".csv"));
        write_field_dump(out, grid, "v", br.v.values(), br.v.num_times());
    }
}

std::string iteration_tag(int k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "k%06d", k);
    return buf;
}

// The theta scheme, or its dense kernel form (same best responses, small meshes only).
std::unique_ptr<MfgScheme> make_scheme(const RunConfig& config, const Benchmark& bench) {
    if (config.scheme == "theta") return std::make_unique<ThetaScheme>(bench.problem);
    const Grid& grid = bench.problem.config.grid;
    const double entries = static_cast<double>(grid.time_steps()) * static_cast<double>(grid.num_points()) *
                           static_cast<double>(grid.num_points());
    if (entries > 5e7) throw ConfigError("scheme=kernel is limited to T*N^2 <= 5e7 kernel entries");
    const double bound = bench.problem.config.truncation;
    KernelProblem kp{bench.problem.base, theta_kernel(bench.problem.config), bound, 1.0, ControlSearch{}};
    kp.base.running = std::make_shared<QuadraticRunningCost>(1.0, bound);
    return std::make_unique<KernelScheme>(std::move(kp));
}

struct RunOutcome {
    GfwResult result;
    bool ok = false;
    std::string error;
};

// Solves one benchmark instance into `dir`: records.csv, manifest, fields/.
RunOutcome run_into(const RunConfig& config, const fs::path& dir) {
    const Benchmark bench = build_benchmark(config.bench);
    const Grid& grid = bench.problem.config.grid;
    prepare_directory(dir);

    RunConfig effective = config;
    effective.bench = bench.params;
    Settings settings = effective_settings(effective);
    auto derived = [&](const RunOutcome* outcome) {
        Settings d = settings;
        d.emplace_back("derived.h", fmt(grid.h()));
        d.emplace_back("derived.dt", fmt(grid.dt()));
        d.emplace_back("derived.L_f", fmt(bench.problem.base.coupling_lipschitz));
        d.emplace_back("derived.cfl_max_dt", fmt(bench.cfl.max_dt));
        d.emplace_back("derived.cfl_time_step_ok", bench.cfl.time_step_ok ? "true" : "false");
        d.emplace_back("derived.cfl_time_step_margin", fmt(bench.cfl.time_step_margin));
        d.emplace_back("derived.cfl_max_h", fmt(bench.cfl.max_h));
        d.emplace_back("derived.cfl_mesh_ok", bench.cfl.mesh_ok ? "true" : "false");
        d.emplace_back("derived.cfl_mesh_margin", fmt(bench.cfl.mesh_margin));
        d.emplace_back("derived.velocity_threshold", fmt(bench.cfl.velocity_threshold));
        d.emplace_back("derived.initial_raw_mass", fmt(bench.initial_raw_mass));
        d.emplace_back("derived.semiconcavity_constant", fmt(bench.semiconcavity));
        if (outcome) {
            const auto& r = outcome->result;
            d.emplace_back("derived.status", outcome->ok ? "ok" : "failed");
            d.emplace_back("derived.iterations", std::to_string(r.records.size()));
            d.emplace_back("derived.converged", r.converged ? "true" : "false");
            if (!r.records.empty()) d.emplace_back("derived.final_gamma_bar", fmt(r.records.back().gamma_bar));
            d.emplace_back("derived.max_control", fmt(r.max_control));
            d.emplace_back("derived.velocity_check",
                           r.max_control <= bench.cfl.velocity_threshold * (1.0 + 1e-12) ? "pass" : "fail");
        }
        return d;
    };
    {
        auto out = open_output(dir / "manifest");
        write_settings(out, derived(nullptr));
    }

    auto records = open_output(dir / "records.csv");
    records << kRecordsHeader << '\n' << std::flush;
    std::vector<IterationRecord> seen;
    GfwObserver observer;
    observer.on_record = [&](const IterationRecord& r) {
        seen.push_back(r);
        records << format_record(r) << '\n' << std::flush;
    };
    observer.on_fields = [&](int k, const FlowPair& iterate, const BestResponse& br) {
        dump_triplet(dir / "fields", iteration_tag(k), grid, iterate.m, br);
    };

    RunOutcome outcome;
    try {
        const auto scheme = make_scheme(config, bench);
        outcome.result = solve(*scheme, config.gfw, observer);
        outcome.ok = true;
        dump_triplet(dir / "fields", "final", grid, outcome.result.pair.m, outcome.result.response);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        outcome.error = e.what();
        outcome.result.records = seen;
    }
    auto out = open_output(dir / "manifest");
    write_settings(out, derived(&outcome));
    return outcome;
}

void report_run(const RunOutcome& outcome, const fs::path& dir, std::ostream& log, std::ostream& err) {
    if (!outcome.ok) {
        err << "error: " << outcome.error << " (partial records in " << (dir / "records.csv").string() << ")\n";
        return;
    }
    const auto& r = outcome.result;
    log << "wrote " << r.records.size() << " iterations to " << (dir / "records.csv").string();
    if (!r.records.empty()) log << "; final gamma_bar = " << fmt(r.records.back().gamma_bar);
    log << '\n';
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

std::vector<double> random_law(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<double> out(n);
    double sum = 0.0;
    for (double& v : out) {
        v = dist(rng);
        sum += v;
    }
    for (double& v : out) v /= sum;
    return out;
}

}  // namespace

void apply_preset(RunConfig& config, const std::string& name) {
    const Preset p = preset(name);
    config.preset = p.name;
    config.bench.N = p.N;
    config.bench.T = p.T;
    config.gfw.max_iters = p.iters;
    config.meshes = p.meshes;
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
    if (key == "preset") {
        apply_preset(c, value);
    } else if (key == "N") {
        c.bench.N = parse_int(key, value);
    } else if (key == "T") {
        c.bench.T = parse_int(key, value);
    } else if (key == "theta") {
        c.bench.theta = parse_double(key, value);
    } else if (key == "sigma") {
        c.bench.sigma = parse_double(key, value);
    } else if (key == "M") {
        if (value == "auto") {
            c.bench.M.reset();
        } else {
            const double m = parse_double(key, value);
            if (!(m > 0.0)) throw ConfigError("M must be positive");
            c.bench.M = m;
        }
    } else if (key == "Lf") {
        if (value == "default") {
            c.bench.L_f_c.reset();
        } else {
            const double lf = parse_double(key, value);
            if (lf < 0.0) throw ConfigError("Lf must be nonnegative");
            c.bench.L_f_c = lf;
        }
    } else if (key == "a1") {
        c.bench.a1 = parse_double(key, value);
    } else if (key == "a2") {
        c.bench.a2 = parse_double(key, value);
    } else if (key == "k0") {
        c.bench.k0 = parse_double(key, value);
    } else if (key == "k1") {
        c.bench.k1 = parse_double(key, value);
    } else if (key == "k2") {
        c.bench.k2 = parse_double(key, value);
    } else if (key == "quadrature") {
        c.bench.quadrature = parse_int(key, value);
    } else if (key == "no_coupling") {
        if (parse_bool(key, value)) c.bench.a2 = 0.0;
    } else if (key == "scheme") {
        c.scheme = value;
    } else if (key == "stepsize") {
        c.gfw.rule = parse_stepsize(value, c.gfw.fixed_lambda);
    } else if (key == "iters") {
        c.gfw.max_iters = parse_int(key, value);
    } else if (key == "tol") {
        c.gfw.tol_gamma_bar = parse_double(key, value);
    } else if (key == "kstar_tol") {
        c.kstar_tol = parse_double(key, value);
    } else if (key == "out") {
        c.out = value;
    } else if (key == "dump_fields_every") {
        c.gfw.record_fields_every = parse_int(key, value);
    } else if (key == "assert_descent") {
        c.gfw.assert_descent = parse_bool(key, value);
    } else if (key == "timing") {
        c.gfw.timing = parse_bool(key, value);
    } else if (key == "seed") {
        const long long s = parse_integer(key, value);
        if (s < 0) throw ConfigError("seed must be nonnegative");
        c.seed = static_cast<std::uint64_t>(s);
    } else if (key == "meshes") {
        c.meshes = parse_meshes(value);
    } else if (key == "samples") {
        c.samples = parse_int(key, value);
    } else if (key == "kernel") {
        c.kernel_file = value;
    } else {
        throw ConfigError("unknown setting '" + key + "'");
    }
}

Settings read_settings(std::istream& in) {
    Settings out;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
        }
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(number) + ": empty key");
        if (key.rfind("derived.", 0) == 0) continue;
        out.emplace_back(std::move(key), std::move(value));
    }
    return out;
}

void load_config_file(RunConfig& config, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    for (const auto& [key, value] : read_settings(in)) apply_setting(config, key, value);
}

std::vector<std::pair<int, int>> parse_meshes(const std::string& text) {
    std::vector<std::pair<int, int>> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        const auto x = item.find('x');
        if (x == std::string::npos) throw ConfigError("mesh '" + item + "' is not of the form NxT");
        const int n = parse_int("meshes", item.substr(0, x));
        const int t = parse_int("meshes", item.substr(x + 1));
        if (n < 1 || t < 1) throw ConfigError("mesh sizes must be positive");
        out.emplace_back(n, t);
    }
    if (out.empty()) throw ConfigError("mesh list is empty");
    return out;
}

Settings effective_settings(const RunConfig& c) {
    Settings s;
    if (!c.preset.empty()) s.emplace_back("preset", c.preset);
    s.emplace_back("N", std::to_string(c.bench.N));
    s.emplace_back("T", std::to_string(c.bench.T));
    s.emplace_back("theta", fmt(c.bench.theta));
    s.emplace_back("sigma", fmt(c.bench.sigma));
    s.emplace_back("M", fmt(effective_truncation(c.bench)));
    s.emplace_back("Lf", fmt(effective_coupling_lipschitz_c(c.bench)));
    s.emplace_back("a1", fmt(c.bench.a1));
    s.emplace_back("a2", fmt(c.bench.a2));
    s.emplace_back("k0", fmt(c.bench.k0));
    s.emplace_back("k1", fmt(c.bench.k1));
    s.emplace_back("k2", fmt(c.bench.k2));
    s.emplace_back("quadrature", std::to_string(c.bench.quadrature));
    s.emplace_back("scheme", c.scheme);
    s.emplace_back("stepsize", format_stepsize(c.gfw.rule, c.gfw.fixed_lambda));
    s.emplace_back("iters", std::to_string(c.gfw.max_iters));
    s.emplace_back("tol", fmt(c.gfw.tol_gamma_bar));
    s.emplace_back("kstar_tol", fmt(c.kstar_tol));
    s.emplace_back("dump_fields_every", std::to_string(c.gfw.record_fields_every));
    s.emplace_back("assert_descent", c.gfw.assert_descent ? "true" : "false");
    s.emplace_back("timing", c.gfw.timing ? "true" : "false");
    s.emplace_back("seed", std::to_string(c.seed));
    s.emplace_back("samples", std::to_string(c.samples));
    if (!c.meshes.empty()) s.emplace_back("meshes", format_meshes(c.meshes));
    if (!c.kernel_file.empty()) s.emplace_back("kernel", c.kernel_file);
    s.emplace_back("out", c.out);
    return s;
}

void write_settings(std::ostream& out, const Settings& settings) {
    for (const auto& [key, value] : settings) out << key << '=' << value << '\n';
}

void write_field_dump(std::ostream& out, const Grid& grid, const std::string& kind, std::span<const double> values,
                      std::size_t rows) {
    if (rows == 0 || values.size() % rows != 0) throw ContractError("field dump: values do not split into rows");
    out << "# d=" << grid.dim() << " N=" << grid.points_per_axis() << " T=" << grid.time_steps()
        << " dt=" << fmt(grid.dt()) << " h=" << fmt(grid.h()) << " kind=" << kind << '\n';
    const std::size_t width = values.size() / rows;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t i = 0; i < width; ++i) {
            if (i) out << ',';
            out << fmt(values[r * width + i]);
        }
        out << '\n';
    }
}

FieldDump read_field_dump(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) throw ConfigError("field dump: missing header line");
    FieldDump dump;
    std::map<std::string, std::string> header;
    std::istringstream hs(line.substr(2));
    std::string token;
    while (hs >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos) throw ConfigError("field dump: malformed header token '" + token + "'");
        header[token.substr(0, eq)] = token.substr(eq + 1);
    }
    for (const char* key : {"d", "N", "T", "dt", "h", "kind"}) {
        if (!header.count(key)) throw ConfigError(std::string("field dump: header lacks ") + key);
    }
    dump.d = parse_int("d", header["d"]);
    dump.N = parse_int("N", header["N"]);
    dump.T = parse_int("T", header["T"]);
    dump.dt = parse_double("dt", header["dt"]);
    dump.h = parse_double("h", header["h"]);
    dump.kind = header["kind"];
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(parse_double("field value", cell));
        dump.rows.push_back(std::move(row));
    }
    return dump;
}

int cmd_run(const RunConfig& config, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        check_ranges(config);
        const fs::path dir(config.out);
        const RunOutcome outcome = run_into(config, dir);
        report_run(outcome, dir, log, err);
        return outcome.ok ? 0 : 1;
    });
}

int cmd_sweep(const RunConfig& config, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        check_ranges(config);
        std::vector<std::pair<int, int>> meshes = config.meshes;
        if (meshes.empty()) meshes = {{config.bench.N, config.bench.T}};
        BenchParams shared = config.bench;
        if (!shared.M) {
            BenchParams coarsest = shared;
            coarsest.N = meshes.front().first;
            for (const auto& mesh : meshes) coarsest.N = std::min(coarsest.N, mesh.first);
            shared.M = effective_truncation(coarsest);
        }
        for (const auto& [n, t] : meshes) {
            BenchParams p = shared;
            p.N = n;
            p.T = t;
            build_benchmark(p);  // reject CFL violations before any solve starts
        }
        const fs::path root(config.out);
        prepare_directory(root);
        RunConfig top = config;
        top.bench = shared;
        top.meshes = meshes;
        {
            auto out = open_output(root / "manifest");
            write_settings(out, effective_settings(top));
        }

        std::vector<std::pair<RunConfig, fs::path>> jobs;
        for (const auto& [n, t] : meshes) {
            RunConfig c = top;
            c.bench.N = n;
            c.bench.T = t;
            c.meshes.clear();
            const fs::path dir = root / ("N" + std::to_string(n) + "_T" + std::to_string(t));
            c.out = dir.string();
            jobs.emplace_back(c, dir);
        }
        std::vector<std::future<RunOutcome>> futures;
        for (const auto& job : jobs) {
            futures.push_back(std::async(std::launch::async, [&job] { return run_into(job.first, job.second); }));
        }
        std::vector<RunOutcome> outcomes;
        for (auto& f : futures) outcomes.push_back(f.get());

        auto summary = open_output(root / "summary.csv");
        summary << "N,T,h,dt,k_star,final_gamma_bar\n";
        bool ok = true;
        int kmin = -1;
        int kmax = -1;
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            const auto& [n, t] = meshes[i];
            const auto& r = outcomes[i].result;
            report_run(outcomes[i], jobs[i].second, log, err);
            ok = ok && outcomes[i].ok;
            const int ks = k_star(r.records, config.kstar_tol);
            const double last = r.records.empty() ? 0.0 : r.records.back().gamma_bar;
            summary << n << ',' << t << ',' << fmt(1.0 / n) << ',' << fmt(1.0 / t) << ',' << ks << ',' << fmt(last)
                    << '\n';
            if (ks > 0) {
                kmin = kmin < 0 ? ks : std::min(kmin, ks);
                kmax = std::max(kmax, ks);
            }
        }
        log << "summary written to " << (root / "summary.csv").string();
        if (kmin > 0) log << "; k* ratio max/min = " << fmt(static_cast<double>(kmax) / kmin);
        log << '\n';
        return ok ? 0 : 1;
    });
}

int cmd_validate(const RunConfig& config, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        check_ranges(config);
        const Benchmark bench = build_benchmark(config.bench);
        const ThetaConfig& theta = bench.problem.config;
        bool ok = true;
        auto report = [&](bool pass, const std::string& name, const std::string& detail) {
            log << (pass ? "[PASS] " : "[FAIL] ") << name << ": " << detail << '\n';
            ok = ok && pass;
        };

        if (!config.kernel_file.empty()) {
            std::ifstream in(config.kernel_file);
            if (!in) throw ConfigError("cannot read kernel file " + config.kernel_file);
            double bound = 0.0;
            const Kernel kernel = read_kernel(in, bound);
            const KernelReport r = check_kernel(kernel, bound);
            report(r.ok(), "kernel validity",
                   r.ok() ? "file kernel satisfies all three conditions with D = " + fmt(bound) : r.first_violation);
        } else if (theta.grid.num_points() <= 4000) {
            const double bound = std::min(theta.truncation, bench.cfl.velocity_threshold);
            const KernelReport r = check_kernel(theta_kernel(theta, 1), bound);
            report(r.ok(), "kernel validity",
                   r.ok() ? "theta kernel satisfies all three conditions with D = " + fmt(bound) : r.first_violation);
        } else {
            log << "[SKIP] kernel validity: lattice too large for dense assembly\n";
        }

        std::mt19937_64 rng(config.seed);
        const Coupling& coupling = *bench.problem.base.coupling;
        const std::size_t n = bench.problem.base.states;
        double worst_pairing = kInfinity;
        double worst_defect = 0.0;
        for (int i = 0; i < config.samples; ++i) {
            const auto m1 = random_law(rng, n);
            const auto m2 = random_law(rng, n);
            worst_pairing = std::min(worst_pairing, monotonicity_pairing(coupling, 0, m1, m2));
            worst_defect = std::max(worst_defect, potential_identity_defect(coupling, 0, m1, m2));
        }
        report(worst_pairing >= -1e-12, "coupling monotonicity",
               "min pairing " + fmt(worst_pairing) + " over " + std::to_string(config.samples) + " random pairs");
        report(worst_defect <= 1e-8, "potential identity",
               "max defect " + fmt(worst_defect) + " (32-point Gauss-Legendre)");

        report(bench.cfl.time_step_ok, "CFL time step",
               "dt = " + fmt(theta.grid.dt()) + ", max_dt = " + fmt(bench.cfl.max_dt));
        log << (bench.cfl.mesh_ok ? "[PASS] " : "[WARN] ") << "CFL mesh (reported only): h = " << fmt(theta.grid.h())
            << ", 2(1-theta)sigma/M = " << fmt(bench.cfl.max_h) << '\n';
        log << (ok ? "all checks passed\n" : "some checks failed\n");
        return ok ? 0 : 1;
    });
}

int cmd_compare(const RunConfig& config, std::ostream& log, std::ostream& err) {
    return guarded(err, [&] {
        check_ranges(config);
        const fs::path root(config.out);
        prepare_directory(root);
        RunConfig with = config;
        RunConfig without = config;
        without.bench.a2 = 0.0;
        without.gfw.tol_gamma_bar = std::max(config.gfw.tol_gamma_bar, 1e-12);
        const RunOutcome a = run_into(with, root / "coupled");
        const RunOutcome b = run_into(without, root / "uncoupled");
        report_run(a, root / "coupled", log, err);
        report_run(b, root / "uncoupled", log, err);
        if (!a.ok || !b.ok) return 1;
        const Grid grid(1, config.bench.N, config.bench.T);
        const double zc = zone_mass(a.result.pair.m, grid);
        const double zu = zone_mass(b.result.pair.m, grid);
        auto out = open_output(root / "comparison.csv");
        out << "zone_mass_coupled,zone_mass_uncoupled,relative_reduction\n";
        out << fmt(zc) << ',' << fmt(zu) << ',' << fmt(zu > 0.0 ? (zu - zc) / zu : 0.0) << '\n';
        log << "zone mass with coupling " << fmt(zc) << ", without " << fmt(zu) << '\n';
        return 0;
    });
}

int run_cli(int argc, const char* const* argv, std::ostream& log, std::ostream& err) {
    CLI::App app{"Potential mean field game solver (theta-scheme, generalized Frank-Wolfe)"};
    app.require_subcommand(1);

    struct Option {
        const char* flag;
        const char* key;
        const char* help;
    };
    static const Option options[] = {
        {"--N", "N", "points per axis"},
        {"--T", "T", "time steps"},
        {"--theta", "theta", "splitting parameter in (1/2, 1)"},
        {"--sigma", "sigma", "viscosity"},
        {"--M", "M", "control truncation radius, or auto"},
        {"--Lf", "Lf", "coupling Lipschitz constant L_f^c, or default"},
        {"--stepsize", "stepsize", "open-loop | line-search | best-response | fixed:<lambda>"},
        {"--iters", "iters", "maximum GFW iterations"},
        {"--tol", "tol", "stop when gamma_bar <= tol"},
        {"--kstar-tol", "kstar_tol", "relative tolerance defining k* in sweeps"},
        {"--out", "out", "output directory"},
        {"--dump-fields-every", "dump_fields_every", "write m/u/v every n iterations (0 = final only)"},
        {"--seed", "seed", "seed for randomized checks"},
        {"--meshes", "meshes", "sweep meshes, e.g. 50x20,100x80"},
        {"--scheme", "scheme", "theta | kernel"},
        {"--samples", "samples", "random pairs drawn by validate"},
        {"--kernel", "kernel", "kernel file checked by validate"},
    };

    struct Holder {
        std::string preset;
        std::string config;
        std::map<std::string, std::string> values;
        std::map<std::string, CLI::Option*> handles;
        bool assert_descent = false;
        bool no_coupling = false;
        bool no_timing = false;
    };
    std::map<std::string, Holder> holders;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"run", "solve one benchmark instance"},
        {"sweep", "solve on several meshes and summarize k*"},
        {"validate", "check kernel validity, monotonicity, potential identity and CFL"},
        {"compare", "solve with and without the congestion coupling"},
    };
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, description] : commands) {
        Holder& h = holders[name];
        CLI::App* sub = app.add_subcommand(name, description);
        sub->add_option("--preset", h.preset, "paper-full | paper-sweep | desk | desk-sweep");
        sub->add_option("--config", h.config, "flat key=value config file");
        for (const auto& o : options) h.handles[o.key] = sub->add_option(o.flag, h.values[o.key], o.help);
        sub->add_flag("--assert-descent", h.assert_descent, "check the per-iteration descent bound");
        sub->add_flag("--no-coupling", h.no_coupling, "drop the congestion term (a2 = 0)");
        sub->add_flag("--no-timing", h.no_timing, "write wall_ms = 0 for reproducible records");
        subs[name] = sub;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, log, err);
    }

    for (const auto& [name, sub] : subs) {
        if (!sub->parsed()) continue;
        Holder& h = holders[name];
        RunConfig config;
        if (name == "sweep") config.gfw.rule = StepsizeRule::open_loop;
        const int status = guarded(err, [&] {
            if (!h.preset.empty()) apply_preset(config, h.preset);
            if (!h.config.empty()) load_config_file(config, h.config);
            for (const auto& o : options) {
                if (h.handles[o.key]->count() > 0) apply_setting(config, o.key, h.values[o.key]);
            }
            if (h.assert_descent) config.gfw.assert_descent = true;
            if (h.no_coupling) config.bench.a2 = 0.0;
            if (h.no_timing) config.gfw.timing = false;
            return 0;
        });
        if (status != 0) return status;
        if (name == "run") return cmd_run(config, log, err);
        if (name == "sweep") return cmd_sweep(config, log, err);
        if (name == "validate") return cmd_validate(config, log, err);
        return cmd_compare(config, log, err);
    }
    return 2;
}

}  // namespace mfgfw
