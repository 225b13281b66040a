#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mfgfw/bench1d.hpp"
#include "mfgfw/gfw.hpp"

namespace mfgfw {

/// Everything a command needs: benchmark data, solver settings and outputs.
struct RunConfig {
    std::string preset;
    BenchParams bench;
    std::string scheme = "theta";  // theta | kernel (dense kernel form, small meshes only)
    GfwConfig gfw;
    std::vector<std::pair<int, int>> meshes;  // sweep meshes (N, T)
    std::string out = "out";
    std::uint64_t seed = 1;
    double kstar_tol = 1e-4;
    int samples = 20;         // random pairs drawn by validate
    std::string kernel_file;  // validate: check this kernel instead of the theta kernel
};

using Settings = std::vector<std::pair<std::string, std::string>>;

// Sets N, T, iters and meshes from a named preset.
void apply_preset(RunConfig& config, const std::string& name);

// Applies one key=value setting; throws ConfigError on unknown keys or bad values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

// Flat "key = value" lines; '#' starts a comment; keys prefixed "derived." are skipped.
Settings read_settings(std::istream& in);
void load_config_file(RunConfig& config, const std::string& path);

// Parses "50x20,100x80".
std::vector<std::pair<int, int>> parse_meshes(const std::string& text);

// Effective settings in a fixed order, with M and Lf resolved to numbers.
Settings effective_settings(const RunConfig& config);
void write_settings(std::ostream& out, const Settings& settings);

/**
 * Field dump: a header "# d=<d> N=<N> T=<T> dt=<dt> h=<h> kind=<m|u|v>" and
 * one comma-separated row per time slice, points in lexicographic order
 * (d components per point for kind v).
 */
void write_field_dump(std::ostream& out, const Grid& grid, const std::string& kind, std::span<const double> values,
                      std::size_t rows);

struct FieldDump {
    int d = 0;
    int N = 0;
    int T = 0;
    double dt = 0.0;
    double h = 0.0;
    std::string kind;
    std::vector<std::vector<double>> rows;
};

// Throws ConfigError on a malformed header or rows.
FieldDump read_field_dump(std::istream& in);

// Exit codes: 0 success, 1 solver or check failure, 2 configuration error.
int cmd_run(const RunConfig& config, std::ostream& log, std::ostream& err);
int cmd_sweep(const RunConfig& config, std::ostream& log, std::ostream& err);
int cmd_validate(const RunConfig& config, std::ostream& log, std::ostream& err);
int cmd_compare(const RunConfig& config, std::ostream& log, std::ostream& err);

int run_cli(int argc, const char* const* argv, std::ostream& log, std::ostream& err);

}  // namespace mfgfw
