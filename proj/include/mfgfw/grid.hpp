#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace mfgfw {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/**
 * Grid: periodic lattice S = {0..N-1}^d with spacing h = 1/N on the unit
 * torus, together with the uniform time mesh of T steps (dt = 1/T).
 *
 * Points are addressed by a flat lexicographic index (last axis fastest).
 * Physical coordinates are only computed on demand.
 */
class Grid {
public:
    Grid(int dim, int points_per_axis, int time_steps);

    int dim() const { return dim_; }
    int points_per_axis() const { return n_; }
    int time_steps() const { return steps_; }
    double h() const { return h_; }
    double dt() const { return dt_; }
    std::size_t num_points() const { return num_points_; }

    // Flat index of the periodic neighbour x + offset*h*e_axis.
    std::size_t neighbor(std::size_t index, int axis, int offset) const;

    std::vector<int> multi_index(std::size_t index) const;
    std::size_t flat_index(std::span<const int> multi) const;
    double coordinate(std::size_t index, int axis) const;

private:
    int dim_;
    int n_;
    int steps_;
    double h_;
    double dt_;
    std::size_t num_points_;
    std::vector<std::size_t> strides_;
};

/// Real values per (time index, point), stored time-major.
class ScalarField {
public:
    ScalarField() = default;
    ScalarField(std::size_t num_times, std::size_t num_points, double fill = 0.0);

    std::size_t num_times() const { return num_times_; }
    std::size_t num_points() const { return num_points_; }

    std::span<double> slice(std::size_t t);
    std::span<const double> slice(std::size_t t) const;

    double& operator()(std::size_t t, std::size_t x) { return values_[t * num_points_ + x]; }
    double operator()(std::size_t t, std::size_t x) const { return values_[t * num_points_ + x]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

private:
    std::size_t num_times_ = 0;
    std::size_t num_points_ = 0;
    std::vector<double> values_;
};

/// R^d values per (time index, point); components contiguous per point.
class VectorField {
public:
    VectorField() = default;
    VectorField(std::size_t num_times, std::size_t num_points, int dim, double fill = 0.0);

    std::size_t num_times() const { return num_times_; }
    std::size_t num_points() const { return num_points_; }
    int dim() const { return dim_; }

    std::span<double> slice(std::size_t t);
    std::span<const double> slice(std::size_t t) const;

    std::span<double> at(std::size_t t, std::size_t x);
    std::span<const double> at(std::size_t t, std::size_t x) const;

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

private:
    std::size_t num_times_ = 0;
    std::size_t num_points_ = 0;
    int dim_ = 1;
    std::vector<double> values_;
};

// Centered periodic stencils on one spatial slice. Vector slices hold
// grid.dim() components per point.
void laplacian_h(std::span<const double> mu, const Grid& grid, std::span<double> out);
std::vector<double> laplacian_h(std::span<const double> mu, const Grid& grid);

void gradient_h(std::span<const double> mu, const Grid& grid, std::span<double> out);
std::vector<double> gradient_h(std::span<const double> mu, const Grid& grid);

void divergence_h(std::span<const double> w, const Grid& grid, std::span<double> out);
std::vector<double> divergence_h(std::span<const double> w, const Grid& grid);

std::vector<double> forward_gradient_h(std::span<const double> mu, const Grid& grid);

/**
 * Mixed norm ||mu||_{p1,p2}: outer l^{p1} norm over the first index of the
 * inner l^{p2} norms over the second index, with Euclidean norms of the
 * `components` entries per point. Pass kInfinity for the max-norm.
 * Throws ContractError when an exponent is below 1.
 */
double mixed_norm(std::span<const double> values, std::size_t outer, std::size_t inner,
                  std::size_t components, double p1, double p2);
double mixed_norm(const ScalarField& field, double p1, double p2);
double mixed_norm(const VectorField& field, double p1, double p2);

}  // namespace mfgfw
