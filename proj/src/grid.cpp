#include "mfgfw/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mfgfw/errors.hpp"

namespace mfgfw {

Grid::Grid(int dim, int points_per_axis, int time_steps)
    : dim_(dim), n_(points_per_axis), steps_(time_steps) {
    if (dim < 1) throw ConfigError("grid dimension must be positive");
    if (points_per_axis < 1) throw ConfigError("points per axis must be positive");
    if (time_steps < 1) throw ConfigError("number of time steps must be positive");
    h_ = 1.0 / static_cast<double>(n_);
    dt_ = 1.0 / static_cast<double>(steps_);
    num_points_ = 1;
    strides_.assign(static_cast<std::size_t>(dim_), 1);
    for (int i = dim_ - 1; i >= 0; --i) {
        strides_[static_cast<std::size_t>(i)] = num_points_;
        num_points_ *= static_cast<std::size_t>(n_);
    }
}

std::size_t Grid::neighbor(std::size_t index, int axis, int offset) const {
    const std::size_t stride = strides_[static_cast<std::size_t>(axis)];
    const auto n = static_cast<long long>(n_);
    const auto coord = static_cast<long long>((index / stride) % static_cast<std::size_t>(n_));
    long long shifted = (coord + offset) % n;
    if (shifted < 0) shifted += n;
    return index + static_cast<std::size_t>(shifted) * stride - static_cast<std::size_t>(coord) * stride;
}

std::vector<int> Grid::multi_index(std::size_t index) const {
    std::vector<int> multi(static_cast<std::size_t>(dim_));
    for (int i = 0; i < dim_; ++i) {
        multi[static_cast<std::size_t>(i)] =
            static_cast<int>((index / strides_[static_cast<std::size_t>(i)]) % static_cast<std::size_t>(n_));
    }
    return multi;
}

std::size_t Grid::flat_index(std::span<const int> multi) const {
    std::size_t index = 0;
    for (int i = 0; i < dim_; ++i) {
        int c = multi[static_cast<std::size_t>(i)] % n_;
        if (c < 0) c += n_;
        index += static_cast<std::size_t>(c) * strides_[static_cast<std::size_t>(i)];
    }
    return index;
}

double Grid::coordinate(std::size_t index, int axis) const {
    const auto c = (index / strides_[static_cast<std::size_t>(axis)]) % static_cast<std::size_t>(n_);
    return static_cast<double>(c) * h_;
}

ScalarField::ScalarField(std::size_t num_times, std::size_t num_points, double fill)
    : num_times_(num_times), num_points_(num_points), values_(num_times * num_points, fill) {}

std::span<double> ScalarField::slice(std::size_t t) {
    return std::span<double>(values_).subspan(t * num_points_, num_points_);
}

std::span<const double> ScalarField::slice(std::size_t t) const {
    return std::span<const double>(values_).subspan(t * num_points_, num_points_);
}

VectorField::VectorField(std::size_t num_times, std::size_t num_points, int dim, double fill)
    : num_times_(num_times),
      num_points_(num_points),
      dim_(dim),
      values_(num_times * num_points * static_cast<std::size_t>(dim), fill) {}

std::span<double> VectorField::slice(std::size_t t) {
    const std::size_t len = num_points_ * static_cast<std::size_t>(dim_);
    return std::span<double>(values_).subspan(t * len, len);
}

std::span<const double> VectorField::slice(std::size_t t) const {
    const std::size_t len = num_points_ * static_cast<std::size_t>(dim_);
    return std::span<const double>(values_).subspan(t * len, len);
}

std::span<double> VectorField::at(std::size_t t, std::size_t x) {
    const auto d = static_cast<std::size_t>(dim_);
    return std::span<double>(values_).subspan((t * num_points_ + x) * d, d);
}

std::span<const double> VectorField::at(std::size_t t, std::size_t x) const {
    const auto d = static_cast<std::size_t>(dim_);
    return std::span<const double>(values_).subspan((t * num_points_ + x) * d, d);
}

namespace {

void check_slice(std::size_t got, std::size_t want, const char* what) {
    if (got != want) {
        throw ContractError(std::string(what) + ": slice has " + std::to_string(got) +
                            " entries, expected " + std::to_string(want));
    }
}

}  // namespace

void laplacian_h(std::span<const double> mu, const Grid& grid, std::span<double> out) {
    const std::size_t n = grid.num_points();
    check_slice(mu.size(), n, "laplacian_h");
    check_slice(out.size(), n, "laplacian_h");
    const double inv_h2 = 1.0 / (grid.h() * grid.h());
    if (grid.dim() == 1) {
        for (std::size_t x = 0; x < n; ++x) {
            const std::size_t xp = (x + 1 == n) ? 0 : x + 1;
            const std::size_t xm = (x == 0) ? n - 1 : x - 1;
            out[x] = (mu[xp] + mu[xm] - 2.0 * mu[x]) * inv_h2;
        }
        return;
    }
    for (std::size_t x = 0; x < n; ++x) {
        double acc = 0.0;
        for (int i = 0; i < grid.dim(); ++i) {
            acc += mu[grid.neighbor(x, i, 1)] + mu[grid.neighbor(x, i, -1)] - 2.0 * mu[x];
        }
        out[x] = acc * inv_h2;
    }
}

std::vector<double> laplacian_h(std::span<const double> mu, const Grid& grid) {
    std::vector<double> out(grid.num_points());
    laplacian_h(mu, grid, out);
    return out;
}

void gradient_h(std::span<const double> mu, const Grid& grid, std::span<double> out) {
    const std::size_t n = grid.num_points();
    const auto d = static_cast<std::size_t>(grid.dim());
    check_slice(mu.size(), n, "gradient_h");
    check_slice(out.size(), n * d, "gradient_h");
    const double inv_2h = 0.5 / grid.h();
    if (d == 1) {
        for (std::size_t x = 0; x < n; ++x) {
            const std::size_t xp = (x + 1 == n) ? 0 : x + 1;
            const std::size_t xm = (x == 0) ? n - 1 : x - 1;
            out[x] = (mu[xp] - mu[xm]) * inv_2h;
        }
        return;
    }
    for (std::size_t x = 0; x < n; ++x) {
        for (int i = 0; i < grid.dim(); ++i) {
            out[x * d + static_cast<std::size_t>(i)] =
                (mu[grid.neighbor(x, i, 1)] - mu[grid.neighbor(x, i, -1)]) * inv_2h;
        }
    }
}

std::vector<double> gradient_h(std::span<const double> mu, const Grid& grid) {
    std::vector<double> out(grid.num_points() * static_cast<std::size_t>(grid.dim()));
    gradient_h(mu, grid, out);
    return out;
}

void divergence_h(std::span<const double> w, const Grid& grid, std::span<double> out) {
    const std::size_t n = grid.num_points();
    const auto d = static_cast<std::size_t>(grid.dim());
    check_slice(w.size(), n * d, "divergence_h");
    check_slice(out.size(), n, "divergence_h");
    const double inv_2h = 0.5 / grid.h();
    if (d == 1) {
        for (std::size_t x = 0; x < n; ++x) {
            const std::size_t xp = (x + 1 == n) ? 0 : x + 1;
            const std::size_t xm = (x == 0) ? n - 1 : x - 1;
            out[x] = (w[xp] - w[xm]) * inv_2h;
        }
        return;
    }
    for (std::size_t x = 0; x < n; ++x) {
        double acc = 0.0;
        for (int i = 0; i < grid.dim(); ++i) {
            const auto c = static_cast<std::size_t>(i);
            acc += w[grid.neighbor(x, i, 1) * d + c] - w[grid.neighbor(x, i, -1) * d + c];
        }
        out[x] = acc * inv_2h;
    }
}

std::vector<double> divergence_h(std::span<const double> w, const Grid& grid) {
    std::vector<double> out(grid.num_points());
    divergence_h(w, grid, out);
    return out;
}

std::vector<double> forward_gradient_h(std::span<const double> mu, const Grid& grid) {
    const std::size_t n = grid.num_points();
    const auto d = static_cast<std::size_t>(grid.dim());
    check_slice(mu.size(), n, "forward_gradient_h");
    std::vector<double> out(n * d);
    for (std::size_t x = 0; x < n; ++x) {
        for (int i = 0; i < grid.dim(); ++i) {
            out[x * d + static_cast<std::size_t>(i)] = (mu[grid.neighbor(x, i, 1)] - mu[x]) / grid.h();
        }
    }
    return out;
}

double mixed_norm(std::span<const double> values, std::size_t outer, std::size_t inner,
                  std::size_t components, double p1, double p2) {
    if (!(p1 >= 1.0) || !(p2 >= 1.0)) throw ContractError("mixed_norm: exponents must be >= 1");
    if (values.size() != outer * inner * components) {
        throw ContractError("mixed_norm: value count does not match outer*inner*components");
    }
    double total = 0.0;
    for (std::size_t a = 0; a < outer; ++a) {
        double inner_norm = 0.0;
        for (std::size_t b = 0; b < inner; ++b) {
            const std::size_t base = (a * inner + b) * components;
            double sq = 0.0;
            for (std::size_t c = 0; c < components; ++c) sq += values[base + c] * values[base + c];
            const double point = std::sqrt(sq);
            if (std::isinf(p2)) {
                inner_norm = std::max(inner_norm, point);
            } else {
                inner_norm += std::pow(point, p2);
            }
        }
        if (!std::isinf(p2)) inner_norm = std::pow(inner_norm, 1.0 / p2);
        if (std::isinf(p1)) {
            total = std::max(total, inner_norm);
        } else {
            total += std::pow(inner_norm, p1);
        }
    }
    return std::isinf(p1) ? total : std::pow(total, 1.0 / p1);
}

double mixed_norm(const ScalarField& field, double p1, double p2) {
    return mixed_norm(field.values(), field.num_times(), field.num_points(), 1, p1, p2);
}

double mixed_norm(const VectorField& field, double p1, double p2) {
    return mixed_norm(field.values(), field.num_times(), field.num_points(),
                      static_cast<std::size_t>(field.dim()), p1, p2);
}

}  // namespace mfgfw
