// SPDX-License-Identifier: Apache-2.0

#include "rolecast/numerics.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "rolecast/errors.hpp"
#include "rolecast/rng.hpp"

namespace rolecast {

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev,
                       RandomStream& rng) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.normal(0.0, stddev);
    return m;
}

bool bit_identical(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) return false;
    return std::memcmp(a.data.data(), b.data.data(), a.size() * sizeof(double)) == 0;
}

std::uint64_t matrix_digest(const Matrix& m) {
    return fnv1a64_bytes(m.data.data(), m.size() * sizeof(double));
}

bool all_finite(const Matrix& m) {
    return std::all_of(m.data.begin(), m.data.end(),
                       [](double v) { return std::isfinite(v); });
}

void require_finite(const Matrix& m, const std::string& label) {
    if (!all_finite(m)) throw TrainingError("non-finite entries in " + label);
}

std::vector<double> matvec(const Matrix& m, std::span<const double> x) {
    if (x.size() != m.cols) throw InvalidArgument("matvec: dimension mismatch");
    std::vector<double> y(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.data.data() + i * m.cols;
        double acc = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
    return y;
}

std::vector<double> matvec_transposed(const Matrix& m, std::span<const double> x) {
    if (x.size() != m.rows) throw InvalidArgument("matvec_transposed: dimension mismatch");
    std::vector<double> y(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.data.data() + i * m.cols;
        const double xi = x[i];
        for (std::size_t j = 0; j < m.cols; ++j) y[j] += row[j] * xi;
    }
    return y;
}

void add_outer(Matrix& m, std::span<const double> u, std::span<const double> v,
               double scale) {
    if (u.size() != m.rows || v.size() != m.cols)
        throw InvalidArgument("add_outer: dimension mismatch");
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* row = m.data.data() + i * m.cols;
        const double s = scale * u[i];
        for (std::size_t j = 0; j < m.cols; ++j) row[j] += s * v[j];
    }
}

void add_scaled(Matrix& a, const Matrix& b, double scale) {
    if (!a.same_shape(b)) throw InvalidArgument("add_scaled: shape mismatch");
    for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += scale * b.data[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw InvalidArgument("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double l2_norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

std::size_t argmax_lowest(std::span<const double> v) {
    if (v.empty()) throw InvalidArgument("argmax_lowest: empty vector");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

ProbVector ProbVector::from_raw(std::vector<double> values) {
    if (values.empty()) throw InvalidArgument("probability vector must be non-empty");
    double sum = 0.0;
    for (double v : values) {
        if (!(v >= 0.0) || v > 1.0 + 1e-12)
            throw InvalidArgument("probability entries must lie in [0, 1]");
        sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw InvalidArgument("probability entries must sum to 1");
    ProbVector p;
    p.values_ = std::move(values);
    return p;
}

ProbVector softmax(std::span<const double> v) {
    if (v.empty()) throw InvalidArgument("softmax: empty vector");
    for (double x : v)
        if (!std::isfinite(x)) throw InvalidArgument("softmax: non-finite input");
    const double m = *std::max_element(v.begin(), v.end());
    std::vector<double> out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] - m);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return ProbVector::from_raw(std::move(out));
}

double cross_entropy(const ProbVector& p, std::size_t target) {
    if (target >= p.size()) throw InvalidArgument("cross_entropy: target out of range");
    double v = p[target];
    if (v < 1e-300) v = 1e-300;
    return -std::log(v);
}

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f,
                        const Matrix& x, double h) {
    if (!(h > 0.0)) throw InvalidArgument("finite_diff_grad: step must be positive");
    Matrix grad(x.rows, x.cols);
    Matrix probe = x;
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = 0; j < x.cols; ++j) {
            const double orig = probe.at(i, j);
            probe.at(i, j) = orig + h;
            const double fp = f(probe);
            probe.at(i, j) = orig - h;
            const double fm = f(probe);
            probe.at(i, j) = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm))
                throw OracleFailure("finite_diff_grad: non-finite evaluation at entry (" +
                                    std::to_string(i) + ", " + std::to_string(j) + ")");
            grad.at(i, j) = (fp - fm) / (2.0 * h);
        }
    }
    return grad;
}

Matrix sgd_step(const Matrix& param, const Matrix& grad, double learning_rate) {
    if (!param.same_shape(grad)) throw InvalidArgument("sgd_step: shape mismatch");
    if (!(learning_rate > 0.0)) throw InvalidArgument("sgd_step: learning rate must be positive");
    Matrix out = param;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] -= learning_rate * grad.data[i];
    return out;
}

double max_relative_error(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) throw InvalidArgument("max_relative_error: shape mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double ga = a.data[i];
        const double gb = b.data[i];
        const double denom = std::max({std::abs(ga), std::abs(gb), 1e-8});
        worst = std::max(worst, std::abs(ga - gb) / denom);
    }
    return worst;
}

}  // namespace rolecast
