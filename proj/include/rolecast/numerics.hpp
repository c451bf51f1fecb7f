// SPDX-License-Identifier: Apache-2.0
//
// Minimal dense double-precision linear algebra: the Matrix type every
// weight lives in, softmax / cross-entropy, the SGD update rule, and a
// central finite-difference oracle used to validate every analytical
// gradient in the repo.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace rolecast {

class RandomStream;

struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;  // row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    std::span<const double> row(std::size_t i) const {
        return {data.data() + i * cols, cols};
    }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev,
                       RandomStream& rng);

// Bitwise equality; distinguishes -0.0 from 0.0 unlike operator==.
bool bit_identical(const Matrix& a, const Matrix& b);
std::uint64_t matrix_digest(const Matrix& m);
bool all_finite(const Matrix& m);
void require_finite(const Matrix& m, const std::string& label);

std::vector<double> matvec(const Matrix& m, std::span<const double> x);
std::vector<double> matvec_transposed(const Matrix& m, std::span<const double> x);
// m += scale * u v^T
void add_outer(Matrix& m, std::span<const double> u, std::span<const double> v,
               double scale);
// a += scale * b
void add_scaled(Matrix& a, const Matrix& b, double scale);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
std::size_t argmax_lowest(std::span<const double> v);

// Non-negative entries summing to 1 within 1e-12.
class ProbVector {
public:
    static ProbVector from_raw(std::vector<double> values);
    const std::vector<double>& values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    std::size_t size() const { return values_.size(); }

private:
    ProbVector() = default;
    std::vector<double> values_;
};

// Numerically stable (max-subtracted) softmax.
ProbVector softmax(std::span<const double> v);

// -ln p[target]; probabilities below 1e-300 are clamped to the floor.
double cross_entropy(const ProbVector& p, std::size_t target);

// Central differences (f(x+h e_ij) - f(x-h e_ij)) / 2h per entry.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& f,
                        const Matrix& x, double h);

// param - learning_rate * grad
Matrix sgd_step(const Matrix& param, const Matrix& grad, double learning_rate);

// max over entries of |a-b| / max(|a|, |b|, 1e-8)
double max_relative_error(const Matrix& a, const Matrix& b);

}  // namespace rolecast
