#pragma once

// Three-mode tensors and truncated higher-order SVD.
//
// Layout: mode 1 fastest, then mode 2, then mode 3, i.e. element (i, j, k)
// lives at i + d1 * (j + d2 * k).
//
// Unfolding column order: the remaining two modes in ascending mode order
// with the later one fastest. Mode-2 column index is i * d3 + k, mode-3
// column index is i * d2 + j.

#include <Eigen/Core>

#include <array>
#include <vector>

namespace mlwave {

class Mode3Tensor {
public:
    Mode3Tensor() = default;
    Mode3Tensor(int d1, int d2, int d3);  // zero-filled
    Mode3Tensor(int d1, int d2, int d3, std::vector<double> values);

    int dim(int mode) const { return dims_[std::size_t(mode - 1)]; }
    const std::array<int, 3>& dims() const { return dims_; }
    std::size_t size() const { return values_.size(); }

    double& operator()(int i, int j, int k) { return values_[offset(i, j, k)]; }
    double operator()(int i, int j, int k) const { return values_[offset(i, j, k)]; }

    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }
    const double* data() const { return values_.data(); }
    double* data() { return values_.data(); }

    double squared_norm() const;

    friend bool operator==(const Mode3Tensor&, const Mode3Tensor&) = default;

private:
    std::size_t offset(int i, int j, int k) const {
        return std::size_t(i) + std::size_t(dims_[0]) * (std::size_t(j) + std::size_t(dims_[1]) * std::size_t(k));
    }

    std::array<int, 3> dims_{0, 0, 0};
    std::vector<double> values_;
};

struct HosvdResult {
    Mode3Tensor core;                    // d1 x m2 x m3
    Eigen::MatrixXd mode2_factors;       // d2 x m2, orthonormal columns
    Eigen::MatrixXd mode3_factors;       // d3 x m3, orthonormal columns
    Eigen::VectorXd mode2_singular_values;  // all d2, descending
    Eigen::VectorXd mode3_singular_values;  // all d3, descending
};

// Throws UnsupportedMode for modes other than 2 and 3.
Eigen::MatrixXd unfold(const Mode3Tensor& t, int mode);
Mode3Tensor refold(const Eigen::MatrixXd& m, int mode, const std::array<int, 3>& dims);

// Replaces each mode fiber f by m * f. Throws ShapeMismatch if m.cols() != dim(mode).
Mode3Tensor mode_product(const Mode3Tensor& t, const Eigen::MatrixXd& m, int mode);

// Truncated HOSVD along modes 2 and 3. Factors come from the eigenvectors of
// the Gram matrix of each unfolding (d_mode x d_mode), sorted by decreasing
// singular value, with each column's largest-magnitude entry made non-negative.
// A mode-2 unfolding with more rows than columns goes through the other
// Gram matrix instead so the cost stays linear in d2; directions beyond its
// rank are then an arbitrary orthonormal completion.
HosvdResult hosvd(const Mode3Tensor& t, int m2, int m3);

// core x2 U2 x3 U3
Mode3Tensor reconstruct(const HosvdResult& h);

// Left singular vectors of unfold(t, mode), sorted descending, with the sign
// convention applied. By default all d_mode columns are returned. With
// needed >= 0 a tall unfolding may instead yield only its numerically
// non-null columns (at least `needed` of them); singular_values always has
// d_mode entries.
void mode_singular_vectors(const Mode3Tensor& t, int mode, Eigen::MatrixXd& vectors, Eigen::VectorXd& singular_values,
                           Eigen::Index needed = -1);

void normalize_column_signs(Eigen::MatrixXd& m);

}  // namespace mlwave
