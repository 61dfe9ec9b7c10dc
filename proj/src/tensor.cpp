#include "mlwave/tensor.hpp"

#include "mlwave/error.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <string>

namespace mlwave {

namespace {

void check_mode(int mode) {
    if (mode != 2 && mode != 3) {
        throw Error(ErrorCode::UnsupportedMode, "mode " + std::to_string(mode) + " (only modes 2 and 3)");
    }
}

using ConstMap = Eigen::Map<const Eigen::MatrixXd>;

}  // namespace

Mode3Tensor::Mode3Tensor(int d1, int d2, int d3) : Mode3Tensor(d1, d2, d3, std::vector<double>(std::size_t(d1) * d2 * d3, 0.0)) {}

Mode3Tensor::Mode3Tensor(int d1, int d2, int d3, std::vector<double> values) : dims_{d1, d2, d3}, values_(std::move(values)) {
    if (d1 <= 0 || d2 <= 0 || d3 <= 0) throw Error(ErrorCode::ShapeMismatch, "tensor dimensions must be positive");
    if (values_.size() != std::size_t(d1) * d2 * d3) {
        throw Error(ErrorCode::ShapeMismatch, "tensor value count does not match d1*d2*d3");
    }
    for (double v : values_) {
        if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "tensor values must be finite");
    }
}

double Mode3Tensor::squared_norm() const {
    double s = 0.0;
    for (double v : values_) s += v * v;
    return s;
}

Eigen::MatrixXd unfold(const Mode3Tensor& t, int mode) {
    check_mode(mode);
    const int d1 = t.dim(1), d2 = t.dim(2), d3 = t.dim(3);
    if (mode == 2) {
        Eigen::MatrixXd m(d2, d1 * d3);
        for (int k = 0; k < d3; ++k)
            for (int j = 0; j < d2; ++j)
                for (int i = 0; i < d1; ++i) m(j, i * d3 + k) = t(i, j, k);
        return m;
    }
    Eigen::MatrixXd m(d3, d1 * d2);
    for (int k = 0; k < d3; ++k)
        for (int j = 0; j < d2; ++j)
            for (int i = 0; i < d1; ++i) m(k, i * d2 + j) = t(i, j, k);
    return m;
}

Mode3Tensor refold(const Eigen::MatrixXd& m, int mode, const std::array<int, 3>& dims) {
    check_mode(mode);
    const int d1 = dims[0], d2 = dims[1], d3 = dims[2];
    const int rows = mode == 2 ? d2 : d3;
    const int cols = mode == 2 ? d1 * d3 : d1 * d2;
    if (m.rows() != rows || m.cols() != cols) throw Error(ErrorCode::ShapeMismatch, "unfolding has wrong shape");
    Mode3Tensor t(d1, d2, d3);
    for (int k = 0; k < d3; ++k)
        for (int j = 0; j < d2; ++j)
            for (int i = 0; i < d1; ++i) t(i, j, k) = mode == 2 ? m(j, i * d3 + k) : m(k, i * d2 + j);
    return t;
}

Mode3Tensor mode_product(const Mode3Tensor& t, const Eigen::MatrixXd& m, int mode) {
    check_mode(mode);
    const int d1 = t.dim(1), d2 = t.dim(2), d3 = t.dim(3);
    if (m.cols() != t.dim(mode)) {
        throw Error(ErrorCode::ShapeMismatch, "matrix has " + std::to_string(m.cols()) + " columns, mode " +
                                                  std::to_string(mode) + " has dimension " +
                                                  std::to_string(t.dim(mode)));
    }
    const int out_dim = int(m.rows());
    if (mode == 2) {
        // Each mode-3 slice is a d1 x d2 matrix S_k; the result slice is S_k * m^T.
        Mode3Tensor out(d1, out_dim, d3);
        for (int k = 0; k < d3; ++k) {
            ConstMap slice(t.data() + std::size_t(d1) * d2 * k, d1, d2);
            Eigen::Map<Eigen::MatrixXd> dst(out.data() + std::size_t(d1) * out_dim * k, d1, out_dim);
            dst.noalias() = slice.lazyProduct(m.transpose());
        }
        return out;
    }
    // View as a (d1*d2) x d3 matrix B; the result is B * m^T.
    Mode3Tensor out(d1, d2, out_dim);
    ConstMap flat(t.data(), d1 * d2, d3);
    Eigen::Map<Eigen::MatrixXd> dst(out.data(), d1 * d2, out_dim);
    dst.noalias() = flat.lazyProduct(m.transpose());
    return out;
}

void normalize_column_signs(Eigen::MatrixXd& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        Eigen::Index arg = 0;
        m.col(c).cwiseAbs().maxCoeff(&arg);
        if (m(arg, c) < 0.0) m.col(c) = -m.col(c);
    }
}

namespace {

// Left singular vectors of `a` from the eigen-decomposition of a^T a, which
// keeps the cost linear in a.rows() when a is tall. Only the numerically
// non-null columns are returned.
void tall_left_vectors(const Eigen::MatrixXd& a, Eigen::MatrixXd& vectors, Eigen::VectorXd& singular_values) {
    const Eigen::MatrixXd gram = a.transpose().lazyProduct(a);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) throw Error(ErrorCode::SvdFailure, "eigen-decomposition did not converge");
    const Eigen::Index n = gram.rows();
    const double top = std::sqrt(std::max(0.0, eig.eigenvalues()(n - 1)));
    // Directions below this are dominated by Gram round-off (relative
    // accuracy ~sqrt(eps)) and would not come out orthonormal.
    const double floor = top * 1e-6;
    singular_values = Eigen::VectorXd::Zero(a.rows());
    Eigen::Index rank = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double sv = std::sqrt(std::max(0.0, eig.eigenvalues()(n - 1 - i)));
        singular_values(i) = sv;
        if (sv > floor) ++rank;
    }
    vectors.resize(a.rows(), rank);
    for (Eigen::Index i = 0; i < rank; ++i) {
        vectors.col(i).noalias() = a.lazyProduct(eig.eigenvectors().col(n - 1 - i)) / singular_values(i);
    }
}

}  // namespace

void mode_singular_vectors(const Mode3Tensor& t, int mode, Eigen::MatrixXd& vectors, Eigen::VectorXd& singular_values,
                           Eigen::Index needed) {
    check_mode(mode);
    const int d1 = t.dim(1), d2 = t.dim(2), d3 = t.dim(3);
    if (needed >= 0 && mode == 2 && d2 > d1 * d3) {
        // Mode-2 unfolding, d2 x (d1 d3).
        Eigen::MatrixXd a(d2, d1 * d3);
        for (int k = 0; k < d3; ++k) {
            a.middleCols(Eigen::Index(d1) * k, d1) = ConstMap(t.data() + std::size_t(d1) * d2 * k, d1, d2).transpose();
        }
        tall_left_vectors(a, vectors, singular_values);
        const Eigen::Index rank = vectors.cols();
        if (rank < needed) {
            // Pad with an orthonormal completion; these directions carry
            // zero singular value and their choice is arbitrary.
            Eigen::MatrixXd q = Eigen::MatrixXd::Identity(d2, needed);
            if (rank > 0) q = Eigen::HouseholderQR<Eigen::MatrixXd>(vectors).householderQ() * q;
            vectors.conservativeResize(Eigen::NoChange, needed);
            vectors.rightCols(needed - rank) = q.rightCols(needed - rank);
        }
        normalize_column_signs(vectors);
        return;
    }
    Eigen::MatrixXd gram;
    if (mode == 2) {
        gram = Eigen::MatrixXd::Zero(d2, d2);
        for (int k = 0; k < d3; ++k) {
            ConstMap slice(t.data() + std::size_t(d1) * d2 * k, d1, d2);
            gram.noalias() += slice.transpose().lazyProduct(slice);
        }
    } else {
        ConstMap flat(t.data(), d1 * d2, d3);
        gram.noalias() = flat.transpose().lazyProduct(flat);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) throw Error(ErrorCode::SvdFailure, "eigen-decomposition did not converge");
    const Eigen::Index n = gram.rows();
    // Eigenvalues come out ascending.
    vectors = eig.eigenvectors().rowwise().reverse();
    singular_values.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) singular_values(i) = std::sqrt(std::max(0.0, eig.eigenvalues()(n - 1 - i)));
    normalize_column_signs(vectors);
}

HosvdResult hosvd(const Mode3Tensor& t, int m2, int m3) {
    if (m2 < 1 || m2 > t.dim(2) || m3 < 1 || m3 > t.dim(3)) {
        throw Error(ErrorCode::ShapeMismatch, "truncation ranks must satisfy 1 <= m2 <= d2 and 1 <= m3 <= d3");
    }
    HosvdResult h;
    Eigen::MatrixXd u2, u3;
    mode_singular_vectors(t, 2, u2, h.mode2_singular_values, m2);
    mode_singular_vectors(t, 3, u3, h.mode3_singular_values, m3);
    h.mode2_factors = u2.leftCols(m2);
    h.mode3_factors = u3.leftCols(m3);
    h.core = mode_product(mode_product(t, h.mode2_factors.transpose(), 2), h.mode3_factors.transpose(), 3);
    return h;
}

Mode3Tensor reconstruct(const HosvdResult& h) {
    return mode_product(mode_product(h.core, h.mode2_factors, 2), h.mode3_factors, 3);
}

}  // namespace mlwave
