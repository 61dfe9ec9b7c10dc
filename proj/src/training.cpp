#include "mlwave/training.hpp"

#include "mlwave/error.hpp"
#include "mlwave/wavelet.hpp"

#include <exception>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

namespace mlwave {

TrainingSet::TrainingSet(int identities, int expressions)
    : identities_(identities), expressions_(expressions) {
    if (identities < 1 || expressions < 1) {
        throw Error(ErrorCode::InsufficientSamples, "training set needs at least one identity and one expression");
    }
    cells_.resize(std::size_t(identities) * std::size_t(expressions));
}

std::size_t TrainingSet::cell(int identity, int expression) const {
    if (identity < 0 || identity >= identities_ || expression < 0 || expression >= expressions_) {
        throw Error(ErrorCode::IndexOutOfRange, "training cell (" + std::to_string(identity) + ", " +
                                                    std::to_string(expression) + ") out of range");
    }
    return std::size_t(identity) + std::size_t(identities_) * std::size_t(expression);
}

void TrainingSet::set(int identity, int expression, QuadGridShape shape) { cells_[cell(identity, expression)] = std::move(shape); }

const QuadGridShape& TrainingSet::at(int identity, int expression) const {
    const auto& c = cells_[cell(identity, expression)];
    if (!c) {
        throw Error(ErrorCode::IncompleteGrid, "missing shape for identity " + std::to_string(identity) +
                                                   ", expression " + std::to_string(expression));
    }
    return *c;
}

void TrainingSet::validate() const {
    const GridSpec* grid = nullptr;
    for (int e = 0; e < expressions_; ++e) {
        for (int i = 0; i < identities_; ++i) {
            const QuadGridShape& s = at(i, e);
            if (!grid) {
                grid = &s.grid();
            } else if (!(s.grid() == *grid)) {
                throw Error(ErrorCode::InconsistentDimensions, "training shapes do not share one template grid");
            }
        }
    }
}

namespace {

MultilinearCoefficientModel train_coefficient(Mode3Tensor tensor, int m2, int m3) {
    const int d2 = tensor.dim(2), d3 = tensor.dim(3);
    MultilinearCoefficientModel out;
    auto& v = tensor.values();
    for (std::size_t idx = 0; idx < v.size(); ++idx) out.mean(Index(idx % 3)) += v[idx];
    out.mean /= double(d2) * double(d3);
    for (std::size_t idx = 0; idx < v.size(); ++idx) v[idx] -= out.mean(Index(idx % 3));

    HosvdResult h = hosvd(tensor, m2, m3);
    out.core = std::move(h.core);

    const auto mode_stats = [](const Eigen::MatrixXd& u, Eigen::VectorXd& mean, Eigen::VectorXd& scale) {
        mean = u.colwise().mean().transpose();
        scale.resize(u.cols());
        for (Eigen::Index j = 0; j < u.cols(); ++j) {
            const double var = (u.col(j).array() - mean(j)).square().mean();
            scale(j) = std::max(std::sqrt(var), kMinComponentScale);
        }
    };
    mode_stats(h.mode2_factors, out.id_mode_mean, out.id_scale);
    mode_stats(h.mode3_factors, out.expr_mode_mean, out.expr_scale);
    return out;
}

}  // namespace

WaveletShapeModel train(const TrainingSet& ts, const TrainOptions& options) {
    ts.validate();
    const int d2 = ts.identities(), d3 = ts.expressions();
    if (options.m2 < 1 || options.m3 < 1 || d2 < options.m2 || d3 < options.m3) {
        throw Error(ErrorCode::InsufficientSamples, "need d2 >= m2 >= 1 and d3 >= m3 >= 1 (d2=" + std::to_string(d2) +
                                                        ", d3=" + std::to_string(d3) + ", m2=" +
                                                        std::to_string(options.m2) + ", m3=" +
                                                        std::to_string(options.m3) + ")");
    }
    const GridSpec grid = ts.at(0, 0).grid();
    const Index n = grid.vertex_count();
    const auto order = canonical_order(grid);

    // coeffs[k * 3 * d2 * d3 + c + 3 * (i + d2 * e)], i.e. each coefficient's 3 x d2 x d3 tensor.
    const std::size_t block = std::size_t(3) * d2 * d3;
    std::vector<double> coeffs(std::size_t(n) * block);
    Points work;
    for (int e = 0; e < d3; ++e) {
        for (int i = 0; i < d2; ++i) {
            work = ts.at(i, e).positions();
            forward_in_place(grid, work);
            const std::size_t sample = std::size_t(3) * (std::size_t(i) + std::size_t(d2) * e);
            for (Index k = 0; k < n; ++k) {
                double* dst = coeffs.data() + std::size_t(k) * block + sample;
                const Index v = order[std::size_t(k)];
                dst[0] = work(v, 0);
                dst[1] = work(v, 1);
                dst[2] = work(v, 2);
            }
        }
    }

    std::vector<MultilinearCoefficientModel> models(static_cast<std::size_t>(n));
    const auto run_range = [&](Index begin, Index end) {
        for (Index k = begin; k < end; ++k) {
            const double* src = coeffs.data() + std::size_t(k) * block;
            models[std::size_t(k)] = train_coefficient(Mode3Tensor(3, d2, d3, std::vector<double>(src, src + block)),
                                                       options.m2, options.m3);
        }
    };
    const int threads = std::max(1, std::min<int>(options.threads, int(n)));
    if (threads == 1) {
        run_range(0, n);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) {
            const Index begin = n * t / threads, end = n * (t + 1) / threads;
            pool.emplace_back([&, t, begin, end] {
                try {
                    run_range(begin, end);
                } catch (...) {
                    errors[std::size_t(t)] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    const WaveletLayout layout(grid);
    std::vector<VertexRect> supports(static_cast<std::size_t>(n));
    for (Index k = 0; k < n; ++k) supports[std::size_t(k)] = layout.info(k).support;

    ModelTemplate tmpl;
    tmpl.grid = grid;
    tmpl.landmark_indices = options.landmark_indices;
    return WaveletShapeModel(std::move(tmpl), options.m2, options.m3, std::move(models), std::move(supports));
}

namespace {

// Minimum-norm solution of d * x = r over the singular directions above
// `cutoff`; smaller ones are round-off, e.g. left behind by HOSVD on
// rank-deficient populations.
Eigen::VectorXd mode_step(const Eigen::Matrix<double, 3, Eigen::Dynamic>& d, const Vec3& r, double cutoff) {
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(d, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    Eigen::VectorXd coords = svd.matrixU().transpose() * r;
    for (Eigen::Index i = 0; i < sv.size(); ++i) coords(i) = sv(i) > cutoff ? coords(i) / sv(i) : 0.0;
    return svd.matrixV() * coords;
}

}  // namespace

void project_coefficient(const MultilinearCoefficientModel& m, const Vec3& target, Eigen::VectorXd& w2,
                         Eigen::VectorXd& w3, int iterations, double tolerance) {
    const Eigen::Index m2 = m.m2(), m3 = m.m3();
    w2 = Eigen::VectorXd::Zero(m2);
    w3 = Eigen::VectorXd::Zero(m3);
    const auto residual = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
        return (target - synthesize_coefficient(m, a, b)).squaredNorm();
    };
    double current = residual(w2, w3);
    for (int it = 0; it < iterations && current > 0.0; ++it) {
        // Joint Gauss-Newton step over both modes; alternating per-mode
        // solves crawl when the two modes' directions are nearly parallel.
        const CoefficientJacobian jac = coefficient_jacobian(m, w2, w3);
        Eigen::Matrix<double, 3, Eigen::Dynamic> joint(3, m2 + m3);
        joint << jac.d_id, jac.d_expr;
        const double floor = 1e-10 * joint.norm() + 1e-14 * std::max(1.0, m.mean.norm());
        const Eigen::VectorXd step = mode_step(joint, target - jac.value, floor);
        Eigen::VectorXd n2 = w2 + step.head(m2), n3 = w3 + step.tail(m3);
        double next = residual(n2, n3);

        if (!(next < current)) {
            // Each mode alone is affine, so these solves never increase the residual.
            n2 = w2 + mode_step(jac.d_id, target - jac.value, floor);
            const CoefficientJacobian mid = coefficient_jacobian(m, n2, w3);
            n3 = w3 + mode_step(mid.d_expr, target - mid.value, floor);
            next = residual(n2, n3);
            if (!(next < current)) break;
        }
        const double change = (n2 - w2).squaredNorm() + (n3 - w3).squaredNorm();
        w2 = std::move(n2);
        w3 = std::move(n3);
        current = next;
        const double size = std::max(w2.squaredNorm() + w3.squaredNorm(), 1e-300);
        if (std::sqrt(change / size) < tolerance) break;
    }
}

FitWeights project_weights(const WaveletShapeModel& model, const QuadGridShape& shape) {
    if (!(shape.grid() == model.grid())) {
        throw Error(ErrorCode::ShapeMismatch, "shape is not on the model's template grid");
    }
    const WaveletCoefficients s = forward(shape);
    FitWeights w = FitWeights::zeros(model);
    Eigen::VectorXd w2, w3;
    for (Index k = 0; k < model.size(); ++k) {
        project_coefficient(model.coefficient(k), s.values.row(k).transpose(), w2, w3);
        w.id_weights.row(k) = w2.transpose();
        w.expr_weights.row(k) = w3.transpose();
    }
    return w;
}

}  // namespace mlwave
