#include "mlwave/fitting.hpp"

#include "mlwave/error.hpp"
#include "mlwave/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mlwave {

void FitConfig::validate() const {
    const auto check = [](bool ok, const char* what) {
        if (!ok) throw Error(ErrorCode::InvalidArgument, what);
    };
    check(rho_L >= 0.0, "rho_L must be >= 0");
    check(rho_S >= 0.0, "rho_S must be >= 0");
    check(rho_T >= 0.0, "rho_T must be >= 0");
    check(tau > 0.0, "tau must be > 0");
    check(min_decrease >= 0.0, "min_decrease must be >= 0");
    check(lambda_init > 0.0 && lambda_surface > 0.0, "lambda must be > 0");
    check(init_iterations >= 0 && surface_passes >= 0 && settle_sweeps >= 0, "pass counts must be >= 0");
    check(optimizer.max_iters >= 0 && optimizer.grad_tol >= 0.0 && optimizer.memory >= 1, "bad optimizer options");
}

Correspondences find_correspondences(const Points& positions, const SimilarityTransform& transform,
                                     const TargetScan& scan, const KdTree& tree, double tau,
                                     const std::vector<Index>& excluded_vertices) {
    const Index n = positions.rows();
    Correspondences corr;
    corr.points.resize(n, 3);
    corr.normals.resize(n, 3);
    corr.active.assign(std::size_t(n), 0);
    const double tau2 = tau * tau;
    for (Index v = 0; v < n; ++v) {
        const Vec3 x = transform.apply(Vec3(positions.row(v).transpose()));
        const KdTree::Hit hit = tree.nearest(x);
        corr.points.row(v) = scan.points().row(hit.index);
        corr.normals.row(v) = scan.normals().row(hit.index);
        corr.active[std::size_t(v)] = hit.squared_distance <= tau2 ? 1 : 0;
    }
    for (Index v : excluded_vertices) corr.active[std::size_t(v)] = 0;
    return corr;
}

namespace {

// Adjoint of the truncated-stencil umbrella: (U^T y)_u = -y_u + sum_{v in N(u)} y_v / |N(v)|.
Points umbrella_adjoint_field(const GridSpec& g, const Points& y) {
    Points out(g.vertex_count(), 3);
    for (int r = 0; r < g.rows; ++r) {
        for (int c = 0; c < g.cols; ++c) {
            Eigen::RowVector3d acc = -y.row(g.index(r, c));
            const auto add = [&](int rr, int cc) {
                acc += y.row(g.index(rr, cc)) / double(detail::neighbor_count(g, rr, cc));
            };
            if (r > 0) add(r - 1, c);
            if (r + 1 < g.rows) add(r + 1, c);
            if (c > 0) add(r, c - 1);
            if (c + 1 < g.cols) add(r, c + 1);
            out.row(g.index(r, c)) = acc;
        }
    }
    return out;
}

Index landmark_total(const LandmarkSet& l) { return std::max<Index>(l.size(), 1); }

}  // namespace

PositionEnergy landmark_energy(const QuadGridShape& shape, const SimilarityTransform& transform,
                               const LandmarkSet& landmarks, double rho_L) {
    landmarks.validate(shape.vertex_count());
    PositionEnergy e;
    e.gradient = Points::Zero(shape.vertex_count(), 3);
    if (landmarks.size() == 0) return e;
    const double weight = rho_L * double(shape.vertex_count()) / double(landmark_total(landmarks));
    const Mat3 a = transform.linear();
    for (Index i = 0; i < landmarks.size(); ++i) {
        const Index v = landmarks.model_indices[std::size_t(i)];
        const Vec3 r = transform.apply(shape.vertex(v)) - landmarks.data_points.row(i).transpose();
        e.value += weight * r.squaredNorm();
        e.gradient.row(v) += (2.0 * weight * (a.transpose() * r)).transpose();
    }
    return e;
}

PositionEnergy surface_energy(const QuadGridShape& shape, const SimilarityTransform& transform,
                              const Correspondences& corr) {
    const Index n = shape.vertex_count();
    if (corr.points.rows() != n) throw Error(ErrorCode::InconsistentDimensions, "correspondences do not match shape");
    PositionEnergy e;
    e.gradient = Points::Zero(n, 3);
    const Mat3 a = transform.linear();
    for (Index v = 0; v < n; ++v) {
        if (!corr.active[std::size_t(v)]) continue;
        const Vec3 nrm = corr.normals.row(v).transpose();
        const double d = nrm.dot(transform.apply(shape.vertex(v)) - corr.points.row(v).transpose());
        e.value += d * d;
        e.gradient.row(v) = (2.0 * d * (a.transpose() * nrm)).transpose();
    }
    return e;
}

PositionEnergy smoothing_energy(const QuadGridShape& shape, double rho_S) {
    PositionEnergy e;
    if (rho_S == 0.0) {
        e.gradient = Points::Zero(shape.vertex_count(), 3);
        return e;
    }
    const GridSpec& g = shape.grid();
    const Points bi = bi_umbrella_field(g, shape.positions());
    e.value = rho_S * bi.squaredNorm();
    e.gradient = 2.0 * rho_S * umbrella_adjoint_field(g, umbrella_adjoint_field(g, bi));
    return e;
}

PositionEnergy temporal_energy(const QuadGridShape& shape, const Points& anchor, double rho_T) {
    if (anchor.rows() != shape.vertex_count()) throw Error(ErrorCode::InconsistentDimensions, "anchor size mismatch");
    PositionEnergy e;
    const Points diff = shape.positions() - anchor;
    e.value = rho_T * diff.squaredNorm();
    e.gradient = 2.0 * rho_T * diff;
    return e;
}

Eigen::VectorXd weight_gradient(const WaveletShapeModel& model, const FitWeights& weights, const Points& position_gradient,
                                const WeightBlock& block) {
    const Index k = block.coefficient;
    if (k < 0 || k >= model.size()) throw Error(ErrorCode::IndexOutOfRange, "coefficient index out of range");
    const WaveletLayout& layout = model.layout();
    const GridSpec& g = model.grid();
    const VertexRect& rect = model.support(k);
    const BasisProfile& pr = layout.row_profile(k);
    const BasisProfile& pc = layout.col_profile(k);
    Vec3 d_s = Vec3::Zero();
    for (int r = rect.row_begin; r < rect.row_end; ++r) {
        for (int c = rect.col_begin; c < rect.col_end; ++c) {
            d_s += pr.at(r) * pc.at(c) * position_gradient.row(g.index(r, c)).transpose();
        }
    }
    const CoefficientJacobian jac = coefficient_jacobian(model.coefficient(k), weights.id_weights.row(k).transpose(),
                                                         weights.expr_weights.row(k).transpose());
    if (block.expression_only) return jac.d_expr.transpose() * d_s;
    Eigen::VectorXd out(model.m2() + model.m3());
    out << jac.d_id.transpose() * d_s, jac.d_expr.transpose() * d_s;
    return out;
}

EnergyValue landmark_energy(const WaveletShapeModel& model, const FitWeights& weights,
                            const SimilarityTransform& transform, const LandmarkSet& landmarks, double rho_L,
                            const WeightBlock& block) {
    const PositionEnergy e = landmark_energy(synthesize_shape(model, weights), transform, landmarks, rho_L);
    return {e.value, weight_gradient(model, weights, e.gradient, block)};
}

EnergyValue surface_energy(const WaveletShapeModel& model, const FitWeights& weights,
                           const SimilarityTransform& transform, const Correspondences& corr, const WeightBlock& block) {
    const PositionEnergy e = surface_energy(synthesize_shape(model, weights), transform, corr);
    return {e.value, weight_gradient(model, weights, e.gradient, block)};
}

EnergyValue surface_energy(const WaveletShapeModel& model, const FitWeights& weights,
                           const SimilarityTransform& transform, const TargetScan& scan, const KdTree& nn_index,
                           double tau, const WeightBlock& block) {
    const QuadGridShape shape = synthesize_shape(model, weights);
    const Correspondences corr = find_correspondences(shape.positions(), transform, scan, nn_index, tau);
    const PositionEnergy e = surface_energy(shape, transform, corr);
    return {e.value, weight_gradient(model, weights, e.gradient, block)};
}

double total_energy(const EnergyContext& ctx, const QuadGridShape& shape) {
    double e = 0.0;
    if (ctx.landmarks) e += landmark_energy(shape, ctx.transform, *ctx.landmarks, ctx.rho_L).value;
    if (ctx.correspondences) e += surface_energy(shape, ctx.transform, *ctx.correspondences).value;
    if (ctx.rho_S > 0.0) e += smoothing_energy(shape, ctx.rho_S).value;
    if (ctx.anchor) e += temporal_energy(shape, *ctx.anchor, ctx.rho_T).value;
    return e;
}

BlockEnergy::BlockEnergy(const EnergyContext& ctx, const Points& positions, const Points& coefficients,
                         const FitWeights& weights, const WeightBlock& block)
    : model_(&ctx.model->coefficient(block.coefficient)), block_(block) {
    const WaveletShapeModel& model = *ctx.model;
    const Index k = block.coefficient;
    const GridSpec& g = model.grid();
    const WaveletLayout& layout = model.layout();
    const BasisProfile& pr = layout.row_profile(k);
    const BasisProfile& pc = layout.col_profile(k);
    const VertexRect& rect = model.support(k);
    const auto phi = [&](int r, int c) { return pr.at(r) * pc.at(c); };
    const auto x_at = [&](Index v) -> Vec3 { return positions.row(v).transpose(); };

    w2_ = weights.id_weights.row(k).transpose();
    w3_ = weights.expr_weights.row(k).transpose();
    fixed_id_ = w2_;
    s0_ = coefficient_jacobian(*model_, w2_, w3_).value;
    (void)coefficients;

    const Mat3 a = ctx.transform.linear();

    if (ctx.landmarks && ctx.landmarks->size() > 0) {
        const double weight = ctx.rho_L * double(g.vertex_count()) / double(landmark_total(*ctx.landmarks));
        for (Index i = 0; i < ctx.landmarks->size(); ++i) {
            const Index v = ctx.landmarks->model_indices[std::size_t(i)];
            const int r = g.row_of(v), c = g.col_of(v);
            if (!rect.contains(r, c)) continue;
            const double f = phi(r, c);
            const Vec3 res = ctx.transform.apply(x_at(v)) - ctx.landmarks->data_points.row(i).transpose();
            constant_term_ += weight * res.squaredNorm();
            lin_ += weight * f * (a.transpose() * res);
            quad_ += weight * f * f * (a.transpose() * a);
        }
    }

    if (ctx.correspondences) {
        const Correspondences& corr = *ctx.correspondences;
        for (int r = rect.row_begin; r < rect.row_end; ++r) {
            for (int c = rect.col_begin; c < rect.col_end; ++c) {
                const Index v = g.index(r, c);
                ++distance_evaluations_;
                if (!corr.active[std::size_t(v)]) continue;
                const Vec3 nrm = corr.normals.row(v).transpose();
                const double d = nrm.dot(ctx.transform.apply(x_at(v)) - corr.points.row(v).transpose());
                const Vec3 dir = a.transpose() * nrm;
                const double f = phi(r, c);
                constant_term_ += d * d;
                lin_ += d * f * dir;
                quad_ += f * f * (dir * dir.transpose());
            }
        }
    } else if (ctx.landmarks) {
        distance_evaluations_ = rect.size();
    }

    if (ctx.anchor) {
        for (int r = rect.row_begin; r < rect.row_end; ++r) {
            for (int c = rect.col_begin; c < rect.col_end; ++c) {
                const Index v = g.index(r, c);
                const double f = phi(r, c);
                const Vec3 e = x_at(v) - ctx.anchor->row(v).transpose();
                constant_term_ += ctx.rho_T * e.squaredNorm();
                lin_ += ctx.rho_T * f * e;
                quad_ += ctx.rho_T * f * f * Mat3::Identity();
            }
        }
    }

    if (ctx.rho_S > 0.0) {
        // Terms U^2(x)_v that move with s_k live in the support plus a two-ring
        // halo; evaluating them needs U on a three-ring halo.
        const VertexRect halo = rect.dilated(2, g);
        const VertexRect outer = rect.dilated(3, g);
        const int h = outer.row_end - outer.row_begin;
        const int w = outer.col_end - outer.col_begin;
        std::vector<Vec3> lap_x(std::size_t(h) * w);
        std::vector<double> lap_phi(std::size_t(h) * w);
        const auto local = [&](int r, int c) { return std::size_t(r - outer.row_begin) * w + (c - outer.col_begin); };
        const auto pos_at = [&](int r, int c) -> Vec3 { return x_at(g.index(r, c)); };
        for (int r = outer.row_begin; r < outer.row_end; ++r) {
            for (int c = outer.col_begin; c < outer.col_end; ++c) {
                lap_x[local(r, c)] = detail::umbrella_at(g, pos_at, r, c);
                lap_phi[local(r, c)] = detail::umbrella_at(g, phi, r, c);
            }
        }
        const auto lx = [&](int r, int c) -> Vec3 { return lap_x[local(r, c)]; };
        const auto lp = [&](int r, int c) -> double { return lap_phi[local(r, c)]; };
        double gg = 0.0;
        for (int r = halo.row_begin; r < halo.row_end; ++r) {
            for (int c = halo.col_begin; c < halo.col_end; ++c) {
                const Vec3 r0 = detail::umbrella_at(g, lx, r, c);
                const double gv = detail::umbrella_at(g, lp, r, c);
                constant_term_ += ctx.rho_S * r0.squaredNorm();
                lin_ += ctx.rho_S * gv * r0;
                gg += gv * gv;
            }
        }
        quad_ += ctx.rho_S * gg * Mat3::Identity();
    }

    constant_ = quad_.isZero(0.0) && lin_.isZero(0.0);
}

Eigen::VectorXd BlockEnergy::initial() const {
    if (block_.expression_only) return w3_;
    Eigen::VectorXd z(w2_.size() + w3_.size());
    z << w2_, w3_;
    return z;
}

Vec3 BlockEnergy::coefficient_value(const Eigen::VectorXd& z) const {
    if (block_.expression_only) return synthesize_coefficient(*model_, fixed_id_, z);
    return synthesize_coefficient(*model_, z.head(model_->m2()), z.tail(model_->m3()));
}

optim::ObjectiveEvaluation BlockEnergy::operator()(const Eigen::VectorXd& z) const {
    const CoefficientJacobian jac = block_.expression_only
                                        ? coefficient_jacobian(*model_, fixed_id_, z)
                                        : coefficient_jacobian(*model_, z.head(model_->m2()), z.tail(model_->m3()));
    const Vec3 delta = jac.value - s0_;
    const Vec3 quad_delta = quad_ * delta;
    optim::ObjectiveEvaluation out;
    out.value = constant_term_ + 2.0 * lin_.dot(delta) + delta.dot(quad_delta);
    const Vec3 d_s = 2.0 * (lin_ + quad_delta);
    if (block_.expression_only) {
        out.gradient = jac.d_expr.transpose() * d_s;
    } else {
        out.gradient.resize(model_->m2() + model_->m3());
        out.gradient << jac.d_id.transpose() * d_s, jac.d_expr.transpose() * d_s;
    }
    return out;
}

optim::BoxBounds prior_bounds(double lambda, Eigen::Index size) { return optim::BoxBounds::uniform(size, -lambda, lambda); }

optim::BoxBounds prior_bounds(double lambda, const Eigen::VectorXd& initial) {
    if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be > 0");
    optim::BoxBounds b = prior_bounds(lambda, initial.size());
    b.lower = b.lower.cwiseMin(initial);
    b.upper = b.upper.cwiseMax(initial);
    return b;
}

const char* to_string(FitStage stage) {
    switch (stage) {
        case FitStage::Initialization: return "init";
        case FitStage::Surface: return "surface";
        case FitStage::Settle: return "settle";
        case FitStage::Tracking: return "track";
    }
    return "unknown";
}

QuadGridShape FitResult::aligned_shape() const {
    return QuadGridShape(fitted_shape.grid(), transform.apply(fitted_shape.positions()));
}

namespace {

class Fitter {
public:
    Fitter(const WaveletShapeModel& model, const TargetScan& scan, const FitConfig& config)
        : model_(model), scan_(scan), config_(config), tree_(scan.points()), order_(canonical_order(model.grid())) {
        config_.validate();
        if (scan.landmarks()) {
            scan.landmarks()->validate(model.grid().vertex_count());
            if (scan.landmarks()->size() > 0) landmarks_ = &*scan.landmarks();
        }
        if (landmarks_) excluded_ = landmarks_->model_indices;
        weights_ = FitWeights::zeros(model);
        lower_ = FitWeights{Eigen::MatrixXd::Constant(model.size(), model.m2(), -config.lambda_surface),
                            Eigen::MatrixXd::Constant(model.size(), model.m3(), -config.lambda_surface)};
        upper_ = FitWeights{-lower_.id_weights, -lower_.expr_weights};
    }

    void set_weights(const FitWeights& w) { weights_ = w; }
    void set_transform(const SimilarityTransform& t) { transform_ = t; }
    void set_anchor(const Points* anchor) { anchor_ = anchor; }
    void set_expression_only(bool on) { expression_only_ = on; }

    // Surface-stage boxes relaxed around the current weights.
    void relax_bounds_around_current() {
        const double lam = config_.lambda_surface;
        lower_.id_weights = weights_.id_weights.cwiseMin(-lam);
        upper_.id_weights = weights_.id_weights.cwiseMax(lam);
        lower_.expr_weights = weights_.expr_weights.cwiseMin(-lam);
        upper_.expr_weights = weights_.expr_weights.cwiseMax(lam);
    }

    void initialize(FitResult& out) {
        if (!landmarks_) {
            out.used_landmarks = false;
            out.warnings.push_back("scan has no landmarks; initialisation skipped");
            transform_ = config_.initial_transform.value_or(SimilarityTransform::identity());
            return;
        }
        for (int level = 0; level <= model_.grid().levels; ++level) {
            for (int it = 0; it < config_.init_iterations; ++it) {
                refresh();
                estimate_transform(out);
                EnergyContext ctx = base_context();
                ctx.landmarks = landmarks_;
                ctx.rho_S = config_.rho_S;
                run_level(level, ctx, FitStage::Initialization, it, out, /*use_surface_bounds=*/false);
            }
        }
    }

    void fit_surface(FitResult& out, FitStage stage) {
        for (int level = 0; level <= model_.grid().levels; ++level) {
            for (int pass = 0; pass < config_.surface_passes; ++pass) surface_pass(level, pass, stage, out);
        }
    }

    void settle(FitResult& out) {
        for (int sweep = 0; sweep < config_.settle_sweeps; ++sweep) {
            bool changed = false;
            for (int level = 0; level <= model_.grid().levels; ++level) {
                changed |= surface_pass(level, sweep, FitStage::Settle, out);
            }
            ++out.settle_sweeps_run;
            if (!changed) break;
        }
    }

    void finish(FitResult& out) {
        out.weights = weights_;
        out.transform = transform_;
        out.fitted_shape = synthesize_shape(model_, weights_);
        out.lower_bounds = lower_;
        out.upper_bounds = upper_;
        const Points aligned = transform_.apply(out.fitted_shape.positions());
        out.per_vertex_distance.resize(std::size_t(aligned.rows()));
        for (Index v = 0; v < aligned.rows(); ++v) {
            out.per_vertex_distance[std::size_t(v)] =
                std::sqrt(tree_.nearest(aligned.row(v).transpose()).squared_distance);
        }
    }

private:
    EnergyContext base_context() const {
        EnergyContext ctx;
        ctx.model = &model_;
        ctx.transform = transform_;
        ctx.rho_L = config_.rho_L;
        return ctx;
    }

    void refresh() {
        coefficients_ = synthesize_coefficients(model_, weights_);
        positions_.resize(coefficients_.rows(), 3);
        for (std::size_t k = 0; k < order_.size(); ++k) positions_.row(order_[k]) = coefficients_.row(Index(k));
        inverse_in_place(model_.grid(), positions_);
    }

    void estimate_transform(FitResult& out) {
        const LandmarkSet& l = *landmarks_;
        Points model_pts(l.size(), 3);
        for (Index i = 0; i < l.size(); ++i) model_pts.row(i) = positions_.row(l.model_indices[std::size_t(i)]);
        try {
            transform_ = estimate_similarity(model_pts, l.data_points);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateConfiguration) throw;
            if (out.warnings.empty() || out.warnings.back() != e.what()) out.warnings.push_back(e.what());
        }
    }

    bool surface_pass(int level, int pass, FitStage stage, FitResult& out) {
        refresh();
        const Correspondences corr =
            find_correspondences(positions_, transform_, scan_, tree_, config_.tau, excluded_);
        EnergyContext ctx = base_context();
        ctx.landmarks = landmarks_;
        ctx.correspondences = &corr;
        ctx.rho_S = config_.rho_S;
        if (anchor_) {
            ctx.anchor = anchor_;
            ctx.rho_T = config_.rho_T;
        }
        return run_level(level, ctx, stage, pass, out, /*use_surface_bounds=*/true);
    }

    // Optimises every coefficient of `level` in canonical order. Returns whether any weight changed.
    bool run_level(int level, const EnergyContext& ctx, FitStage stage, int iteration, FitResult& out,
                   bool use_surface_bounds) {
        const GridSpec& g = model_.grid();
        PassTrace trace;
        trace.stage = stage;
        trace.level = level;
        trace.iteration = iteration;
        double energy = total_energy(ctx, QuadGridShape(g, positions_));
        trace.energies.push_back(energy);
        const double threshold = config_.min_decrease * std::max(1.0, energy);

        bool changed = false;
        const WaveletLayout& layout = model_.layout();
        const int m2 = model_.m2();
        for (Index k = layout.level_begin(level); k < layout.level_end(level); ++k) {
            const WeightBlock block{k, expression_only_};
            const BlockEnergy f(ctx, positions_, coefficients_, weights_, block);
            if (config_.instrument && ctx.correspondences) {
                out.block_counts.push_back({k, model_.support(k).size(), f.distance_evaluations()});
            }
            if (f.is_constant()) continue;

            const Eigen::VectorXd z0 = f.initial();
            optim::BoxBounds bounds;
            if (use_surface_bounds) {
                bounds = block_bounds(k);
            } else {
                bounds = prior_bounds(config_.lambda_init, z0.size());
            }
            const double f0 = f(z0).value;
            const optim::MinimizeResult res =
                optim::minimize([&](const Eigen::VectorXd& z) { return f(z); }, z0, bounds, config_.optimizer);
            if (!(res.value < f0 - threshold)) {
                trace.energies.push_back(energy);
                continue;
            }
            changed = true;
            if (expression_only_) {
                weights_.expr_weights.row(k) = res.x.transpose();
            } else {
                weights_.id_weights.row(k) = res.x.head(m2).transpose();
                weights_.expr_weights.row(k) = res.x.tail(model_.m3()).transpose();
            }
            const Vec3 s_new = f.coefficient_value(res.x);
            const Vec3 delta = s_new - coefficients_.row(k).transpose();
            coefficients_.row(k) = s_new.transpose();
            const VertexRect& rect = model_.support(k);
            const BasisProfile& pr = layout.row_profile(k);
            const BasisProfile& pc = layout.col_profile(k);
            for (int r = rect.row_begin; r < rect.row_end; ++r) {
                for (int c = rect.col_begin; c < rect.col_end; ++c) {
                    positions_.row(g.index(r, c)) += (pr.at(r) * pc.at(c) * delta).transpose();
                }
            }
            energy += res.value - f0;
            trace.energies.push_back(energy);
        }
        out.energy_trace.push_back(std::move(trace));
        return changed;
    }

    optim::BoxBounds block_bounds(Index k) const {
        optim::BoxBounds b;
        if (expression_only_) {
            b.lower = lower_.expr_weights.row(k).transpose();
            b.upper = upper_.expr_weights.row(k).transpose();
            return b;
        }
        const int m2 = model_.m2(), m3 = model_.m3();
        b.lower.resize(m2 + m3);
        b.upper.resize(m2 + m3);
        b.lower << lower_.id_weights.row(k).transpose(), lower_.expr_weights.row(k).transpose();
        b.upper << upper_.id_weights.row(k).transpose(), upper_.expr_weights.row(k).transpose();
        return b;
    }

    const WaveletShapeModel& model_;
    const TargetScan& scan_;
    FitConfig config_;
    KdTree tree_;
    std::vector<Index> order_;
    const LandmarkSet* landmarks_ = nullptr;
    std::vector<Index> excluded_;
    const Points* anchor_ = nullptr;
    bool expression_only_ = false;

    FitWeights weights_;
    FitWeights lower_;
    FitWeights upper_;
    SimilarityTransform transform_;
    Points coefficients_;
    Points positions_;
};

}  // namespace

FitResult fit(const WaveletShapeModel& model, const TargetScan& scan, const FitConfig& config) {
    Fitter fitter(model, scan, config);
    FitResult out;
    fitter.initialize(out);
    fitter.relax_bounds_around_current();
    fitter.fit_surface(out, FitStage::Surface);
    fitter.settle(out);
    fitter.finish(out);
    return out;
}

std::vector<FitResult> track(const WaveletShapeModel& model, const std::vector<TargetScan>& frames,
                             const FitConfig& config) {
    std::vector<FitResult> results;
    if (frames.empty()) return results;
    results.reserve(frames.size());
    results.push_back(fit(model, frames.front(), config));
    for (std::size_t t = 1; t < frames.size(); ++t) {
        const FitResult& prev = results.back();
        Fitter fitter(model, frames[t], config);
        fitter.set_weights(prev.weights);
        fitter.set_transform(prev.transform);
        fitter.set_expression_only(true);
        const Points anchor = prev.fitted_shape.positions();
        fitter.set_anchor(&anchor);
        fitter.relax_bounds_around_current();
        FitResult out;
        out.used_landmarks = frames[t].landmarks().has_value();
        fitter.fit_surface(out, FitStage::Tracking);
        fitter.settle(out);
        fitter.finish(out);
        results.push_back(std::move(out));
    }
    return results;
}

}  // namespace mlwave
