// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "mlwave/error.hpp"
#include "mlwave/evalkit.hpp"
#include "mlwave/fitting.hpp"
#include "mlwave/kdtree.hpp"
#include "mlwave/optim.hpp"
#include "mlwave/tensor.hpp"
#include "mlwave/training.hpp"
#include "mlwave/wavelet.hpp"
#include "test_util.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

using namespace mlwave;
using testutil::max_abs;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <class F>
double best_time(int repeats, F&& f) {
    double best = 1e300;
    for (int i = 0; i < repeats; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        best = std::min(best, seconds_since(t0));
    }
    return best;
}

// ---------------------------------------------------------------- wavelets

Outcome perfect_reconstruction() {
    std::mt19937_64 rng(1);
    double worst = 0.0, elapsed = 0.0;
    for (int n : {9, 17, 33, 65}) {
        const GridSpec g{n, n, GridSpec::max_levels(n, n)};
        for (int trial = 0; trial < 25; ++trial) {
            const QuadGridShape s = testutil::random_shape(rng, g, 100.0);
            const auto t0 = std::chrono::steady_clock::now();
            const QuadGridShape back = inverse(forward(s));
            elapsed += seconds_since(t0);
            worst = std::max(worst, max_abs(back.positions() - s.positions()));
        }
    }
    return {worst < 1e-9 && elapsed < 1.0, fmt("100 grids, max error %.2e, %.3f s", worst, elapsed)};
}

// One analysis step on 2m+1 samples as a dense matrix, built from the lifting
// formulas in in-place layout (even slots scaling, odd slots detail).
Eigen::MatrixXd lifting_matrix(int count) {
    const int m = count / 2;
    Eigen::MatrixXd predict = Eigen::MatrixXd::Identity(count, count);
    for (int i = 1; i < m; ++i) {
        predict(2 * i, 2 * i) = 2.0;
        predict(2 * i, 2 * i - 1) = -0.5;
        predict(2 * i, 2 * i + 1) = -0.5;
    }
    Eigen::MatrixXd detail = Eigen::MatrixXd::Identity(count, count);
    for (int i = 0; i < m; ++i) {
        detail(2 * i + 1, 2 * i) = -0.5;
        detail(2 * i + 1, 2 * i + 2) = -0.5;
    }
    Eigen::MatrixXd update = Eigen::MatrixXd::Identity(count, count);
    for (int i = 0; i <= m; ++i) {
        if (i > 0) update(2 * i, 2 * i - 1) = 0.375;
        if (i < m) update(2 * i, 2 * i + 1) = 0.375;
    }
    return update * detail * predict;
}

// Full forward operator on one channel, rows in canonical order.
Eigen::MatrixXd forward_matrix(const GridSpec& g) {
    const Index n = g.vertex_count();
    Eigen::MatrixXd total = Eigen::MatrixXd::Identity(n, n);
    for (int level = g.levels; level >= 1; --level) {
        const int s = 1 << (g.levels - level);
        const int nr = (g.rows - 1) / s + 1, nc = (g.cols - 1) / s + 1;
        const Eigen::MatrixXd ar = lifting_matrix(nr), ac = lifting_matrix(nc);
        Eigen::MatrixXd step = Eigen::MatrixXd::Identity(n, n);
        for (int a = 0; a < nr; ++a)
            for (int b = 0; b < nc; ++b)
                for (int a2 = 0; a2 < nr; ++a2)
                    for (int b2 = 0; b2 < nc; ++b2)
                        step(g.index(a * s, b * s), g.index(a2 * s, b2 * s)) = ar(a, a2) * ac(b, b2);
        total = step * total;
    }
    std::vector<Index> order;
    const int coarse = 1 << g.levels;
    for (int r = 0; r < g.rows; r += coarse)
        for (int c = 0; c < g.cols; c += coarse) order.push_back(g.index(r, c));
    for (int level = 1; level <= g.levels; ++level) {
        const int s = 1 << (g.levels - level);
        for (int r = 0; r < g.rows; r += 2 * s)
            for (int c = s; c < g.cols; c += 2 * s) order.push_back(g.index(r, c));
        for (int r = s; r < g.rows; r += 2 * s)
            for (int c = 0; c < g.cols; c += 2 * s) order.push_back(g.index(r, c));
        for (int r = s; r < g.rows; r += 2 * s)
            for (int c = s; c < g.cols; c += 2 * s) order.push_back(g.index(r, c));
    }
    Eigen::MatrixXd out(n, n);
    for (Index k = 0; k < n; ++k) out.row(k) = total.row(order[std::size_t(k)]);
    return out;
}

Outcome wavelet_linearity() {
    const GridSpec g{17, 17, 4};
    const Eigen::MatrixXd w = forward_matrix(g);
    std::mt19937_64 rng(2);
    double matrix_err = 0.0, linear_err = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        const QuadGridShape x = testutil::random_shape(rng, g, 50.0), y = testutil::random_shape(rng, g, 50.0);
        const double a = 1.7, b = -0.3;
        const Points fx = forward(x).values, fy = forward(y).values;
        matrix_err = std::max(matrix_err, max_abs(fx - w * x.positions()));
        const QuadGridShape z(g, a * x.positions() + b * y.positions());
        linear_err = std::max(linear_err, max_abs(forward(z).values - (a * fx + b * fy)));
    }
    return {matrix_err < 1e-10 && linear_err < 1e-10,
            fmt("17x17, explicit-matrix error %.2e, linearity error %.2e", matrix_err, linear_err)};
}

// ---------------------------------------------------------------- HOSVD

Eigen::MatrixXd fibres(const Mode3Tensor& t, int mode) {
    const int d1 = t.dim(1), d2 = t.dim(2), d3 = t.dim(3);
    Eigen::MatrixXd m(mode == 2 ? d2 : d3, mode == 2 ? d1 * d3 : d1 * d2);
    for (int i = 0; i < d1; ++i)
        for (int j = 0; j < d2; ++j)
            for (int k = 0; k < d3; ++k) {
                if (mode == 2) m(j, i * d3 + k) = t(i, j, k);
                else m(k, i * d2 + j) = t(i, j, k);
            }
    return m;
}

Eigen::MatrixXd sign_fixed(Eigen::MatrixXd m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        Eigen::Index arg = 0;
        m.col(c).cwiseAbs().maxCoeff(&arg);
        if (m(arg, c) < 0.0) m.col(c) *= -1.0;
    }
    return m;
}

Outcome hosvd_oracle() {
    std::mt19937_64 rng(3);
    double factor_err = 0.0, core_err = 0.0;
    int bound_violations = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::VectorXd v = testutil::random_vector(rng, 3 * 6 * 5);
        const Mode3Tensor t(3, 6, 5, std::vector<double>(v.data(), v.data() + v.size()));
        const int m2 = 1 + trial % 6, m3 = 1 + (trial / 6) % 5;
        const HosvdResult h = hosvd(t, m2, m3);

        const Eigen::JacobiSVD<Eigen::MatrixXd> s2(fibres(t, 2), Eigen::ComputeFullU);
        const Eigen::JacobiSVD<Eigen::MatrixXd> s3(fibres(t, 3), Eigen::ComputeFullU);
        const Eigen::MatrixXd u2 = sign_fixed(s2.matrixU().leftCols(m2)), u3 = sign_fixed(s3.matrixU().leftCols(m3));
        factor_err = std::max({factor_err, max_abs(sign_fixed(h.mode2_factors) - u2), max_abs(sign_fixed(h.mode3_factors) - u3)});

        // core = T x2 U2^T x3 U3^T
        double err2 = 0.0;
        for (int i = 0; i < 3; ++i) {
            for (int a = 0; a < m2; ++a) {
                for (int b = 0; b < m3; ++b) {
                    double c = 0.0;
                    for (int j = 0; j < 6; ++j)
                        for (int k = 0; k < 5; ++k) c += u2(j, a) * u3(k, b) * t(i, j, k);
                    core_err = std::max(core_err, std::abs(c - h.core(i, a, b)));
                }
            }
        }
        const Mode3Tensor lib = reconstruct(h);
        for (std::size_t i = 0; i < t.size(); ++i) err2 += std::pow(t.values()[i] - lib.values()[i], 2);
        double discarded = 0.0;
        for (Eigen::Index i = m2; i < s2.singularValues().size(); ++i) discarded += std::pow(s2.singularValues()(i), 2);
        for (Eigen::Index i = m3; i < s3.singularValues().size(); ++i) discarded += std::pow(s3.singularValues()(i), 2);
        if (err2 > discarded * (1.0 + 1e-10) + 1e-12) ++bound_violations;
    }
    return {factor_err < 1e-8 && core_err < 1e-8 && bound_violations == 0,
            fmt("50 tensors 3x6x5, factor error %.2e, core error %.2e, truncation-bound violations %d", factor_err,
                core_err, bound_violations)};
}

// ---------------------------------------------------------------- gradients

const GridSpec kSmallGrid{17, 17, 3};

SyntheticPopulationSpec small_population() {
    SyntheticPopulationSpec spec;
    spec.grid = kSmallGrid;
    spec.d2 = 6;
    spec.d3 = 4;
    spec.seed = 3;
    return spec;
}

// Every term is a polynomial of degree <= 4 in one block's weights, so the
// five-point central stencil is exact up to rounding; that allows a step
// large enough to resolve small gradients of large energies.
double relative_gradient_error(const optim::Objective& f, const Eigen::VectorXd& z) {
    const Eigen::VectorXd analytic = f(z).gradient;
    Eigen::VectorXd numeric(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double h = 1e-2 * (1.0 + std::abs(z(i)));
        const auto at = [&](double steps) {
            Eigen::VectorXd p = z;
            p(i) += steps * h;
            return f(p).value;
        };
        numeric(i) = (at(-2.0) - 8.0 * at(-1.0) + 8.0 * at(1.0) - at(2.0)) / (12.0 * h);
    }
    const double scale = std::max(analytic.norm(), numeric.norm());
    return scale > 0.0 ? (analytic - numeric).norm() / scale : 0.0;
}

Outcome gradient_suite() {
    TrainOptions o;
    o.landmark_indices = default_landmark_indices(kSmallGrid);
    const WaveletShapeModel model = train(generate_population(small_population()), o);
    const SyntheticFaceGenerator gen(small_population());
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<Index> pick(0, model.size() - 1);

    const char* names[5] = {"landmark", "surface", "smoothing", "temporal", "assembled"};
    double worst[5] = {0, 0, 0, 0, 0};
    int states[5] = {0, 0, 0, 0, 0};
    for (int attempt = 0; attempt < 400 && *std::min_element(states, states + 5) < 20; ++attempt) {
        FitWeights w = FitWeights::zeros(model);
        w.id_weights = testutil::random_matrix(rng, model.size(), model.m2(), 0.4);
        w.expr_weights = testutil::random_matrix(rng, model.size(), model.m3(), 0.4);
        const SimilarityTransform t = testutil::random_similarity(rng);
        const QuadGridShape shape = synthesize_shape(model, w);
        const Points coeffs = synthesize_coefficients(model, w);

        LandmarkSet lm{o.landmark_indices, Points(Index(o.landmark_indices.size()), 3)};
        for (Index i = 0; i < lm.size(); ++i) {
            lm.data_points.row(i) =
                (t.apply(shape.vertex(lm.model_indices[std::size_t(i)])) + testutil::random_vector(rng, 3, 2.0)).transpose();
        }
        CorruptionSpec cs;
        cs.pose = t;
        cs.noise_sigma = 0.5;
        cs.seed = std::uint64_t(attempt);
        const TargetScan scan = corrupt_scan(gen.sample(int(attempt % 6), int(attempt % 4)), cs);
        const KdTree tree(scan.points());
        const Correspondences corr = find_correspondences(shape.positions(), t, scan, tree, 10.0, lm.model_indices);
        const Points anchor = shape.positions() + testutil::random_points(rng, shape.vertex_count(), 0.5);

        const WeightBlock block{pick(rng), bool(attempt % 2)};
        const auto with = [&](const Eigen::VectorXd& z) {
            FitWeights wz = w;
            if (block.expression_only) {
                wz.expr_weights.row(block.coefficient) = z.transpose();
            } else {
                wz.id_weights.row(block.coefficient) = z.head(model.m2()).transpose();
                wz.expr_weights.row(block.coefficient) = z.tail(model.m3()).transpose();
            }
            return wz;
        };
        Eigen::VectorXd z0;
        if (block.expression_only) {
            z0 = w.expr_weights.row(block.coefficient).transpose();
        } else {
            z0.resize(model.m2() + model.m3());
            z0 << w.id_weights.row(block.coefficient).transpose(), w.expr_weights.row(block.coefficient).transpose();
        }

        EnergyContext ctx;
        ctx.model = &model;
        ctx.transform = t;
        ctx.landmarks = &lm;
        ctx.correspondences = &corr;
        ctx.rho_S = 100.0;
        ctx.anchor = &anchor;
        ctx.rho_T = 1.0;
        const BlockEnergy assembled(ctx, shape.positions(), coeffs, w, block);

        const std::vector<optim::Objective> terms = {
            [&](const Eigen::VectorXd& z) {
                const EnergyValue e = landmark_energy(model, with(z), t, lm, 1.0, block);
                return optim::ObjectiveEvaluation{e.value, e.gradient};
            },
            [&](const Eigen::VectorXd& z) {
                const EnergyValue e = surface_energy(model, with(z), t, corr, block);
                return optim::ObjectiveEvaluation{e.value, e.gradient};
            },
            [&](const Eigen::VectorXd& z) {
                const FitWeights wz = with(z);
                const PositionEnergy e = smoothing_energy(synthesize_shape(model, wz), 100.0);
                return optim::ObjectiveEvaluation{e.value, weight_gradient(model, wz, e.gradient, block)};
            },
            [&](const Eigen::VectorXd& z) {
                const FitWeights wz = with(z);
                const PositionEnergy e = temporal_energy(synthesize_shape(model, wz), anchor, 1.0);
                return optim::ObjectiveEvaluation{e.value, weight_gradient(model, wz, e.gradient, block)};
            },
            [&](const Eigen::VectorXd& z) { return assembled(z); },
        };
        for (int term = 0; term < 5; ++term) {
            if (states[term] >= 20) continue;
            // A block whose support sees no data has an identically zero term.
            if (terms[std::size_t(term)](z0).gradient.norm() < 1e-9) continue;
            worst[term] = std::max(worst[term], relative_gradient_error(terms[std::size_t(term)], z0));
            ++states[term];
        }
    }
    Outcome out{true, ""};
    for (int term = 0; term < 5; ++term) {
        out.pass = out.pass && states[term] == 20 && worst[term] < 1e-4;
        out.detail += fmt("%s%s %.1e (%d states)", term ? ", " : "", names[term], worst[term], states[term]);
    }
    return out;
}

// ---------------------------------------------------------------- optimizer

optim::ObjectiveEvaluation rosenbrock(const Eigen::VectorXd& x, double a) {
    optim::ObjectiveEvaluation e{0.0, Eigen::VectorXd::Zero(x.size())};
    for (Eigen::Index i = 0; i + 1 < x.size(); ++i) {
        const double t = x(i + 1) - x(i) * x(i), u = a - x(i);
        e.value += 100.0 * t * t + u * u;
        e.gradient(i) += -400.0 * t * x(i) - 2.0 * u;
        e.gradient(i + 1) += 200.0 * t;
    }
    return e;
}

Outcome optimizer_parity() {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> weight(0.1, 10.0);
    optim::MinimizeOptions tight;
    tight.grad_tol = 1e-10;
    tight.max_iters = 500;
    double clamp_err = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::VectorXd c = testutil::random_vector(rng, 6, 2.0);
        Eigen::VectorXd a(6);
        for (double& ai : a) ai = weight(rng);
        const optim::BoxBounds box = optim::BoxBounds::uniform(6, -0.5, 1.3);
        const optim::Objective f = [&](const Eigen::VectorXd& x) {
            return optim::ObjectiveEvaluation{a.dot((x - c).cwiseAbs2()), 2.0 * a.cwiseProduct(x - c)};
        };
        const optim::MinimizeResult r = optim::minimize(f, testutil::random_vector(rng, 6), box, tight);
        clamp_err = std::max(clamp_err, max_abs(r.x - box.clamp(c)));
    }

    // Rosenbrock with a = 2.5 puts the minimiser against the upper bounds.
    const optim::BoxBounds box = optim::BoxBounds::uniform(6, -2.0, 2.0);
    const double a = 2.5;
    Eigen::VectorXd x0(6);
    x0 << -1.2, 1.0, -1.2, 1.0, -1.2, 1.0;
    optim::MinimizeOptions o;
    o.max_iters = 5000;
    o.grad_tol = 1e-10;
    const optim::MinimizeResult r = optim::minimize([a](const Eigen::VectorXd& x) { return rosenbrock(x, a); }, x0, box, o);
    Eigen::VectorXd y = Eigen::VectorXd::Constant(6, 1.8);
    for (int it = 0; it < 2000000; ++it) y = box.clamp(y - 1e-4 * rosenbrock(y, a).gradient);
    const double gap = std::abs(r.value - rosenbrock(y, a).value);
    return {clamp_err <= 1e-8 && gap <= 1e-6 && box.contains(r.x),
            fmt("clamped quadratics max error %.2e; 6-D Rosenbrock gap to projected-gradient oracle %.2e", clamp_err, gap)};
}

// ---------------------------------------------------------------- synthetic population

SyntheticPopulationSpec reference_population() {
    SyntheticPopulationSpec spec;  // 33 x 33, d2 = 10, d3 = 5
    spec.seed = 7;
    return spec;
}

double reference_train_seconds = 0.0;

const WaveletShapeModel& reference_model() {
    static const WaveletShapeModel model = [] {
        const SyntheticPopulationSpec spec = reference_population();
        TrainOptions o;
        o.landmark_indices = default_landmark_indices(spec.grid);
        const TrainingSet ts = generate_population(spec);
        const auto t0 = std::chrono::steady_clock::now();
        WaveletShapeModel m = train(ts, o);
        reference_train_seconds = seconds_since(t0);
        return m;
    }();
    return model;
}

// A face not in the training set but inside the span of its amplitudes:
// random convex combinations of the identity and expression samples.
QuadGridShape held_out_face() {
    const SyntheticFaceGenerator gen(reference_population());
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd li(gen.spec().d2), le(gen.spec().d3);
    for (double& x : li) x = u(rng);
    for (double& x : le) x = u(rng);
    li /= li.sum();
    le /= le.sum();
    return gen.shape(gen.identity_amplitudes().transpose() * li, gen.expression_amplitudes().transpose() * le);
}

TargetScan reference_scan(const QuadGridShape& truth, double sigma) {
    CorruptionSpec c;
    c.noise_sigma = sigma;
    c.seed = 11;
    c.landmark_indices = default_landmark_indices(truth.grid());
    return corrupt_scan(truth, c);
}

Outcome synthetic_recovery() {
    const WaveletShapeModel& model = reference_model();
    const QuadGridShape truth = held_out_face();
    const TargetScan clean = reference_scan(truth, 0.0), noisy = reference_scan(truth, 0.5);
    const ErrorReport rc = distance_to_data(fit(model, clean).aligned_shape(), clean);
    const ErrorReport rn = distance_to_data(fit(model, noisy).aligned_shape(), noisy);
    return {reference_train_seconds < 10.0 && rc.mean < 0.1 && rn.median < 0.5 && rn.fraction_below_1mm > 0.9,
            fmt("train %.2f s; noiseless mean %.3f mm; sigma 0.5: median %.3f mm, %.1f%% below 1 mm",
                reference_train_seconds, rc.mean, rn.median, 100.0 * rn.fraction_below_1mm)};
}

Outcome occlusion_robustness() {
    const WaveletShapeModel& model = reference_model();
    const QuadGridShape truth = held_out_face();
    CorruptionSpec c;
    c.noise_sigma = 0.5;
    c.seed = 11;
    c.landmark_indices = default_landmark_indices(truth.grid());
    c.occlusion_fraction = 0.3;
    c.occlusion_center = truth.vertex(truth.grid().index(12, 20));
    const TargetScan scan = corrupt_scan(truth, c);
    const TargetScan full = reference_scan(truth, 0.0);
    const std::vector<Index> occluded = vertices_in_sphere(truth, *resolve_occluder(truth, c));
    const double removed = 1.0 - double(scan.size()) / double(full.size());

    const FitResult r = fit(model, scan);
    const ErrorReport rep = distance_to_data(r.aligned_shape(), scan, occluded);

    // Every weight of a coefficient touching the occluded region stays in the
    // lambda = 0.5 box, unless initialisation already left it outside; such a
    // relaxed bound is the initial value, itself inside the lambda_init = 1 box.
    const std::set<Index> occ(occluded.begin(), occluded.end());
    int coefficients = 0, relaxed = 0, violations = 0;
    const auto check = [&](double w, double lo, double hi) {
        if (w < lo || w > hi) ++violations;
        if (lo < -0.5 || hi > 0.5) {
            if (lo < -1.0 - 1e-12 || hi > 1.0 + 1e-12) ++violations;
            if (std::abs(w) > 0.5) ++relaxed;
        } else if (std::abs(w) > 0.5 + 1e-12) {
            ++violations;
        }
    };
    for (Index k = 0; k < model.size(); ++k) {
        const std::vector<Index> sup = coefficient_support(model.layout(), k);
        if (std::none_of(sup.begin(), sup.end(), [&](Index v) { return occ.count(v) > 0; })) continue;
        ++coefficients;
        for (Eigen::Index j = 0; j < model.m2(); ++j)
            check(r.weights.id_weights(k, j), r.lower_bounds.id_weights(k, j), r.upper_bounds.id_weights(k, j));
        for (Eigen::Index j = 0; j < model.m3(); ++j)
            check(r.weights.expr_weights(k, j), r.lower_bounds.expr_weights(k, j), r.upper_bounds.expr_weights(k, j));
    }
    return {rep.median < 0.7 && violations == 0,
            fmt("%.1f%% of points removed, %zu vertices masked; median %.3f mm; %d occluded-region coefficients, "
                "%d relaxed weights, %d box violations",
                100.0 * removed, occluded.size(), rep.median, coefficients, relaxed, violations)};
}

Outcome tracking() {
    const WaveletShapeModel& model = reference_model();
    const SyntheticPopulationSpec spec = reference_population();
    const SyntheticFaceGenerator gen(spec);
    const std::vector<Index> lmk = default_landmark_indices(spec.grid);
    const Eigen::VectorXd id = gen.identity_amplitudes().colwise().mean().transpose();
    const Eigen::VectorXd e0 = gen.expression_amplitudes().row(0).transpose();
    const Eigen::VectorXd e1 = gen.expression_amplitudes().row(1).transpose();
    const int frames = 20;

    std::vector<TargetScan> moving, still;
    for (int t = 0; t < frames; ++t) {
        const double a = double(t) / (frames - 1);
        CorruptionSpec c;
        c.seed = std::uint64_t(100 + t);
        if (t == 0) c.landmark_indices = lmk;
        moving.push_back(corrupt_scan(gen.shape(id, (1.0 - a) * e0 + a * e1), c));
        c.landmark_indices = lmk;
        still.push_back(corrupt_scan(gen.shape(id, e0), c));
    }

    const std::vector<FitResult> rm = track(model, moving);
    bool identity_fixed = true;
    double worst_mean = 0.0;
    for (int t = 0; t < frames; ++t) {
        identity_fixed = identity_fixed && rm[std::size_t(t)].weights.id_weights == rm[0].weights.id_weights;
        worst_mean = std::max(worst_mean, distance_to_data(rm[std::size_t(t)].aligned_shape(), moving[std::size_t(t)]).mean);
    }

    FitConfig cfg;
    cfg.min_decrease = 1e-8;
    const std::vector<FitResult> rs = track(model, still, cfg);
    double drift = 0.0;
    for (int t = 1; t < frames; ++t) {
        drift = std::max(drift, max_abs(rs[std::size_t(t)].aligned_shape().positions() -
                                        rs[std::size_t(t) - 1].aligned_shape().positions()));
    }
    return {identity_fixed && worst_mean < 0.5 && drift < 1e-6,
            fmt("20 frames; identity weights %s; worst per-frame mean %.3f mm; constant-sequence drift %.2e mm",
                identity_fixed ? "bit-identical" : "CHANGED", worst_mean, drift)};
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += std::log(x[i]) / double(x.size());
        my += std::log(y[i]) / double(y.size());
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
        sxx += std::pow(std::log(x[i]) - mx, 2);
    }
    return sxy / sxx;
}

Outcome scaling() {
    // Training: the sample count doubles with the identity count at a fixed
    // ten expressions. Sizes are timed round-robin so that clock drift hits
    // all three alike.
    std::vector<TrainingSet> sets;
    TrainOptions train_opts;
    for (int d2 : {5, 10, 20}) {
        SyntheticPopulationSpec spec;
        spec.d2 = d2;
        spec.d3 = 10;
        sets.push_back(generate_population(spec));
        train_opts.landmark_indices = default_landmark_indices(spec.grid);
    }
    std::vector<double> train_t(3, 1e300);
    for (int rep = 0; rep < 30; ++rep) {
        for (std::size_t i = 0; i < 3; ++i) train_t[i] = std::min(train_t[i], best_time(1, [&] { train(sets[i], train_opts); }));
    }
    const double r1 = train_t[1] / train_t[0], r2 = train_t[2] / train_t[1];
    const bool train_ok = r1 >= 1.6 && r1 <= 2.6 && r2 >= 1.6 && r2 <= 2.6;

    std::vector<double> verts, fit_t;
    for (int n : {17, 33, 65}) {
        SyntheticPopulationSpec spec;
        spec.grid = GridSpec{n, n, n == 17 ? 3 : n == 33 ? 4 : 5};
        const SyntheticFaceGenerator gen(spec);
        TrainOptions o;
        o.landmark_indices = default_landmark_indices(spec.grid);
        const WaveletShapeModel m = train(generate_population(spec), o);
        CorruptionSpec c;
        c.noise_sigma = 0.5;
        c.landmark_indices = o.landmark_indices;
        const TargetScan scan = corrupt_scan(gen.sample(0, 0), c);
        FitConfig cfg;
        cfg.settle_sweeps = 20;
        cfg.min_decrease = 0.0;
        verts.push_back(double(n) * n);
        fit_t.push_back(best_time(2, [&] { fit(m, scan, cfg); }));
    }
    const double slope = loglog_slope(verts, fit_t);
    return {train_ok && slope < 1.6,
            fmt("training 50/100/200 samples %.3f/%.3f/%.3f s (ratios %.2f, %.2f); fitting 17^2/33^2/65^2 "
                "%.2f/%.2f/%.2f s (log-log slope %.2f)",
                train_t[0], train_t[1], train_t[2], r1, r2, fit_t[0], fit_t[1], fit_t[2], slope)};
}

Outcome smoothing_tradeoff() {
    const WaveletShapeModel& model = reference_model();
    const TargetScan scan = reference_scan(held_out_face(), 0.5);
    const KdTree tree(scan.points());
    double data[2], bending[2];
    for (int i = 0; i < 2; ++i) {
        FitConfig cfg;
        cfg.rho_S = i == 0 ? 0.0 : 100.0;
        const FitResult r = fit(model, scan, cfg);
        const Correspondences corr = find_correspondences(r.fitted_shape.positions(), r.transform, scan, tree, cfg.tau,
                                                          scan.landmarks()->model_indices);
        data[i] = surface_energy(r.fitted_shape, r.transform, corr).value;
        bending[i] = smoothing_energy(r.fitted_shape, 1.0).value;
    }
    return {data[0] <= data[1] && bending[1] < bending[0],
            fmt("data energy %.4g (rho_S 0) vs %.4g (rho_S 100); bi-Laplacian energy %.4g vs %.4g", data[0], data[1],
                bending[0], bending[1])};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"wavelet perfect reconstruction", perfect_reconstruction},
        {"wavelet linearity and explicit matrix", wavelet_linearity},
        {"HOSVD oracle and truncation bound", hosvd_oracle},
        {"energy gradients", gradient_suite},
        {"optimizer parity", optimizer_parity},
        {"synthetic recovery", synthetic_recovery},
        {"occlusion robustness", occlusion_robustness},
        {"tracking", tracking},
        {"scaling", scaling},
        {"smoothing trade-off", smoothing_tradeoff},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("criterion %2zu %s  %s: %s [%.1f s]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                    o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    return failures ? 1 : 0;
}
