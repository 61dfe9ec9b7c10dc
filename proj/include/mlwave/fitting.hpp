#pragma once

// Robust fitting of a WaveletShapeModel to oriented point clouds, and
// expression tracking over sequences.
//
// The fit energy is E_L + E_X + E_S (+ E_T when tracking); the hyper-box
// prior is enforced as optimizer bounds on the normalised weights. Weights
// are optimised one coefficient at a time, level by level from coarse to
// fine. With correspondences and the similarity transform held fixed, every
// term is quadratic in the moved coefficient value s_k, so each block
// objective reduces to an exact 3x3 quadratic form in s_k that is assembled
// once from the coefficient's support (plus a two-ring halo for E_S).

#include "mlwave/kdtree.hpp"
#include "mlwave/mesh.hpp"
#include "mlwave/model.hpp"
#include "mlwave/optim.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mlwave {

struct FitConfig {
    double rho_L = 1.0;
    double tau = 10.0;  // mm
    double rho_S = 100.0;
    double lambda_init = 1.0;
    double lambda_surface = 0.5;
    double rho_T = 1.0;  // tracking only
    int init_iterations = 3;   // (estimate R, optimise level) rounds per level
    int surface_passes = 3;    // (rebuild correspondences, optimise level) rounds per level
    // Extra coarse-to-fine surface sweeps after the per-level schedule, stopping
    // early once a whole sweep leaves every weight unchanged. 0 disables.
    int settle_sweeps = 200;
    // A block update is kept only when it lowers the energy by more than
    // min_decrease * max(1, E) with E the total energy at the start of the
    // pass; smaller improvements leave the weights untouched. This makes a
    // converged state an exact fixed point of further sweeps.
    double min_decrease = 1e-9;
    optim::MinimizeOptions optimizer;
    // Used when the scan has no landmarks.
    std::optional<SimilarityTransform> initial_transform;
    // Record per-block distance evaluation counts.
    bool instrument = false;

    // Throws InvalidArgument for negative weights or non-positive tau/lambda.
    void validate() const;
};

// Nearest scan point per template vertex, fixed for one optimisation pass.
struct Correspondences {
    Points points;                 // n x 3, scan coordinates
    Points normals;                // n x 3
    std::vector<std::uint8_t> active;  // rho(x) = 1 and not a landmark vertex
};

Correspondences find_correspondences(const Points& positions, const SimilarityTransform& transform,
                                     const TargetScan& scan, const KdTree& tree, double tau,
                                     const std::vector<Index>& excluded_vertices = {});

// Energy value with gradient. The gradient is taken with respect to the
// normalised weights of one coefficient: [w2; w3] or w3 alone.
struct WeightBlock {
    Index coefficient = 0;
    bool expression_only = false;
};

struct EnergyValue {
    double value = 0.0;
    Eigen::VectorXd gradient;
};

// Value and gradient with respect to vertex positions (n x 3).
struct PositionEnergy {
    double value = 0.0;
    Points gradient;
};

// rho_L * |X| / |L| * sum_i |R l_i^(m) - l_i^(d)|^2
PositionEnergy landmark_energy(const QuadGridShape& shape, const SimilarityTransform& transform,
                               const LandmarkSet& landmarks, double rho_L);
// sum over active vertices of ((R x - p) . n_p)^2, correspondences frozen
PositionEnergy surface_energy(const QuadGridShape& shape, const SimilarityTransform& transform,
                              const Correspondences& corr);
// rho_S * sum |U^2(x)|^2
PositionEnergy smoothing_energy(const QuadGridShape& shape, double rho_S);
// rho_T * sum |x - anchor|^2
PositionEnergy temporal_energy(const QuadGridShape& shape, const Points& anchor, double rho_T);

// Chain a position gradient through the inverse transform and the
// coefficient model to the weights of `block`.
Eigen::VectorXd weight_gradient(const WaveletShapeModel& model, const FitWeights& weights, const Points& position_gradient,
                                const WeightBlock& block);

EnergyValue landmark_energy(const WaveletShapeModel& model, const FitWeights& weights,
                            const SimilarityTransform& transform, const LandmarkSet& landmarks, double rho_L,
                            const WeightBlock& block);
// Builds correspondences at the current state, then evaluates with them frozen.
EnergyValue surface_energy(const WaveletShapeModel& model, const FitWeights& weights,
                           const SimilarityTransform& transform, const TargetScan& scan, const KdTree& nn_index,
                           double tau, const WeightBlock& block);
EnergyValue surface_energy(const WaveletShapeModel& model, const FitWeights& weights,
                           const SimilarityTransform& transform, const Correspondences& corr, const WeightBlock& block);

// Everything held fixed during one optimisation pass. Null pointers switch terms off.
struct EnergyContext {
    const WaveletShapeModel* model = nullptr;
    SimilarityTransform transform;
    const LandmarkSet* landmarks = nullptr;
    double rho_L = 1.0;
    const Correspondences* correspondences = nullptr;
    double rho_S = 0.0;
    const Points* anchor = nullptr;
    double rho_T = 0.0;
};

double total_energy(const EnergyContext& ctx, const QuadGridShape& shape);

// The restriction of the pass energy to one coefficient's weights, as an
// exact quadratic in that coefficient's value. `positions` is the current
// surface, `coefficients` the current s (canonical order) and `weights`
// the current normalised weights.
class BlockEnergy {
public:
    BlockEnergy(const EnergyContext& ctx, const Points& positions, const Points& coefficients,
                const FitWeights& weights, const WeightBlock& block);

    // Energy of the terms touched by this block (constant parts included).
    optim::ObjectiveEvaluation operator()(const Eigen::VectorXd& z) const;
    Eigen::VectorXd initial() const;
    bool is_constant() const { return constant_; }
    Vec3 coefficient_value(const Eigen::VectorXd& z) const;
    // Vertex residuals evaluated for the data terms.
    Index distance_evaluations() const { return distance_evaluations_; }

private:
    const MultilinearCoefficientModel* model_;
    WeightBlock block_;
    Eigen::VectorXd fixed_id_;
    Eigen::VectorXd w2_;
    Eigen::VectorXd w3_;
    Vec3 s0_;
    Mat3 quad_ = Mat3::Zero();
    Vec3 lin_ = Vec3::Zero();
    double constant_term_ = 0.0;
    bool constant_ = true;
    Index distance_evaluations_ = 0;
};

// Hyper-box of half-width lambda around the mode mean (zero in normalised
// units). Components of `initial` already outside keep their value as the
// relaxed bound.
optim::BoxBounds prior_bounds(double lambda, const Eigen::VectorXd& initial);
optim::BoxBounds prior_bounds(double lambda, Eigen::Index size);

enum class FitStage { Initialization, Surface, Settle, Tracking };
const char* to_string(FitStage stage);

struct PassTrace {
    FitStage stage = FitStage::Surface;
    int level = 0;
    int iteration = 0;
    // Total pass energy before the first block, then after each block.
    std::vector<double> energies;
};

struct BlockCount {
    Index coefficient = 0;
    Index support_size = 0;
    Index distance_evaluations = 0;
};

struct FitResult {
    FitWeights weights;
    SimilarityTransform transform;
    QuadGridShape fitted_shape;  // model coordinates
    std::vector<PassTrace> energy_trace;
    std::vector<double> per_vertex_distance;  // mm, aligned vertex to nearest scan point
    // Surface-stage boxes per weight component, in normalised units.
    FitWeights lower_bounds;
    FitWeights upper_bounds;
    bool used_landmarks = true;
    std::vector<std::string> warnings;
    std::vector<BlockCount> block_counts;  // filled when FitConfig::instrument is set
    int settle_sweeps_run = 0;

    // fitted_shape mapped into scan coordinates by `transform`.
    QuadGridShape aligned_shape() const;
};

// Throws EmptyScan; a scan without landmarks skips initialisation with a warning.
FitResult fit(const WaveletShapeModel& model, const TargetScan& scan, const FitConfig& config = {});

// Frame 0 is a full fit. Later frames keep identity weights and the
// transform from frame 0 and optimise expression weights, starting from the
// previous frame, with E_T anchored at the previous frame's vertices.
std::vector<FitResult> track(const WaveletShapeModel& model, const std::vector<TargetScan>& frames,
                             const FitConfig& config = {});

}  // namespace mlwave
