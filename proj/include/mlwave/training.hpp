#pragma once

#include "mlwave/mesh.hpp"
#include "mlwave/model.hpp"

#include <optional>
#include <vector>

namespace mlwave {

// d2 identities x d3 expressions, all on one template grid.
class TrainingSet {
public:
    TrainingSet(int identities, int expressions);

    int identities() const { return identities_; }
    int expressions() const { return expressions_; }

    void set(int identity, int expression, QuadGridShape shape);
    bool has(int identity, int expression) const { return cells_[cell(identity, expression)].has_value(); }
    const QuadGridShape& at(int identity, int expression) const;

    // Throws IncompleteGrid for a missing cell and InconsistentDimensions when grids differ.
    void validate() const;

private:
    std::size_t cell(int identity, int expression) const;

    int identities_;
    int expressions_;
    std::vector<std::optional<QuadGridShape>> cells_;
};

struct TrainOptions {
    int m2 = 3;
    int m3 = 3;
    int threads = 1;
    // Stored in the model; empty means no template landmarks.
    std::vector<Index> landmark_indices;
};

// Throws IncompleteGrid, InsufficientSamples and propagates transform/HOSVD errors.
WaveletShapeModel train(const TrainingSet& ts, const TrainOptions& options = {});

// Per-coefficient least-squares weights for one target coefficient value:
// Gauss-Newton over both modes, falling back to one alternating sweep when
// a step does not reduce the residual. Starts from zero weights; stops
// after `iterations` steps, on relative change below `tolerance`, or when
// no further decrease is possible.
void project_coefficient(const MultilinearCoefficientModel& m, const Vec3& target, Eigen::VectorXd& w2,
                         Eigen::VectorXd& w3, int iterations = 200, double tolerance = 1e-13);

FitWeights project_weights(const WaveletShapeModel& model, const QuadGridShape& shape);

}  // namespace mlwave
