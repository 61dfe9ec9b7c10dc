#pragma once

// Template surface, scan, landmark and similarity-transform types plus the
// discrete umbrella operators used by the smoothing term.
//
// Vertex ordering is row-major over the grid: vertex (r, c) has index
// r * cols + c. Units are millimetres throughout.

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include <cstdint>
#include <optional>
#include <type_traits>
#include <vector>

namespace mlwave {

using Index = std::int64_t;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Points = Eigen::MatrixX3d;

// Grid dimensions with subdivision connectivity: rows = a*2^L + 1 and
// cols = b*2^L + 1 for integers a, b >= 1.
struct GridSpec {
    int rows = 0;
    int cols = 0;
    int levels = 0;

    Index vertex_count() const { return Index(rows) * cols; }
    Index index(int r, int c) const { return Index(r) * cols + c; }
    int row_of(Index v) const { return int(v / cols); }
    int col_of(Index v) const { return int(v % cols); }
    // Coarsest scaling grid, (a+1) x (b+1).
    int base_rows() const { return ((rows - 1) >> levels) + 1; }
    int base_cols() const { return ((cols - 1) >> levels) + 1; }

    bool is_valid() const;
    // Throws BadGridDimensions when the subdivision form is violated.
    void validate() const;

    // Deepest L for which rows and cols have subdivision form.
    static int max_levels(int rows, int cols);

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

class QuadGridShape {
public:
    QuadGridShape() = default;
    QuadGridShape(GridSpec grid, Points positions);

    const GridSpec& grid() const { return grid_; }
    int rows() const { return grid_.rows; }
    int cols() const { return grid_.cols; }
    int levels() const { return grid_.levels; }
    Index vertex_count() const { return grid_.vertex_count(); }
    const Points& positions() const { return positions_; }
    Vec3 vertex(Index v) const { return positions_.row(v).transpose(); }

private:
    GridSpec grid_;
    Points positions_;
};

struct LandmarkSet {
    std::vector<Index> model_indices;
    Points data_points;

    Index size() const { return Index(model_indices.size()); }
    // Distinct, in range and matched in count to data_points.
    void validate(Index vertex_count) const;
};

class TargetScan {
public:
    TargetScan() = default;
    // Throws EmptyScan for no points and InvalidArgument when normals are not unit length.
    TargetScan(Points points, Points normals, std::optional<LandmarkSet> landmarks = std::nullopt);

    const Points& points() const { return points_; }
    const Points& normals() const { return normals_; }
    const std::optional<LandmarkSet>& landmarks() const { return landmarks_; }
    Index size() const { return points_.rows(); }

    TargetScan with_landmarks(std::optional<LandmarkSet> landmarks) const;

private:
    Points points_;
    Points normals_;
    std::optional<LandmarkSet> landmarks_;
};

struct SimilarityTransform {
    double scale = 1.0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static SimilarityTransform identity() { return {}; }

    Vec3 apply(const Vec3& x) const { return scale * (rotation * x) + translation; }
    Points apply(const Points& xs) const;
    // Linear part, scale * rotation.
    Mat3 linear() const { return scale * rotation; }
    SimilarityTransform inverse() const;
    // (*this) o other
    SimilarityTransform compose(const SimilarityTransform& other) const;

    bool is_valid() const;
};

Vec3 apply_transform(const SimilarityTransform& t, const Vec3& x);

// Closed-form least-squares similarity (Umeyama) mapping model_pts onto data_pts.
// Throws DegenerateConfiguration for fewer than 3 or collinear correspondences.
SimilarityTransform estimate_similarity(const Points& model_pts, const Points& data_pts);

// Single umbrella on the 4-connected grid with truncated boundary stencils.
Vec3 umbrella(const QuadGridShape& shape, Index vertex);
Vec3 bi_umbrella(const QuadGridShape& shape, Index vertex);

// Whole-field versions, one row per vertex.
Points umbrella_field(const GridSpec& grid, const Points& positions);
Points bi_umbrella_field(const GridSpec& grid, const Points& positions);

namespace detail {

inline int neighbor_count(const GridSpec& g, int r, int c) {
    return (r > 0) + (r + 1 < g.rows) + (c > 0) + (c + 1 < g.cols);
}

// Umbrella of an arbitrary per-vertex field given by `at(r, c)`.
// `at` must return a concrete value (double or Vec3), not an expression.
template <class Field>
auto umbrella_at(const GridSpec& g, const Field& at, int r, int c) {
    using T = std::decay_t<decltype(at(r, c))>;
    T sum = at(r, c) * 0.0;
    int count = 0;
    if (r > 0) { sum += at(r - 1, c); ++count; }
    if (r + 1 < g.rows) { sum += at(r + 1, c); ++count; }
    if (c > 0) { sum += at(r, c - 1); ++count; }
    if (c + 1 < g.cols) { sum += at(r, c + 1); ++count; }
    T result = sum / double(count) - at(r, c);
    return result;
}

}  // namespace detail

}  // namespace mlwave
