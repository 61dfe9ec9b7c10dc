#include "mlwave/mesh.hpp"

#include "mlwave/error.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <string>
#include <unordered_set>

namespace mlwave {

namespace {

bool has_subdivision_form(int n, int levels) {
    if (n < 2 || levels < 0 || levels > 30) return false;
    const int step = 1 << levels;
    return (n - 1) % step == 0 && (n - 1) / step >= 1;
}

}  // namespace

bool GridSpec::is_valid() const {
    return levels >= 1 && has_subdivision_form(rows, levels) && has_subdivision_form(cols, levels);
}

void GridSpec::validate() const {
    if (!is_valid()) {
        throw Error(ErrorCode::BadGridDimensions,
                    std::to_string(rows) + "x" + std::to_string(cols) + " is not of the form (a*2^L+1)x(b*2^L+1) for L=" +
                        std::to_string(levels));
    }
}

int GridSpec::max_levels(int rows, int cols) {
    int levels = 0;
    while (has_subdivision_form(rows, levels + 1) && has_subdivision_form(cols, levels + 1)) ++levels;
    return levels;
}

QuadGridShape::QuadGridShape(GridSpec grid, Points positions) : grid_(grid), positions_(std::move(positions)) {
    grid_.validate();
    if (positions_.rows() != grid_.vertex_count()) {
        throw Error(ErrorCode::InconsistentDimensions, "position count " + std::to_string(positions_.rows()) +
                                                           " does not match grid vertex count " +
                                                           std::to_string(grid_.vertex_count()));
    }
    if (!positions_.allFinite()) throw Error(ErrorCode::InvalidArgument, "shape positions contain non-finite values");
}

void LandmarkSet::validate(Index vertex_count) const {
    if (Index(model_indices.size()) != data_points.rows()) {
        throw Error(ErrorCode::InconsistentDimensions, "landmark index count does not match landmark point count");
    }
    std::unordered_set<Index> seen;
    for (Index v : model_indices) {
        if (v < 0 || v >= vertex_count) {
            throw Error(ErrorCode::IndexOutOfRange, "landmark vertex index " + std::to_string(v) + " out of range");
        }
        if (!seen.insert(v).second) {
            throw Error(ErrorCode::InvalidArgument, "duplicate landmark vertex index " + std::to_string(v));
        }
    }
}

TargetScan::TargetScan(Points points, Points normals, std::optional<LandmarkSet> landmarks)
    : points_(std::move(points)), normals_(std::move(normals)), landmarks_(std::move(landmarks)) {
    if (points_.rows() == 0) throw Error(ErrorCode::EmptyScan, "scan has no points");
    if (normals_.rows() != points_.rows()) {
        throw Error(ErrorCode::InconsistentDimensions, "scan points and normals differ in count");
    }
    for (Index i = 0; i < normals_.rows(); ++i) {
        if (std::abs(normals_.row(i).norm() - 1.0) > 1e-6) {
            throw Error(ErrorCode::InvalidArgument, "scan normal " + std::to_string(i) + " is not unit length");
        }
    }
    if (!points_.allFinite()) throw Error(ErrorCode::InvalidArgument, "scan points contain non-finite values");
}

TargetScan TargetScan::with_landmarks(std::optional<LandmarkSet> landmarks) const {
    TargetScan copy = *this;
    copy.landmarks_ = std::move(landmarks);
    return copy;
}

Points SimilarityTransform::apply(const Points& xs) const {
    Points out = (xs * linear().transpose()).rowwise() + translation.transpose();
    return out;
}

SimilarityTransform SimilarityTransform::inverse() const {
    SimilarityTransform inv;
    inv.scale = 1.0 / scale;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.scale * (inv.rotation * translation));
    return inv;
}

SimilarityTransform SimilarityTransform::compose(const SimilarityTransform& other) const {
    SimilarityTransform out;
    out.scale = scale * other.scale;
    out.rotation = rotation * other.rotation;
    out.translation = scale * (rotation * other.translation) + translation;
    return out;
}

bool SimilarityTransform::is_valid() const {
    if (!(scale > 0.0) || !std::isfinite(scale)) return false;
    if (!rotation.allFinite() || !translation.allFinite()) return false;
    const double orth = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    return orth < 1e-8 && rotation.determinant() > 0.0;
}

Vec3 apply_transform(const SimilarityTransform& t, const Vec3& x) { return t.apply(x); }

SimilarityTransform estimate_similarity(const Points& model_pts, const Points& data_pts) {
    if (model_pts.rows() != data_pts.rows()) {
        throw Error(ErrorCode::InconsistentDimensions, "correspondence sets differ in size");
    }
    const Index n = model_pts.rows();
    if (n < 3) throw Error(ErrorCode::DegenerateConfiguration, "need at least 3 correspondences");

    const Eigen::RowVector3d model_mean = model_pts.colwise().mean();
    const Eigen::RowVector3d data_mean = data_pts.colwise().mean();
    const Points model_c = model_pts.rowwise() - model_mean;
    const Points data_c = data_pts.rowwise() - data_mean;

    Eigen::JacobiSVD<Points> spread(model_c);
    const auto& sv = spread.singularValues();
    if (sv(0) <= 0.0 || sv(1) <= 1e-9 * sv(0)) {
        throw Error(ErrorCode::DegenerateConfiguration, "model correspondences are collinear");
    }

    const Mat3 cov = data_c.transpose() * model_c / double(n);
    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 fix = Mat3::Identity();
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) fix(2, 2) = -1.0;

    const double model_var = model_c.squaredNorm() / double(n);
    SimilarityTransform t;
    t.rotation = svd.matrixU() * fix * svd.matrixV().transpose();
    t.scale = (svd.singularValues().asDiagonal() * fix).trace() / model_var;
    if (!(t.scale > 0.0)) throw Error(ErrorCode::DegenerateConfiguration, "estimated scale is not positive");
    t.translation = data_mean.transpose() - t.scale * (t.rotation * model_mean.transpose());
    return t;
}

Vec3 umbrella(const QuadGridShape& shape, Index vertex) {
    const GridSpec& g = shape.grid();
    if (vertex < 0 || vertex >= g.vertex_count()) throw Error(ErrorCode::IndexOutOfRange, "vertex out of range");
    const auto at = [&](int r, int c) -> Vec3 { return shape.vertex(g.index(r, c)); };
    return detail::umbrella_at(g, at, g.row_of(vertex), g.col_of(vertex));
}

Vec3 bi_umbrella(const QuadGridShape& shape, Index vertex) {
    const GridSpec& g = shape.grid();
    if (vertex < 0 || vertex >= g.vertex_count()) throw Error(ErrorCode::IndexOutOfRange, "vertex out of range");
    const auto u = [&](int r, int c) -> Vec3 {
        const auto at = [&](int rr, int cc) -> Vec3 { return shape.vertex(g.index(rr, cc)); };
        return detail::umbrella_at(g, at, r, c);
    };
    return detail::umbrella_at(g, u, g.row_of(vertex), g.col_of(vertex));
}

Points umbrella_field(const GridSpec& g, const Points& positions) {
    Points out(g.vertex_count(), 3);
    const auto at = [&](int r, int c) -> Vec3 { return positions.row(g.index(r, c)).transpose(); };
    for (int r = 0; r < g.rows; ++r) {
        for (int c = 0; c < g.cols; ++c) out.row(g.index(r, c)) = detail::umbrella_at(g, at, r, c).transpose();
    }
    return out;
}

Points bi_umbrella_field(const GridSpec& g, const Points& positions) {
    return umbrella_field(g, umbrella_field(g, positions));
}

}  // namespace mlwave
