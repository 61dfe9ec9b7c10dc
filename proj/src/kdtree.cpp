#include "mlwave/kdtree.hpp"

#include "mlwave/error.hpp"

#include <limits>
#include <algorithm>
#include <numeric>

namespace mlwave {

namespace {
constexpr std::int32_t kLeafSize = 8;
}

KdTree::KdTree(const Points& points) : points_(points) {
    if (points_.rows() == 0) throw Error(ErrorCode::EmptyScan, "cannot index an empty point set");
    order_.resize(std::size_t(points_.rows()));
    std::iota(order_.begin(), order_.end(), Index(0));
    nodes_.reserve(std::size_t(2 * points_.rows() / kLeafSize + 2));
    build(0, std::int32_t(order_.size()), 0);
}

std::int32_t KdTree::build(std::int32_t begin, std::int32_t end, int depth) {
    const auto id = std::int32_t(nodes_.size());
    nodes_.push_back({});
    if (end - begin <= kLeafSize) {
        nodes_[std::size_t(id)].begin = begin;
        nodes_[std::size_t(id)].end = end;
        return id;
    }
    // Split along the widest extent.
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (std::int32_t i = begin; i < end; ++i) {
        const Vec3 p = points_.row(order_[std::size_t(i)]).transpose();
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    const std::int32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](Index a, Index b) {
        const double pa = points_(a, axis), pb = points_(b, axis);
        return pa < pb || (pa == pb && a < b);
    });
    const double split = points_(order_[std::size_t(mid)], axis);
    const std::int32_t left = build(begin, mid, depth + 1);
    const std::int32_t right = build(mid, end, depth + 1);
    Node& node = nodes_[std::size_t(id)];
    node.axis = axis;
    node.split = split;
    node.left = left;
    node.right = right;
    return id;
}

void KdTree::search(std::int32_t id, const Vec3& q, Hit& best) const {
    const Node& node = nodes_[std::size_t(id)];
    if (node.axis < 0) {
        for (std::int32_t i = node.begin; i < node.end; ++i) {
            const Index idx = order_[std::size_t(i)];
            const double d2 = (points_.row(idx).transpose() - q).squaredNorm();
            if (d2 < best.squared_distance || (d2 == best.squared_distance && idx < best.index)) {
                best.squared_distance = d2;
                best.index = idx;
            }
        }
        return;
    }
    const double diff = q(node.axis) - node.split;
    const std::int32_t near = diff < 0.0 ? node.left : node.right;
    const std::int32_t far = diff < 0.0 ? node.right : node.left;
    search(near, q, best);
    if (diff * diff <= best.squared_distance) search(far, q, best);
}

KdTree::Hit KdTree::nearest(const Vec3& query) const {
    Hit best;
    best.squared_distance = std::numeric_limits<double>::infinity();
    search(0, query, best);
    return best;
}

}  // namespace mlwave
