#pragma once

#include "mlwave/mesh.hpp"

#include <vector>

namespace mlwave {

// Static 3D kd-tree over a point set. Queries are read-only and safe to run concurrently.
class KdTree {
public:
    KdTree() = default;
    // Throws EmptyScan for an empty point set.
    explicit KdTree(const Points& points);

    struct Hit {
        Index index = -1;
        double squared_distance = 0.0;
    };

    // Exact nearest neighbour; ties resolve to the lowest point index.
    Hit nearest(const Vec3& query) const;
    Index size() const { return Index(order_.size()); }

private:
    struct Node {
        int axis = -1;  // -1 marks a leaf
        double split = 0.0;
        std::int32_t begin = 0;  // leaf range in order_
        std::int32_t end = 0;
        std::int32_t left = -1;
        std::int32_t right = -1;
    };

    std::int32_t build(std::int32_t begin, std::int32_t end, int depth);
    void search(std::int32_t node, const Vec3& q, Hit& best) const;

    Points points_;
    std::vector<Index> order_;
    std::vector<Node> nodes_;
};

}  // namespace mlwave
