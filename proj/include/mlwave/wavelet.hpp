#pragma once

// Separable subdivision wavelet transform on the regular template grid.
//
// Each level applies 1D lifting along rows and then along columns to the
// currently active (coarse) samples, storing scaling values at even and
// detail values at odd positions in place. The 1D lifting pair realises
// cubic B-spline subdivision: synthesis with zero details reproduces the
// cubic B-spline refinement mask (1/8, 1/2, 3/4, 1/2, 1/8) in the interior
// and interpolates the end samples, so affine data has vanishing details all
// the way to the boundary.
//
// Canonical coefficient order (frozen; stored in model files as
// kCanonicalOrderingTag):
//   1. level-0 scaling block, row-major over the base grid;
//   2. for level = 1..L (fine-ward), for kind = horizontal, vertical,
//      diagonal: that block, row-major.
// Horizontal details sit at (even row, odd col), vertical at (odd row,
// even col) and diagonal at (odd row, odd col) relative to the level stride.

#include "mlwave/mesh.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace mlwave {

inline constexpr std::uint32_t kCanonicalOrderingTag = 0x4c4b5231;  // "1RKL"

enum class CoefficientKind : std::uint8_t { Scaling = 0, DetailHorizontal = 1, DetailVertical = 2, DetailDiagonal = 3 };

const char* to_string(CoefficientKind kind);

// Half-open rectangle of grid vertices.
struct VertexRect {
    int row_begin = 0;
    int row_end = 0;
    int col_begin = 0;
    int col_end = 0;

    Index size() const { return Index(row_end - row_begin) * (col_end - col_begin); }
    bool contains(int r, int c) const { return r >= row_begin && r < row_end && c >= col_begin && c < col_end; }
    VertexRect dilated(int radius, const GridSpec& g) const;

    friend bool operator==(const VertexRect&, const VertexRect&) = default;
};

struct CoefficientInfo {
    int level = 0;  // 0 for the coarse scaling block, 1..L for details
    CoefficientKind kind = CoefficientKind::Scaling;
    int row = 0;  // in-place grid position
    int col = 0;
    VertexRect support;
};

// 1D synthesis response of one unit coefficient, restricted to its nonzero range.
struct BasisProfile {
    int begin = 0;
    std::vector<double> values;

    int end() const { return begin + int(values.size()); }
    double at(int i) const { return (i >= begin && i < end()) ? values[std::size_t(i - begin)] : 0.0; }
};

// Per-grid coefficient metadata and basis functions. Immutable once built.
class WaveletLayout {
public:
    explicit WaveletLayout(const GridSpec& grid);

    static std::shared_ptr<const WaveletLayout> create(const GridSpec& grid);

    const GridSpec& grid() const { return grid_; }
    Index size() const { return Index(info_.size()); }
    int levels() const { return grid_.levels; }
    const CoefficientInfo& info(Index k) const { return info_[std::size_t(k)]; }
    // Grid vertex holding coefficient k in the in-place layout.
    Index position(Index k) const { return order_[std::size_t(k)]; }
    const std::vector<Index>& order() const { return order_; }
    // Coefficients of `level` occupy [level_begin(level), level_begin(level + 1)).
    Index level_begin(int level) const { return level_begin_[std::size_t(level)]; }
    Index level_end(int level) const { return level_begin_[std::size_t(level) + 1]; }

    // Separable basis function of coefficient k: row_profile(k)[r] * col_profile(k)[c].
    const BasisProfile& row_profile(Index k) const;
    const BasisProfile& col_profile(Index k) const;
    double basis_value(Index k, int r, int c) const { return row_profile(k).at(r) * col_profile(k).at(c); }

private:
    const BasisProfile& profile(int axis, int level, int pos) const;

    GridSpec grid_;
    std::vector<CoefficientInfo> info_;
    std::vector<Index> order_;
    std::vector<Index> level_begin_;
    // profiles_[axis][level - 1][pos]; empty entries for positions inactive at that level
    std::vector<std::vector<std::vector<BasisProfile>>> profiles_;
};

struct WaveletCoefficients {
    GridSpec grid;
    Points values;  // n x 3, canonical order

    int levels() const { return grid.levels; }
    int base_rows() const { return grid.base_rows(); }
    int base_cols() const { return grid.base_cols(); }
    Index size() const { return values.rows(); }
};

// Grid vertex of each coefficient in canonical order (k -> vertex index).
std::vector<Index> canonical_order(const GridSpec& grid);

WaveletCoefficients forward(const QuadGridShape& shape);
QuadGridShape inverse(const WaveletCoefficients& coeffs);

// Raw versions working on in-place arrays (n x 3, grid order) without reordering.
void forward_in_place(const GridSpec& grid, Points& values);
void inverse_in_place(const GridSpec& grid, Points& values);

// Exact set of vertices responding to coefficient k, row-major.
// Throws IndexOutOfRange.
std::vector<Index> coefficient_support(const WaveletLayout& layout, Index k);

namespace lifting {

// One level of 1D analysis/synthesis on an odd-length signal of 2M+1 samples
// stored with the given stride. `scratch` must hold at least 2M+1 values.
void analyze(double* data, int count, std::ptrdiff_t stride, std::span<double> scratch);
void synthesize(double* data, int count, std::ptrdiff_t stride, std::span<double> scratch);

}  // namespace lifting

}  // namespace mlwave
