#include "mlwave/wavelet.hpp"

#include "mlwave/error.hpp"

#include <algorithm>
#include <string>

namespace mlwave {

const char* to_string(CoefficientKind kind) {
    switch (kind) {
        case CoefficientKind::Scaling: return "scaling";
        case CoefficientKind::DetailHorizontal: return "horizontal";
        case CoefficientKind::DetailVertical: return "vertical";
        case CoefficientKind::DetailDiagonal: return "diagonal";
    }
    return "unknown";
}

VertexRect VertexRect::dilated(int radius, const GridSpec& g) const {
    return {std::max(0, row_begin - radius), std::min(g.rows, row_end + radius), std::max(0, col_begin - radius),
            std::min(g.cols, col_end + radius)};
}

namespace lifting {

double update_term(const double* d, int i, int m, std::ptrdiff_t step) {
    return 0.375 * ((i > 0 ? d[(i - 1) * step] : 0.0) + (i < m ? d[i * step] : 0.0));
}

// Samples x[0..2M]; odd samples o_i = x[2i+1].
// Analysis:  c_0 = x_0, c_M = x_2M, c_i = 2 x_2i - (o_{i-1} + o_i) / 2,
//            d_i = o_i - (c_i + c_{i+1}) / 2,
//            c_i += 3/8 (d_{i-1} + d_i)   (missing neighbours at the ends dropped).
// Synthesis inverts the three steps in reverse order. Synthesis from c
// alone is cubic B-spline subdivision. The update gives interior detail
// functions zero mean (and zero first moment by symmetry), which keeps the
// multilevel basis well conditioned for coefficient-wise fitting.
void analyze(double* data, int count, std::ptrdiff_t stride, std::span<double> scratch) {
    const int m = count / 2;
    double* x = scratch.data();
    for (int i = 0; i < count; ++i) x[i] = data[i * stride];
    double* c = data;
    double* d = data + stride;
    const std::ptrdiff_t step = 2 * stride;
    c[0] = x[0];
    c[m * step] = x[2 * m];
    for (int i = 1; i < m; ++i) c[i * step] = 2.0 * x[2 * i] - 0.5 * (x[2 * i - 1] + x[2 * i + 1]);
    for (int i = 0; i < m; ++i) d[i * step] = x[2 * i + 1] - 0.5 * (c[i * step] + c[(i + 1) * step]);
    for (int i = 0; i <= m; ++i) c[i * step] += update_term(d, i, m, step);
}

void synthesize(double* data, int count, std::ptrdiff_t stride, std::span<double> scratch) {
    const int m = count / 2;
    double* x = scratch.data();
    double* c = data;
    const double* d = data + stride;
    const std::ptrdiff_t step = 2 * stride;
    for (int i = 0; i <= m; ++i) c[i * step] -= update_term(d, i, m, step);
    for (int i = 0; i < m; ++i) x[2 * i + 1] = d[i * step] + 0.5 * (c[i * step] + c[(i + 1) * step]);
    x[0] = c[0];
    x[2 * m] = c[m * step];
    for (int i = 1; i < m; ++i) x[2 * i] = 0.5 * c[i * step] + 0.25 * (x[2 * i - 1] + x[2 * i + 1]);
    for (int i = 0; i < count; ++i) data[i * stride] = x[i];
}

}  // namespace lifting

namespace {

// Level `level` (1..L) operates on samples spaced 2^(L - level) apart.
int level_stride(const GridSpec& g, int level) { return 1 << (g.levels - level); }

// Active samples of one level viewed as an nr x nc array.
struct LevelView {
    double* base;
    int nr, nc;
    std::ptrdiff_t row_step, col_step;

    double* row(int i) const { return base + i * row_step; }
};

LevelView level_view(const GridSpec& g, int level, double* channel) {
    const int s = level_stride(g, level);
    return {channel, (g.rows - 1) / s + 1, (g.cols - 1) / s + 1, std::ptrdiff_t(s) * g.cols, s};
}

// The 1D lifting steps applied to every active column at once, sweeping
// whole rows so memory is walked in order. Arithmetic per column is the
// same as lifting::analyze / lifting::synthesize.
void analyze_columns(const LevelView& v, std::vector<double>& buf) {
    const int m = v.nr / 2, nc = v.nc;
    const std::ptrdiff_t cs = v.col_step;
    buf.resize(std::size_t(v.nr) * nc);
    const auto x = [&](int i) { return buf.data() + std::size_t(i) * nc; };
    for (int i = 0; i < v.nr; ++i)
        for (int j = 0; j < nc; ++j) x(i)[j] = v.row(i)[j * cs];
    const auto c = [&](int i) { return v.row(2 * i); };
    const auto d = [&](int i) { return v.row(2 * i + 1); };
    for (int j = 0; j < nc; ++j) c(0)[j * cs] = x(0)[j];
    for (int j = 0; j < nc; ++j) c(m)[j * cs] = x(2 * m)[j];
    for (int i = 1; i < m; ++i)
        for (int j = 0; j < nc; ++j) c(i)[j * cs] = 2.0 * x(2 * i)[j] - 0.5 * (x(2 * i - 1)[j] + x(2 * i + 1)[j]);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < nc; ++j) d(i)[j * cs] = x(2 * i + 1)[j] - 0.5 * (c(i)[j * cs] + c(i + 1)[j * cs]);
    for (int i = 0; i <= m; ++i) {
        for (int j = 0; j < nc; ++j) {
            c(i)[j * cs] += 0.375 * ((i > 0 ? d(i - 1)[j * cs] : 0.0) + (i < m ? d(i)[j * cs] : 0.0));
        }
    }
}

void synthesize_columns(const LevelView& v, std::vector<double>& buf) {
    const int m = v.nr / 2, nc = v.nc;
    const std::ptrdiff_t cs = v.col_step;
    buf.resize(std::size_t(v.nr) * nc);
    const auto x = [&](int i) { return buf.data() + std::size_t(i) * nc; };
    const auto c = [&](int i) { return v.row(2 * i); };
    const auto d = [&](int i) { return v.row(2 * i + 1); };
    for (int i = 0; i <= m; ++i) {
        for (int j = 0; j < nc; ++j) {
            c(i)[j * cs] -= 0.375 * ((i > 0 ? d(i - 1)[j * cs] : 0.0) + (i < m ? d(i)[j * cs] : 0.0));
        }
    }
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < nc; ++j) x(2 * i + 1)[j] = d(i)[j * cs] + 0.5 * (c(i)[j * cs] + c(i + 1)[j * cs]);
    for (int j = 0; j < nc; ++j) x(0)[j] = c(0)[j * cs];
    for (int j = 0; j < nc; ++j) x(2 * m)[j] = c(m)[j * cs];
    for (int i = 1; i < m; ++i)
        for (int j = 0; j < nc; ++j) x(2 * i)[j] = 0.5 * c(i)[j * cs] + 0.25 * (x(2 * i - 1)[j] + x(2 * i + 1)[j]);
    for (int i = 0; i < v.nr; ++i)
        for (int j = 0; j < nc; ++j) v.row(i)[j * cs] = x(i)[j];
}

void analyze_level(const GridSpec& g, int level, double* channel, std::vector<double>& scratch) {
    const LevelView v = level_view(g, level, channel);
    for (int i = 0; i < v.nr; ++i) lifting::analyze(v.row(i), v.nc, v.col_step, scratch);
    analyze_columns(v, scratch);
}

void synthesize_level(const GridSpec& g, int level, double* channel, std::vector<double>& scratch) {
    const LevelView v = level_view(g, level, channel);
    synthesize_columns(v, scratch);
    for (int i = 0; i < v.nr; ++i) lifting::synthesize(v.row(i), v.nc, v.col_step, scratch);
}

void check_values(const GridSpec& g, const Points& values) {
    g.validate();
    if (values.rows() != g.vertex_count()) {
        throw Error(ErrorCode::InconsistentDimensions, "coefficient count " + std::to_string(values.rows()) +
                                                           " does not match grid vertex count " +
                                                           std::to_string(g.vertex_count()));
    }
}

// 1D synthesis of a unit sample at `pos`, starting from `level`.
BasisProfile unit_profile(int length, int levels, int level, int pos) {
    std::vector<double> line(static_cast<std::size_t>(length), 0.0);
    std::vector<double> scratch(static_cast<std::size_t>(length));
    line[std::size_t(pos)] = 1.0;
    for (int l = level; l <= levels; ++l) {
        const int s = 1 << (levels - l);
        lifting::synthesize(line.data(), (length - 1) / s + 1, s, scratch);
    }
    const auto nonzero = [](double v) { return v != 0.0; };
    const auto first = std::find_if(line.begin(), line.end(), nonzero);
    const auto last = std::find_if(line.rbegin(), line.rend(), nonzero).base();
    BasisProfile p;
    p.begin = int(first - line.begin());
    p.values.assign(first, last);
    return p;
}

// Visits coefficients in canonical order.
template <class Fn>
void for_each_coefficient(const GridSpec& g, Fn&& fn) {
    const int coarse = 1 << g.levels;
    for (int r = 0; r < g.rows; r += coarse) {
        for (int c = 0; c < g.cols; c += coarse) fn(0, CoefficientKind::Scaling, r, c);
    }
    for (int level = 1; level <= g.levels; ++level) {
        const int s = 1 << (g.levels - level);
        const int s2 = 2 * s;
        for (int r = 0; r < g.rows; r += s2) {
            for (int c = s; c < g.cols; c += s2) fn(level, CoefficientKind::DetailHorizontal, r, c);
        }
        for (int r = s; r < g.rows; r += s2) {
            for (int c = 0; c < g.cols; c += s2) fn(level, CoefficientKind::DetailVertical, r, c);
        }
        for (int r = s; r < g.rows; r += s2) {
            for (int c = s; c < g.cols; c += s2) fn(level, CoefficientKind::DetailDiagonal, r, c);
        }
    }
}

}  // namespace

std::vector<Index> canonical_order(const GridSpec& grid) {
    grid.validate();
    std::vector<Index> order;
    order.reserve(std::size_t(grid.vertex_count()));
    for_each_coefficient(grid, [&](int, CoefficientKind, int r, int c) { order.push_back(grid.index(r, c)); });
    return order;
}

void forward_in_place(const GridSpec& g, Points& values) {
    check_values(g, values);
    std::vector<double> scratch(std::size_t(g.vertex_count()));
    for (int ch = 0; ch < 3; ++ch) {
        double* channel = values.col(ch).data();
        for (int level = g.levels; level >= 1; --level) analyze_level(g, level, channel, scratch);
    }
}

void inverse_in_place(const GridSpec& g, Points& values) {
    check_values(g, values);
    std::vector<double> scratch(std::size_t(g.vertex_count()));
    for (int ch = 0; ch < 3; ++ch) {
        double* channel = values.col(ch).data();
        for (int level = 1; level <= g.levels; ++level) synthesize_level(g, level, channel, scratch);
    }
}

WaveletLayout::WaveletLayout(const GridSpec& grid) : grid_(grid) {
    grid_.validate();
    const int levels = grid_.levels;
    const int lengths[2] = {grid_.rows, grid_.cols};

    profiles_.resize(2);
    for (int axis = 0; axis < 2; ++axis) {
        const int n = lengths[axis];
        profiles_[axis].resize(std::size_t(levels));
        for (int level = 1; level <= levels; ++level) {
            auto& row = profiles_[axis][std::size_t(level - 1)];
            row.resize(std::size_t(n));
            const int s = 1 << (levels - level);
            for (int pos = 0; pos < n; pos += s) row[std::size_t(pos)] = unit_profile(n, levels, level, pos);
        }
    }

    info_.reserve(std::size_t(grid_.vertex_count()));
    order_.reserve(std::size_t(grid_.vertex_count()));
    level_begin_.assign(std::size_t(levels) + 2, 0);
    for_each_coefficient(grid_, [&](int level, CoefficientKind kind, int r, int c) {
        CoefficientInfo ci;
        ci.level = level;
        ci.kind = kind;
        ci.row = r;
        ci.col = c;
        info_.push_back(ci);
        order_.push_back(grid_.index(r, c));
        level_begin_[std::size_t(level) + 1] = Index(info_.size());
    });

    for (Index k = 0; k < size(); ++k) {
        const BasisProfile& pr = row_profile(k);
        const BasisProfile& pc = col_profile(k);
        info_[std::size_t(k)].support = {pr.begin, pr.end(), pc.begin, pc.end()};
    }
}

std::shared_ptr<const WaveletLayout> WaveletLayout::create(const GridSpec& grid) {
    return std::make_shared<const WaveletLayout>(grid);
}

const BasisProfile& WaveletLayout::profile(int axis, int level, int pos) const {
    return profiles_[std::size_t(axis)][std::size_t(level - 1)][std::size_t(pos)];
}

// The coarse block is the scaling input of level 1. A horizontal detail is a
// detail along columns and a scaling value along rows, and so on.
const BasisProfile& WaveletLayout::row_profile(Index k) const {
    const CoefficientInfo& ci = info(k);
    return profile(0, std::max(ci.level, 1), ci.row);
}

const BasisProfile& WaveletLayout::col_profile(Index k) const {
    const CoefficientInfo& ci = info(k);
    return profile(1, std::max(ci.level, 1), ci.col);
}

WaveletCoefficients forward(const QuadGridShape& shape) {
    const GridSpec& g = shape.grid();
    Points work = shape.positions();
    forward_in_place(g, work);
    const auto order = canonical_order(g);
    WaveletCoefficients out;
    out.grid = g;
    out.values.resize(g.vertex_count(), 3);
    for (std::size_t k = 0; k < order.size(); ++k) out.values.row(Index(k)) = work.row(order[k]);
    return out;
}

QuadGridShape inverse(const WaveletCoefficients& coeffs) {
    const GridSpec& g = coeffs.grid;
    g.validate();
    if (coeffs.values.rows() != g.vertex_count()) {
        throw Error(ErrorCode::InconsistentDimensions, "coefficient count does not match declared grid dimensions");
    }
    const auto order = canonical_order(g);
    Points work(g.vertex_count(), 3);
    for (std::size_t k = 0; k < order.size(); ++k) work.row(order[k]) = coeffs.values.row(Index(k));
    inverse_in_place(g, work);
    return QuadGridShape(g, std::move(work));
}

std::vector<Index> coefficient_support(const WaveletLayout& layout, Index k) {
    if (k < 0 || k >= layout.size()) {
        throw Error(ErrorCode::IndexOutOfRange, "coefficient index " + std::to_string(k) + " out of range");
    }
    const VertexRect& rect = layout.info(k).support;
    std::vector<Index> out;
    out.reserve(std::size_t(rect.size()));
    for (int r = rect.row_begin; r < rect.row_end; ++r) {
        for (int c = rect.col_begin; c < rect.col_end; ++c) out.push_back(layout.grid().index(r, c));
    }
    return out;
}

}  // namespace mlwave
