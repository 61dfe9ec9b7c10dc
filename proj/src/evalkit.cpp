#include "mlwave/evalkit.hpp"

#include "mlwave/error.hpp"
#include "mlwave/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

namespace mlwave {

namespace {

struct Bump {
    double cx, cy, sx, sy;
};

// A field is a sum of unit-height Gaussian bumps in the normalised domain [-1, 1]^2
// (u along columns, v along rows, v = -1 at the brow end).
using Field = std::vector<Bump>;

const std::vector<Field>& identity_field_set() {
    static const std::vector<Field> fields = {
        {{0.0, 0.05, 0.20, 0.25}},                            // nose height
        {{0.0, 0.12, 0.30, 0.20}},                            // nose width
        {{0.0, -0.45, 0.35, 0.15}},                           // brow ridge
        {{-0.45, 0.15, 0.20, 0.20}, {0.45, 0.15, 0.20, 0.20}},  // cheeks
        {{0.0, 0.65, 0.25, 0.15}},                            // chin
        {{0.0, -0.60, 0.35, 0.15}},                           // forehead
    };
    return fields;
}

const std::vector<Field>& expression_field_set() {
    static const std::vector<Field> fields = {
        {{0.0, 0.55, 0.22, 0.15}},                            // jaw drop
        {{-0.3, 0.45, 0.15, 0.15}, {0.3, 0.45, 0.15, 0.15}},    // smile
        {{0.0, -0.45, 0.35, 0.15}},                           // brow raise
        {{-0.4, 0.35, 0.20, 0.20}, {0.4, 0.35, 0.20, 0.20}},    // cheek puff
    };
    return fields;
}

double gauss(const Bump& b, double u, double v) {
    const double du = (u - b.cx) / b.sx, dv = (v - b.cy) / b.sy;
    return std::exp(-0.5 * (du * du + dv * dv));
}

double field(const Field& f, double u, double v) {
    double s = 0.0;
    for (const Bump& b : f) s += gauss(b, u, v);
    return s;
}

// Flat towards the border so the template boundary carries no curvature.
double base_height(double u, double v) {
    double h = 30.0 * gauss({0.0, 0.0, 0.40, 0.50}, u, v);
    h += 20.0 * gauss({0.0, 0.05, 0.20, 0.25}, u, v);
    h += 5.0 * (gauss({-0.35, -0.45, 0.25, 0.15}, u, v) + gauss({0.35, -0.45, 0.25, 0.15}, u, v));
    h -= 6.0 * (gauss({-0.35, -0.25, 0.20, 0.15}, u, v) + gauss({0.35, -0.25, 0.20, 0.15}, u, v));
    h += 3.0 * gauss({0.0, 0.55, 0.30, 0.15}, u, v);
    return h;
}

Eigen::MatrixXd amplitudes(std::mt19937_64& rng, int samples, int fields, int rank, double scale) {
    std::normal_distribution<double> n01(0.0, 1.0);
    const auto draw = [&](int r, int c) {
        Eigen::MatrixXd m(r, c);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) m(i, j) = n01(rng);
        return m;
    };
    if (rank <= 0 || rank >= fields) return scale * draw(samples, fields);
    const Eigen::MatrixXd p = draw(samples, rank);
    const Eigen::MatrixXd q = draw(rank, fields) / std::sqrt(double(rank));
    return scale * p * q;
}

// Clean samples of the bilinear surface.
struct SurfaceSamples {
    Points points;
    Points normals;
};

Vec3 patch_normal(const QuadGridShape& s, int qr, int qc, double a, double b) {
    const GridSpec& g = s.grid();
    const Vec3 p00 = s.vertex(g.index(qr, qc)), p10 = s.vertex(g.index(qr + 1, qc));
    const Vec3 p01 = s.vertex(g.index(qr, qc + 1)), p11 = s.vertex(g.index(qr + 1, qc + 1));
    const Vec3 tr = (1 - b) * (p10 - p00) + b * (p11 - p01);
    const Vec3 tc = (1 - a) * (p01 - p00) + a * (p11 - p10);
    return tr.cross(tc);
}

SurfaceSamples sample_surface(const QuadGridShape& shape, int density) {
    const GridSpec& g = shape.grid();
    const int nr = (g.rows - 1) * density + 1, nc = (g.cols - 1) * density + 1;
    SurfaceSamples out;
    out.points.resize(Index(nr) * nc, 3);
    out.normals.resize(Index(nr) * nc, 3);
    const auto quads = [density](int i, int cells) {
        std::vector<int> q;
        const int base = i / density;
        if (i % density == 0 && base > 0) q.push_back(base - 1);
        if (base < cells) q.push_back(base);
        return q;
    };
    for (int i = 0; i < nr; ++i) {
        for (int j = 0; j < nc; ++j) {
            const double gr = double(i) / density, gc = double(j) / density;
            const int qr = std::min(i / density, g.rows - 2), qc = std::min(j / density, g.cols - 2);
            const double a = gr - qr, b = gc - qc;
            const Vec3 p = (1 - a) * (1 - b) * shape.vertex(g.index(qr, qc)) +
                           a * (1 - b) * shape.vertex(g.index(qr + 1, qc)) +
                           (1 - a) * b * shape.vertex(g.index(qr, qc + 1)) +
                           a * b * shape.vertex(g.index(qr + 1, qc + 1));
            Vec3 n = Vec3::Zero();
            for (int r : quads(i, g.rows - 1)) {
                for (int c : quads(j, g.cols - 1)) {
                    const Vec3 m = patch_normal(shape, r, c, gr - r, gc - c);
                    const double len = m.norm();
                    if (len > 0.0) n += m / len;
                }
            }
            const double len = n.norm();
            if (!(len > 0.0)) throw Error(ErrorCode::DegenerateConfiguration, "degenerate surface patch");
            const Index k = Index(i) * nc + j;
            out.points.row(k) = p.transpose();
            out.normals.row(k) = (n / len).transpose();
        }
    }
    return out;
}

}  // namespace

void SyntheticPopulationSpec::validate() const {
    grid.validate();
    if (d2 < 1 || d3 < 1) throw Error(ErrorCode::InvalidArgument, "population needs d2, d3 >= 1");
    if (identity_rank < 0 || expression_rank < 0) throw Error(ErrorCode::InvalidArgument, "rank must be >= 0");
    if (!(extent > 0.0)) throw Error(ErrorCode::InvalidArgument, "extent must be > 0");
    if (!std::isfinite(identity_amplitude) || !std::isfinite(expression_amplitude)) {
        throw Error(ErrorCode::InvalidArgument, "amplitudes must be finite");
    }
}

SyntheticFaceGenerator::SyntheticFaceGenerator(const SyntheticPopulationSpec& spec) : spec_(spec) {
    spec_.validate();
    std::mt19937_64 rng(spec_.seed);
    id_amp_ = amplitudes(rng, spec_.d2, identity_fields(), spec_.identity_rank, spec_.identity_amplitude);
    expr_amp_ = amplitudes(rng, spec_.d3, expression_fields(), spec_.expression_rank, spec_.expression_amplitude);
}

int SyntheticFaceGenerator::identity_fields() const { return int(identity_field_set().size()); }
int SyntheticFaceGenerator::expression_fields() const { return int(expression_field_set().size()); }

QuadGridShape SyntheticFaceGenerator::shape(const Eigen::VectorXd& identity, const Eigen::VectorXd& expression) const {
    if (identity.size() != identity_fields() || expression.size() != expression_fields()) {
        throw Error(ErrorCode::InconsistentDimensions, "amplitude vector size mismatch");
    }
    const GridSpec& g = spec_.grid;
    const double half = 0.5 * spec_.extent;
    Points pts(g.vertex_count(), 3);
    for (int r = 0; r < g.rows; ++r) {
        for (int c = 0; c < g.cols; ++c) {
            const double u = 2.0 * c / (g.cols - 1) - 1.0;
            const double v = 2.0 * r / (g.rows - 1) - 1.0;
            double h = base_height(u, v);
            for (int f = 0; f < identity_fields(); ++f) h += identity(f) * field(identity_field_set()[f], u, v);
            for (int f = 0; f < expression_fields(); ++f) h += expression(f) * field(expression_field_set()[f], u, v);
            pts.row(g.index(r, c)) << u * half, -v * half, h;
        }
    }
    return QuadGridShape(g, std::move(pts));
}

QuadGridShape SyntheticFaceGenerator::sample(int identity, int expression) const {
    if (identity < 0 || identity >= spec_.d2 || expression < 0 || expression >= spec_.d3) {
        throw Error(ErrorCode::IndexOutOfRange, "sample index out of range");
    }
    return shape(id_amp_.row(identity).transpose(), expr_amp_.row(expression).transpose());
}

TrainingSet generate_population(const SyntheticPopulationSpec& spec) {
    const SyntheticFaceGenerator gen(spec);
    TrainingSet ts(spec.d2, spec.d3);
    for (int i = 0; i < spec.d2; ++i)
        for (int e = 0; e < spec.d3; ++e) ts.set(i, e, gen.sample(i, e));
    return ts;
}

std::vector<Index> default_landmark_indices(const GridSpec& grid) {
    grid.validate();
    static const double at[8][2] = {{0.06, 0.25}, {0.06, 0.75}, {0.94, 0.25}, {0.94, 0.75},
                                    {0.25, 0.04}, {0.75, 0.04}, {0.25, 0.96}, {0.75, 0.96}};
    std::vector<Index> out;
    for (const auto& p : at) {
        const int r = int(std::lround(p[0] * (grid.rows - 1)));
        const int c = int(std::lround(p[1] * (grid.cols - 1)));
        const Index v = grid.index(r, c);
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
    return out;
}

void CorruptionSpec::validate() const {
    if (density < 1) throw Error(ErrorCode::InvalidArgument, "density must be >= 1");
    if (!(noise_sigma >= 0.0) || !(landmark_sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) throw Error(ErrorCode::InvalidArgument, "keep fraction must be in (0, 1]");
    if (occlusion_fraction && !(*occlusion_fraction >= 0.0 && *occlusion_fraction < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "occlusion fraction must be in [0, 1)");
    }
    if (occluder && occlusion_fraction) throw Error(ErrorCode::InvalidArgument, "occluder and occlusion fraction are exclusive");
    if (!pose.is_valid()) throw Error(ErrorCode::InvalidArgument, "invalid pose");
}

std::optional<Sphere> resolve_occluder(const QuadGridShape& shape, const CorruptionSpec& spec) {
    spec.validate();
    if (spec.occluder) return spec.occluder;
    if (!spec.occlusion_fraction) return std::nullopt;
    const SurfaceSamples s = sample_surface(shape, spec.density);
    std::vector<double> d(std::size_t(s.points.rows()));
    for (Index i = 0; i < s.points.rows(); ++i) {
        d[std::size_t(i)] = (s.points.row(i).transpose() - spec.occlusion_center).norm();
    }
    std::sort(d.begin(), d.end());
    const std::size_t k = std::size_t(std::llround(*spec.occlusion_fraction * double(d.size())));
    return Sphere{spec.occlusion_center, k < d.size() ? d[k] : d.back() + 1.0};
}

TargetScan corrupt_scan(const QuadGridShape& shape, const CorruptionSpec& spec) {
    const std::optional<Sphere> occ = resolve_occluder(shape, spec);
    const SurfaceSamples s = sample_surface(shape, spec.density);
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::vector<Index> kept;
    for (Index i = 0; i < s.points.rows(); ++i) {
        if (occ && (s.points.row(i).transpose() - occ->center).norm() < occ->radius) continue;
        if (spec.keep_fraction < 1.0 && !(unit(rng) < spec.keep_fraction)) continue;
        kept.push_back(i);
    }
    if (kept.empty()) throw Error(ErrorCode::EmptyScan, "corruption removed every point");

    const Mat3 rot = spec.pose.rotation;
    Points pts(Index(kept.size()), 3), nrm(Index(kept.size()), 3);
    for (std::size_t j = 0; j < kept.size(); ++j) {
        const Vec3 n = s.normals.row(kept[j]).transpose();
        Vec3 p = s.points.row(kept[j]).transpose();
        if (spec.noise_sigma > 0.0) p += spec.noise_sigma * n01(rng) * n;
        pts.row(Index(j)) = spec.pose.apply(p).transpose();
        nrm.row(Index(j)) = (rot * n).normalized().transpose();
    }

    std::optional<LandmarkSet> lmk;
    if (!spec.landmark_indices.empty()) {
        LandmarkSet l;
        l.model_indices = spec.landmark_indices;
        l.data_points = Points::Zero(l.size(), 3);
        l.validate(shape.vertex_count());
        for (Index i = 0; i < l.size(); ++i) {
            Vec3 p = shape.vertex(l.model_indices[std::size_t(i)]);
            if (spec.landmark_sigma > 0.0) p += spec.landmark_sigma * Vec3(n01(rng), n01(rng), n01(rng));
            l.data_points.row(i) = spec.pose.apply(p).transpose();
        }
        lmk = std::move(l);
    }
    return TargetScan(std::move(pts), std::move(nrm), std::move(lmk));
}

std::vector<Index> vertices_in_sphere(const QuadGridShape& shape, const Sphere& sphere) {
    std::vector<Index> out;
    for (Index v = 0; v < shape.vertex_count(); ++v) {
        if ((shape.vertex(v) - sphere.center).norm() < sphere.radius) out.push_back(v);
    }
    return out;
}

double ErrorReport::fraction_at_most(double threshold) const {
    auto it = std::upper_bound(cumulative_curve.begin(), cumulative_curve.end(), threshold,
                               [](double t, const std::pair<double, double>& p) { return t < p.first; });
    return it == cumulative_curve.begin() ? 0.0 : std::prev(it)->second;
}

ErrorReport distance_to_data(const QuadGridShape& fitted, const TargetScan& scan, const std::vector<Index>& mask) {
    if (scan.size() == 0) throw Error(ErrorCode::EmptyScan, "scan has no points");
    const Index n = fitted.vertex_count();
    ErrorReport rep;
    rep.masked.assign(std::size_t(n), 0);
    for (Index v : mask) {
        if (v < 0 || v >= n) throw Error(ErrorCode::IndexOutOfRange, "mask index " + std::to_string(v) + " out of range");
        rep.masked[std::size_t(v)] = 1;
    }
    const KdTree tree(scan.points());
    rep.per_vertex.resize(std::size_t(n));
    std::vector<double> kept;
    for (Index v = 0; v < n; ++v) {
        const double d = std::sqrt(tree.nearest(fitted.vertex(v)).squared_distance);
        rep.per_vertex[std::size_t(v)] = d;
        if (!rep.masked[std::size_t(v)]) kept.push_back(d);
    }
    if (kept.empty()) throw Error(ErrorCode::InsufficientSamples, "every vertex is masked");
    std::sort(kept.begin(), kept.end());
    const std::size_t m = kept.size();
    rep.count = Index(m);
    rep.median = m % 2 ? kept[m / 2] : 0.5 * (kept[m / 2 - 1] + kept[m / 2]);
    double sum = 0.0;
    std::size_t below = 0;
    for (double d : kept) {
        sum += d;
        if (d < 1.0) ++below;
    }
    rep.mean = sum / double(m);
    rep.max = kept.back();
    rep.fraction_below_1mm = double(below) / double(m);
    for (std::size_t i = 0; i < m; ++i) {
        if (i + 1 < m && kept[i + 1] == kept[i]) continue;
        rep.cumulative_curve.emplace_back(kept[i], double(i + 1) / double(m));
    }
    return rep;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& path, const std::vector<std::string>& header) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, path.string() + ": cannot open for writing");
    out.precision(12);
    for (const std::string& h : header) out << "# " << h << '\n';
    return out;
}

void finish_csv(std::ofstream& out, const std::filesystem::path& path) {
    out.close();
    if (!out) throw Error(ErrorCode::IoFailure, path.string() + ": write failed");
}

}  // namespace

void write_report_csv(const std::filesystem::path& path, const ErrorReport& report, const std::vector<std::string>& header) {
    std::ofstream out = open_csv(path, header);
    out << "# count=" << report.count << " median=" << report.median << " mean=" << report.mean << " max=" << report.max
        << " fraction_below_1mm=" << report.fraction_below_1mm << '\n';
    out << "vertex,distance,masked\n";
    for (std::size_t v = 0; v < report.per_vertex.size(); ++v) {
        out << v << ',' << report.per_vertex[v] << ',' << int(report.masked[v]) << '\n';
    }
    finish_csv(out, path);
}

void write_curve_csv(const std::filesystem::path& path, const ErrorReport& report, const std::vector<std::string>& header) {
    std::ofstream out = open_csv(path, header);
    out << "threshold,fraction\n";
    for (const auto& [t, f] : report.cumulative_curve) out << t << ',' << f << '\n';
    finish_csv(out, path);
}

}  // namespace mlwave
