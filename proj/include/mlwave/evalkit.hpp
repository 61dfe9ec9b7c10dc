#pragma once
// Synthetic face populations, scan corruption and distance-to-data metrics.
#include "mlwave/mesh.hpp"
#include "mlwave/training.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace mlwave {

// Height-field faces z = h(x, y) over a square of side `extent` mm: a base
// face plus identity and expression fields (Gaussian bumps), each scaled by
// per-sample amplitudes. Amplitude matrices are P * Q with P of `rank`
// columns, so the centred population has mode ranks of at most rank + 1.
struct SyntheticPopulationSpec {
    std::uint64_t seed = 1;
    GridSpec grid{33, 33, 4};
    int d2 = 10;
    int d3 = 5;
    int identity_rank = 2;    // 0: independent amplitudes
    int expression_rank = 2;  // 0: independent amplitudes
    double extent = 140.0;
    double identity_amplitude = 4.0;    // mm, typical per-field magnitude
    double expression_amplitude = 3.0;  // mm

    void validate() const;
};

class SyntheticFaceGenerator {
public:
    explicit SyntheticFaceGenerator(const SyntheticPopulationSpec& spec);

    const SyntheticPopulationSpec& spec() const { return spec_; }
    int identity_fields() const;
    int expression_fields() const;
    // d2 x identity_fields() and d3 x expression_fields().
    const Eigen::MatrixXd& identity_amplitudes() const { return id_amp_; }
    const Eigen::MatrixXd& expression_amplitudes() const { return expr_amp_; }

    QuadGridShape shape(const Eigen::VectorXd& identity, const Eigen::VectorXd& expression) const;
    QuadGridShape sample(int identity, int expression) const;

private:
    SyntheticPopulationSpec spec_;
    Eigen::MatrixXd id_amp_;
    Eigen::MatrixXd expr_amp_;
};

TrainingSet generate_population(const SyntheticPopulationSpec& spec);

// Eight well-spread vertices (brows, eyes, nose, mouth corners, chin).
std::vector<Index> default_landmark_indices(const GridSpec& grid);

struct Sphere {
    Vec3 center = Vec3::Zero();
    double radius = 0.0;
};

struct CorruptionSpec {
    std::uint64_t seed = 1;
    // Samples per quad edge: points at (r + a/density, c + b/density),
    // which includes every grid vertex.
    int density = 2;
    // Gaussian displacement along the surface normal (mm).
    double noise_sigma = 0.0;
    // Points strictly inside the sphere are deleted.
    std::optional<Sphere> occluder;
    // Alternatively: delete this fraction of points nearest to `occlusion_center`.
    std::optional<double> occlusion_fraction;
    Vec3 occlusion_center = Vec3::Zero();
    // Bernoulli keep probability applied after occlusion.
    double keep_fraction = 1.0;
    // Vertices whose (pose-mapped) positions become landmarks.
    std::vector<Index> landmark_indices;
    double landmark_sigma = 0.0;
    // Maps shape coordinates to scan coordinates.
    SimilarityTransform pose = SimilarityTransform::identity();

    void validate() const;
};

// The occlusion sphere in shape coordinates, with the radius resolved from
// `occlusion_fraction` when needed.
std::optional<Sphere> resolve_occluder(const QuadGridShape& shape, const CorruptionSpec& spec);

// Dense samples of the piecewise-bilinear surface with normals of the
// bilinear patches (averaged over the patches sharing a sample).
TargetScan corrupt_scan(const QuadGridShape& shape, const CorruptionSpec& spec);

// Vertices within the sphere; a mask for the occluded region.
std::vector<Index> vertices_in_sphere(const QuadGridShape& shape, const Sphere& sphere);

struct ErrorReport {
    std::vector<double> per_vertex;    // mm, every vertex
    std::vector<std::uint8_t> masked;  // 1 = excluded from summary and curve
    Index count = 0;                   // unmasked vertices
    double median = 0.0;
    double mean = 0.0;
    double max = 0.0;
    double fraction_below_1mm = 0.0;
    // (distance, fraction of unmasked vertices with error <= distance), one
    // point per distinct distance, ascending.
    std::vector<std::pair<double, double>> cumulative_curve;

    double fraction_at_most(double threshold) const;
};

// Masked vertices (by index) are excluded. Throws EmptyScan, IndexOutOfRange,
// and InsufficientSamples when every vertex is masked.
ErrorReport distance_to_data(const QuadGridShape& fitted, const TargetScan& scan,
                             const std::vector<Index>& mask = {});

// Header lines are written as `# line`.
void write_report_csv(const std::filesystem::path& path, const ErrorReport& report,
                      const std::vector<std::string>& header = {});
void write_curve_csv(const std::filesystem::path& path, const ErrorReport& report,
                     const std::vector<std::string>& header = {});

}  // namespace mlwave
