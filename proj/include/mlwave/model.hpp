#pragma once

// The learned shape space: one multilinear model per wavelet coefficient.
//
// Weights are handled in normalised units. For a component j of the
// identity mode, the weight w maps to the multilinear coordinate
//     a_j = id_mode_mean_j + id_scale_j * w,
// so w = 0 is the mode mean and |w| = 1 is one training standard deviation.
// The same holds for the expression mode.

#include "mlwave/mesh.hpp"
#include "mlwave/tensor.hpp"
#include "mlwave/wavelet.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <memory>
#include <vector>

namespace mlwave {

inline constexpr double kMinComponentScale = 1e-12;

struct MultilinearCoefficientModel {
    Vec3 mean = Vec3::Zero();
    Mode3Tensor core;  // 3 x m2 x m3
    Eigen::VectorXd id_mode_mean;
    Eigen::VectorXd expr_mode_mean;
    Eigen::VectorXd id_scale;
    Eigen::VectorXd expr_scale;

    int m2() const { return int(id_mode_mean.size()); }
    int m3() const { return int(expr_mode_mean.size()); }

    Eigen::VectorXd id_coordinates(const Eigen::VectorXd& w2) const { return id_mode_mean + id_scale.cwiseProduct(w2); }
    Eigen::VectorXd expr_coordinates(const Eigen::VectorXd& w3) const {
        return expr_mode_mean + expr_scale.cwiseProduct(w3);
    }

    friend bool operator==(const MultilinearCoefficientModel&, const MultilinearCoefficientModel&) = default;
};

// s = mean + core x2 a2^T x3 a3^T with a2, a3 de-normalised from w2, w3.
// Throws ShapeMismatch on weight length mismatch.
Vec3 synthesize_coefficient(const MultilinearCoefficientModel& m, const Eigen::VectorXd& w2, const Eigen::VectorXd& w3);

// Value plus derivatives with respect to the normalised weights.
struct CoefficientJacobian {
    Vec3 value;
    Eigen::Matrix<double, 3, Eigen::Dynamic> d_id;    // 3 x m2
    Eigen::Matrix<double, 3, Eigen::Dynamic> d_expr;  // 3 x m3
};
CoefficientJacobian coefficient_jacobian(const MultilinearCoefficientModel& m, const Eigen::VectorXd& w2,
                                         const Eigen::VectorXd& w3);

struct ModelTemplate {
    GridSpec grid;
    std::uint32_t ordering_tag = kCanonicalOrderingTag;
    std::vector<Index> landmark_indices;

    friend bool operator==(const ModelTemplate&, const ModelTemplate&) = default;
};

class WaveletShapeModel {
public:
    WaveletShapeModel() = default;
    WaveletShapeModel(ModelTemplate tmpl, int m2, int m3, std::vector<MultilinearCoefficientModel> coefficients,
                      std::vector<VertexRect> supports);

    const ModelTemplate& tmpl() const { return template_; }
    const GridSpec& grid() const { return template_.grid; }
    int m2() const { return m2_; }
    int m3() const { return m3_; }
    Index size() const { return Index(coefficients_.size()); }
    const MultilinearCoefficientModel& coefficient(Index k) const { return coefficients_[std::size_t(k)]; }
    const std::vector<MultilinearCoefficientModel>& coefficients() const { return coefficients_; }
    const VertexRect& support(Index k) const { return supports_[std::size_t(k)]; }
    const std::vector<VertexRect>& supports() const { return supports_; }
    const WaveletLayout& layout() const { return *layout_; }

    friend bool operator==(const WaveletShapeModel& a, const WaveletShapeModel& b) {
        return a.template_ == b.template_ && a.m2_ == b.m2_ && a.m3_ == b.m3_ &&
               a.coefficients_ == b.coefficients_ && a.supports_ == b.supports_;
    }

private:
    ModelTemplate template_;
    int m2_ = 0;
    int m3_ = 0;
    std::vector<MultilinearCoefficientModel> coefficients_;
    std::vector<VertexRect> supports_;
    std::shared_ptr<const WaveletLayout> layout_;
};

struct FitWeights {
    Eigen::MatrixXd id_weights;    // n x m2
    Eigen::MatrixXd expr_weights;  // n x m3

    static FitWeights zeros(const WaveletShapeModel& model);
    bool all_finite() const { return id_weights.allFinite() && expr_weights.allFinite(); }

    friend bool operator==(const FitWeights& a, const FitWeights& b) {
        return a.id_weights == b.id_weights && a.expr_weights == b.expr_weights;
    }
};

// All s_k in canonical order (n x 3).
Points synthesize_coefficients(const WaveletShapeModel& model, const FitWeights& w);
QuadGridShape synthesize_shape(const WaveletShapeModel& model, const FitWeights& w);
QuadGridShape mean_shape(const WaveletShapeModel& model);

// Binary model file. All values little-endian.
//   char[8]  magic "MLWMODEL"
//   u32      format version (kModelFormatVersion)
//   u32      coefficient ordering tag
//   u32      rows, cols, levels
//   u32      m2, m3
//   u32      landmark count, then that many u32 vertex indices
//   u64      coefficient count n
//   n records:
//     f64[3]        mean
//     f64[3*m2*m3]  core, mode 1 fastest
//     f64[m2]       identity mode mean
//     f64[m3]       expression mode mean
//     f64[m2]       identity scale
//     f64[m3]       expression scale
//     u32[4]        support row_begin, row_end, col_begin, col_end
//   u32      CRC-32 (zlib polynomial) of every preceding byte
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const WaveletShapeModel& model);
// Throws FormatError, FormatVersionMismatch or ChecksumMismatch.
WaveletShapeModel deserialize_model(const std::vector<std::uint8_t>& bytes);

// Throws IoFailure in addition to the deserialisation errors.
void save_model(const WaveletShapeModel& model, const std::filesystem::path& path);
WaveletShapeModel load_model(const std::filesystem::path& path);

}  // namespace mlwave
