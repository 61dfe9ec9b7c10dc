#include "mlwave/model.hpp"

#include "mlwave/error.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

namespace mlwave {

static_assert(std::endian::native == std::endian::little, "model files are written with native little-endian layout");

namespace {

void check_weights(const MultilinearCoefficientModel& m, const Eigen::VectorXd& w2, const Eigen::VectorXd& w3) {
    if (w2.size() != m.m2() || w3.size() != m.m3()) {
        throw Error(ErrorCode::ShapeMismatch, "weight lengths (" + std::to_string(w2.size()) + ", " +
                                                  std::to_string(w3.size()) + ") do not match model (" +
                                                  std::to_string(m.m2()) + ", " + std::to_string(m.m3()) + ")");
    }
}

using Slice = Eigen::Map<const Eigen::Matrix<double, 3, Eigen::Dynamic>>;

Slice core_slice(const MultilinearCoefficientModel& m, int l) {
    return Slice(m.core.data() + std::size_t(3) * m.m2() * l, 3, m.m2());
}

}  // namespace

Vec3 synthesize_coefficient(const MultilinearCoefficientModel& m, const Eigen::VectorXd& w2, const Eigen::VectorXd& w3) {
    check_weights(m, w2, w3);
    const Eigen::VectorXd a2 = m.id_coordinates(w2);
    const Eigen::VectorXd a3 = m.expr_coordinates(w3);
    Vec3 s = m.mean;
    for (int l = 0; l < m.m3(); ++l) s.noalias() += a3(l) * (core_slice(m, l) * a2);
    return s;
}

CoefficientJacobian coefficient_jacobian(const MultilinearCoefficientModel& m, const Eigen::VectorXd& w2,
                                         const Eigen::VectorXd& w3) {
    check_weights(m, w2, w3);
    const Eigen::VectorXd a2 = m.id_coordinates(w2);
    const Eigen::VectorXd a3 = m.expr_coordinates(w3);
    Eigen::Matrix<double, 3, Eigen::Dynamic> contracted = Eigen::Matrix<double, 3, Eigen::Dynamic>::Zero(3, m.m2());
    CoefficientJacobian jac;
    jac.d_expr.resize(3, m.m3());
    for (int l = 0; l < m.m3(); ++l) {
        const Slice slice = core_slice(m, l);
        contracted.noalias() += a3(l) * slice;
        jac.d_expr.col(l) = m.expr_scale(l) * (slice * a2);
    }
    jac.value = m.mean + contracted * a2;
    jac.d_id = contracted * m.id_scale.asDiagonal();
    return jac;
}

WaveletShapeModel::WaveletShapeModel(ModelTemplate tmpl, int m2, int m3,
                                     std::vector<MultilinearCoefficientModel> coefficients,
                                     std::vector<VertexRect> supports)
    : template_(std::move(tmpl)),
      m2_(m2),
      m3_(m3),
      coefficients_(std::move(coefficients)),
      supports_(std::move(supports)),
      layout_(WaveletLayout::create(template_.grid)) {
    const Index n = template_.grid.vertex_count();
    if (Index(coefficients_.size()) != n || Index(supports_.size()) != n) {
        throw Error(ErrorCode::InconsistentDimensions, "model needs one coefficient model and support per vertex");
    }
    if (template_.ordering_tag != kCanonicalOrderingTag) {
        throw Error(ErrorCode::FormatError, "unknown coefficient ordering tag");
    }
    for (const auto& c : coefficients_) {
        if (c.m2() != m2_ || c.m3() != m3_ || c.core.dim(1) != 3 || c.core.dim(2) != m2_ || c.core.dim(3) != m3_ ||
            c.id_scale.size() != m2_ || c.expr_scale.size() != m3_) {
            throw Error(ErrorCode::ShapeMismatch, "coefficient model dimensions disagree with m2/m3");
        }
    }
    for (Index v : template_.landmark_indices) {
        if (v < 0 || v >= n) throw Error(ErrorCode::IndexOutOfRange, "template landmark index out of range");
    }
}

FitWeights FitWeights::zeros(const WaveletShapeModel& model) {
    return {Eigen::MatrixXd::Zero(model.size(), model.m2()), Eigen::MatrixXd::Zero(model.size(), model.m3())};
}

Points synthesize_coefficients(const WaveletShapeModel& model, const FitWeights& w) {
    if (w.id_weights.rows() != model.size() || w.expr_weights.rows() != model.size() ||
        w.id_weights.cols() != model.m2() || w.expr_weights.cols() != model.m3()) {
        throw Error(ErrorCode::ShapeMismatch, "weight arrays do not match the model");
    }
    Points s(model.size(), 3);
    for (Index k = 0; k < model.size(); ++k) {
        s.row(k) = synthesize_coefficient(model.coefficient(k), w.id_weights.row(k).transpose(),
                                          w.expr_weights.row(k).transpose())
                       .transpose();
    }
    return s;
}

QuadGridShape synthesize_shape(const WaveletShapeModel& model, const FitWeights& w) {
    return inverse(WaveletCoefficients{model.grid(), synthesize_coefficients(model, w)});
}

QuadGridShape mean_shape(const WaveletShapeModel& model) { return synthesize_shape(model, FitWeights::zeros(model)); }

namespace {

constexpr char kMagic[8] = {'M', 'L', 'W', 'M', 'O', 'D', 'E', 'L'};

class ByteWriter {
public:
    explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

    template <class T>
    void put(T value) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
        out_.insert(out_.end(), p, p + sizeof(T));
    }
    void put_u32(Index v) { put(std::uint32_t(v)); }
    void put_doubles(const double* p, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) put(p[i]);
    }

private:
    std::vector<std::uint8_t>& out_;
};

class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

    template <class T>
    T get() {
        if (pos_ + sizeof(T) > size_) throw Error(ErrorCode::FormatError, "model record runs past end of file");
        T value;
        std::memcpy(&value, data_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }
    void get_doubles(double* p, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i) p[i] = get<double>();
    }
    std::size_t remaining() const { return size_ - pos_; }

private:
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::uint8_t* data, std::size_t size) {
    return std::uint32_t(crc32(crc32(0L, Z_NULL, 0), data, uInt(size)));
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const WaveletShapeModel& model) {
    std::vector<std::uint8_t> bytes;
    ByteWriter w(bytes);
    for (char c : kMagic) w.put(c);
    w.put(kModelFormatVersion);
    w.put(model.tmpl().ordering_tag);
    const GridSpec& g = model.grid();
    w.put_u32(g.rows);
    w.put_u32(g.cols);
    w.put_u32(g.levels);
    w.put_u32(model.m2());
    w.put_u32(model.m3());
    w.put_u32(Index(model.tmpl().landmark_indices.size()));
    for (Index v : model.tmpl().landmark_indices) w.put_u32(v);
    w.put(std::uint64_t(model.size()));
    for (Index k = 0; k < model.size(); ++k) {
        const auto& c = model.coefficient(k);
        w.put_doubles(c.mean.data(), 3);
        w.put_doubles(c.core.data(), c.core.size());
        w.put_doubles(c.id_mode_mean.data(), std::size_t(c.m2()));
        w.put_doubles(c.expr_mode_mean.data(), std::size_t(c.m3()));
        w.put_doubles(c.id_scale.data(), std::size_t(c.m2()));
        w.put_doubles(c.expr_scale.data(), std::size_t(c.m3()));
        const VertexRect& s = model.support(k);
        w.put_u32(s.row_begin);
        w.put_u32(s.row_end);
        w.put_u32(s.col_begin);
        w.put_u32(s.col_end);
    }
    w.put(crc_of(bytes.data(), bytes.size()));
    return bytes;
}

WaveletShapeModel deserialize_model(const std::vector<std::uint8_t>& bytes) {
    constexpr std::size_t kPrefix = sizeof(kMagic) + sizeof(std::uint32_t);
    if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw Error(ErrorCode::FormatError, "not a model file (bad magic)");
    }
    if (bytes.size() < kPrefix) throw Error(ErrorCode::ChecksumMismatch, "model file truncated");
    std::uint32_t version;
    std::memcpy(&version, bytes.data() + sizeof(kMagic), sizeof(version));
    if (version != kModelFormatVersion) {
        throw Error(ErrorCode::FormatVersionMismatch, "model format version " + std::to_string(version) +
                                                          ", expected " + std::to_string(kModelFormatVersion));
    }
    if (bytes.size() < kPrefix + sizeof(std::uint32_t)) throw Error(ErrorCode::ChecksumMismatch, "model file truncated");
    const std::size_t body = bytes.size() - sizeof(std::uint32_t);
    std::uint32_t stored;
    std::memcpy(&stored, bytes.data() + body, sizeof(stored));
    if (stored != crc_of(bytes.data(), body)) throw Error(ErrorCode::ChecksumMismatch, "model file CRC mismatch");

    ByteReader r(bytes.data() + kPrefix, body - kPrefix);
    ModelTemplate tmpl;
    tmpl.ordering_tag = r.get<std::uint32_t>();
    tmpl.grid.rows = int(r.get<std::uint32_t>());
    tmpl.grid.cols = int(r.get<std::uint32_t>());
    tmpl.grid.levels = int(r.get<std::uint32_t>());
    tmpl.grid.validate();
    const int m2 = int(r.get<std::uint32_t>());
    const int m3 = int(r.get<std::uint32_t>());
    if (m2 < 1 || m3 < 1 || m2 > 4096 || m3 > 4096) throw Error(ErrorCode::FormatError, "implausible m2/m3");
    const std::uint32_t landmark_count = r.get<std::uint32_t>();
    if (landmark_count > r.remaining() / 4) throw Error(ErrorCode::FormatError, "implausible landmark count");
    for (std::uint32_t i = 0; i < landmark_count; ++i) tmpl.landmark_indices.push_back(r.get<std::uint32_t>());
    const std::uint64_t n = r.get<std::uint64_t>();
    if (n != std::uint64_t(tmpl.grid.vertex_count())) {
        throw Error(ErrorCode::FormatError, "coefficient count does not match grid");
    }

    std::vector<MultilinearCoefficientModel> coefficients(n);
    std::vector<VertexRect> supports(n);
    for (std::uint64_t k = 0; k < n; ++k) {
        auto& c = coefficients[k];
        r.get_doubles(c.mean.data(), 3);
        c.core = Mode3Tensor(3, m2, m3);
        r.get_doubles(c.core.data(), c.core.size());
        c.id_mode_mean.resize(m2);
        c.expr_mode_mean.resize(m3);
        c.id_scale.resize(m2);
        c.expr_scale.resize(m3);
        r.get_doubles(c.id_mode_mean.data(), std::size_t(m2));
        r.get_doubles(c.expr_mode_mean.data(), std::size_t(m3));
        r.get_doubles(c.id_scale.data(), std::size_t(m2));
        r.get_doubles(c.expr_scale.data(), std::size_t(m3));
        auto& s = supports[k];
        s.row_begin = int(r.get<std::uint32_t>());
        s.row_end = int(r.get<std::uint32_t>());
        s.col_begin = int(r.get<std::uint32_t>());
        s.col_end = int(r.get<std::uint32_t>());
    }
    if (r.remaining() != 0) throw Error(ErrorCode::FormatError, "trailing bytes after coefficient records");
    return WaveletShapeModel(std::move(tmpl), m2, m3, std::move(coefficients), std::move(supports));
}

void save_model(const WaveletShapeModel& model, const std::filesystem::path& path) {
    const auto bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw Error(ErrorCode::IoFailure, "write failed for " + path.string());
}

WaveletShapeModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw Error(ErrorCode::IoFailure, "read failed for " + path.string());
    return deserialize_model(bytes);
}

}  // namespace mlwave
