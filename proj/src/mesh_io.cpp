#include "mlwave/mesh_io.hpp"

#include "mlwave/error.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mlwave {
namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(ErrorCode code, const fs::path& path, const std::string& what) {
    throw Error(code, path.string() + ": " + what);
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) fail(ErrorCode::IoFailure, path, "cannot open for reading");
    return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) fail(ErrorCode::IoFailure, path, "cannot open for writing");
    out.precision(17);
    return out;
}

void close_out(std::ofstream& out, const fs::path& path) {
    out.close();
    if (!out) fail(ErrorCode::IoFailure, path, "write failed");
}

// Yields non-empty, non-comment lines with their 1-based line numbers.
template <class F>
void for_each_line(const fs::path& path, F&& f) {
    std::ifstream in = open_in(path);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ss(line);
        f(ss, number);
    }
}

void expect_end(std::istringstream& ss, const fs::path& path, int line) {
    std::string rest;
    if (ss.fail() || (ss >> rest)) fail(ErrorCode::FormatError, path, "malformed line " + std::to_string(line));
}

fs::path resolve(const fs::path& manifest, const fs::path& p) {
    return p.is_absolute() ? p : manifest.parent_path() / p;
}

}  // namespace

void write_obj(const fs::path& path, const QuadGridShape& shape) {
    const GridSpec& g = shape.grid();
    std::ofstream out = open_out(path);
    out << "# mlwave grid rows " << g.rows << " cols " << g.cols << " levels " << g.levels << "\n";
    for (Index v = 0; v < g.vertex_count(); ++v) {
        const auto p = shape.positions().row(v);
        out << "v " << p(0) << ' ' << p(1) << ' ' << p(2) << '\n';
    }
    for (int r = 0; r + 1 < g.rows; ++r) {
        for (int c = 0; c + 1 < g.cols; ++c) {
            out << "f " << g.index(r, c) + 1 << ' ' << g.index(r + 1, c) + 1 << ' ' << g.index(r + 1, c + 1) + 1
                << ' ' << g.index(r, c + 1) + 1 << '\n';
        }
    }
    close_out(out, path);
}

QuadGridShape read_obj(const fs::path& path, std::optional<GridSpec> grid) {
    std::ifstream in = open_in(path);
    std::vector<Vec3> verts;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        std::istringstream ss(line);
        std::string tag;
        if (!(ss >> tag)) continue;
        if (tag == "#") {
            std::string word, k1, k2, k3;
            GridSpec g;
            if ((ss >> word) && word == "mlwave" && (ss >> word) && word == "grid" &&
                (ss >> k1 >> g.rows >> k2 >> g.cols >> k3 >> g.levels) && k1 == "rows" && k2 == "cols" &&
                k3 == "levels" && !grid) {
                grid = g;
            }
        } else if (tag == "v") {
            Vec3 p;
            if (!(ss >> p(0) >> p(1) >> p(2))) fail(ErrorCode::FormatError, path, "bad vertex on line " + std::to_string(number));
            verts.push_back(p);
        }
    }
    if (!grid) fail(ErrorCode::FormatError, path, "missing grid header");
    grid->validate();
    if (Index(verts.size()) != grid->vertex_count()) {
        fail(ErrorCode::InconsistentDimensions, path,
             "expected " + std::to_string(grid->vertex_count()) + " vertices, found " + std::to_string(verts.size()));
    }
    Points pts(Index(verts.size()), 3);
    for (std::size_t i = 0; i < verts.size(); ++i) pts.row(Index(i)) = verts[i].transpose();
    return QuadGridShape(*grid, std::move(pts));
}

void write_ply(const fs::path& path, const Points& points, const Points& normals) {
    if (points.rows() != normals.rows()) throw Error(ErrorCode::InconsistentDimensions, "points/normals size mismatch");
    std::ofstream out = open_out(path, std::ios::binary);
    out << "ply\nformat binary_little_endian 1.0\ncomment mlwave point cloud\nelement vertex " << points.rows()
        << "\nproperty double x\nproperty double y\nproperty double z\n"
           "property double nx\nproperty double ny\nproperty double nz\nend_header\n";
    for (Index i = 0; i < points.rows(); ++i) {
        const double rec[6] = {points(i, 0), points(i, 1), points(i, 2), normals(i, 0), normals(i, 1), normals(i, 2)};
        out.write(reinterpret_cast<const char*>(rec), sizeof rec);
    }
    close_out(out, path);
}

namespace {

std::size_t ply_type_size(const std::string& t) {
    if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
    if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
    if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" || t == "float32") return 4;
    if (t == "double" || t == "float64") return 8;
    return 0;
}

}  // namespace

TargetScan read_ply(const fs::path& path) {
    std::ifstream in = open_in(path, std::ios::binary);
    std::string line;
    if (!std::getline(in, line) || line.rfind("ply", 0) != 0) fail(ErrorCode::FormatError, path, "not a PLY file");

    struct Property {
        std::string name, type;
        std::size_t offset;
    };
    std::vector<Property> props;
    Index count = -1;
    bool in_vertex = false, seen_vertex = false, binary_le = false;
    std::size_t stride = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::string kw;
        ss >> kw;
        if (kw == "format") {
            std::string fmt;
            ss >> fmt;
            binary_le = fmt == "binary_little_endian";
        } else if (kw == "element") {
            std::string name;
            Index n = 0;
            ss >> name >> n;
            in_vertex = name == "vertex";
            if (in_vertex) {
                if (seen_vertex) fail(ErrorCode::FormatError, path, "duplicate vertex element");
                seen_vertex = true;
                count = n;
            } else if (!seen_vertex) {
                fail(ErrorCode::FormatError, path, "vertex element must come first");
            }
        } else if (kw == "property" && in_vertex) {
            std::string type, name;
            ss >> type >> name;
            if (type == "list") fail(ErrorCode::FormatError, path, "list property in vertex element");
            const std::size_t size = ply_type_size(type);
            if (size == 0) fail(ErrorCode::FormatError, path, "unknown property type " + type);
            props.push_back({name, type, stride});
            stride += size;
        } else if (kw == "end_header") {
            break;
        }
    }
    if (!binary_le) fail(ErrorCode::FormatError, path, "only binary_little_endian PLY is supported");
    if (count < 0) fail(ErrorCode::FormatError, path, "missing vertex element");

    const char* names[6] = {"x", "y", "z", "nx", "ny", "nz"};
    const Property* slots[6] = {};
    for (int k = 0; k < 6; ++k) {
        for (const Property& p : props) {
            if (p.name == names[k]) slots[k] = &p;
        }
        if (!slots[k]) fail(ErrorCode::FormatError, path, std::string("missing property ") + names[k]);
        if (slots[k]->type != "float" && slots[k]->type != "float32" && slots[k]->type != "double" &&
            slots[k]->type != "float64") {
            fail(ErrorCode::FormatError, path, std::string("property ") + names[k] + " must be float or double");
        }
    }

    std::vector<char> buf(stride * std::size_t(count));
    in.read(buf.data(), std::streamsize(buf.size()));
    if (std::size_t(in.gcount()) != buf.size()) fail(ErrorCode::FormatError, path, "truncated vertex data");

    Points pts(count, 3), nrm(count, 3);
    for (Index i = 0; i < count; ++i) {
        const char* rec = buf.data() + std::size_t(i) * stride;
        for (int k = 0; k < 6; ++k) {
            double v;
            if (ply_type_size(slots[k]->type) == 4) {
                float f;
                std::memcpy(&f, rec + slots[k]->offset, 4);
                v = f;
            } else {
                std::memcpy(&v, rec + slots[k]->offset, 8);
            }
            (k < 3 ? pts(i, k) : nrm(i, k - 3)) = v;
        }
        const double len = nrm.row(i).norm();
        if (std::abs(len - 1.0) <= 1e-3) nrm.row(i) /= len;
    }
    return TargetScan(std::move(pts), std::move(nrm));
}

void write_landmarks(const fs::path& path, const LandmarkSet& landmarks) {
    std::ofstream out = open_out(path);
    for (Index i = 0; i < landmarks.size(); ++i) {
        const auto p = landmarks.data_points.row(i);
        out << landmarks.model_indices[std::size_t(i)] << ' ' << p(0) << ' ' << p(1) << ' ' << p(2) << '\n';
    }
    close_out(out, path);
}

LandmarkSet read_landmarks(const fs::path& path) {
    std::vector<Index> idx;
    std::vector<Vec3> pts;
    for_each_line(path, [&](std::istringstream& ss, int line) {
        Index k = 0;
        Vec3 p;
        ss >> k >> p(0) >> p(1) >> p(2);
        expect_end(ss, path, line);
        idx.push_back(k);
        pts.push_back(p);
    });
    LandmarkSet l;
    l.model_indices = idx;
    l.data_points.resize(Index(pts.size()), 3);
    for (std::size_t i = 0; i < pts.size(); ++i) l.data_points.row(Index(i)) = pts[i].transpose();
    return l;
}

void write_mask(const fs::path& path, const std::vector<Index>& mask) {
    std::ofstream out = open_out(path);
    for (Index v : mask) out << v << '\n';
    close_out(out, path);
}

std::vector<Index> read_mask(const fs::path& path) {
    std::vector<Index> mask;
    for_each_line(path, [&](std::istringstream& ss, int line) {
        Index v = 0;
        ss >> v;
        expect_end(ss, path, line);
        if (v < 0) fail(ErrorCode::IndexOutOfRange, path, "negative index on line " + std::to_string(line));
        mask.push_back(v);
    });
    return mask;
}

std::vector<ManifestEntry> read_training_manifest(const fs::path& path) {
    std::vector<ManifestEntry> entries;
    for_each_line(path, [&](std::istringstream& ss, int line) {
        ManifestEntry e;
        std::string p;
        ss >> e.identity >> e.expression >> p;
        expect_end(ss, path, line);
        e.path = resolve(path, p);
        entries.push_back(std::move(e));
    });
    return entries;
}

void write_training_manifest(const fs::path& path, const std::vector<ManifestEntry>& entries) {
    std::ofstream out = open_out(path);
    for (const ManifestEntry& e : entries) out << e.identity << ' ' << e.expression << ' ' << e.path.string() << '\n';
    close_out(out, path);
}

std::vector<fs::path> read_frames_manifest(const fs::path& path) {
    std::vector<fs::path> frames;
    for_each_line(path, [&](std::istringstream& ss, int line) {
        std::string p;
        ss >> p;
        expect_end(ss, path, line);
        frames.push_back(resolve(path, p));
    });
    return frames;
}

}  // namespace mlwave
