#include "mlwave/error.hpp"
#include "mlwave/mesh_io.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cstring>
#include <fstream>
#include <sstream>

using namespace mlwave;
namespace fs = std::filesystem;
using testutil::max_abs;

namespace {

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("mlwave_io_" + std::to_string(std::random_device{}()))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path operator/(const std::string& name) const { return path / name; }
};

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

std::vector<std::string> read_lines(const fs::path& p) {
    std::ifstream in(p);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
}

template <class F>
ErrorCode error_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidArgument;
}

template <class T>
void append(std::string& out, T value) {
    char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    out.append(bytes, sizeof(T));
}

}  // namespace

TEST_CASE("OBJ grids") {
    TempDir dir;
    const GridSpec g{5, 9, 2};
    std::mt19937_64 rng(1);
    const QuadGridShape s = testutil::random_shape(rng, g, 100.0);
    write_obj(dir / "a.obj", s);

    SUBCASE("round trip is exact") {
        const QuadGridShape back = read_obj(dir / "a.obj");
        CHECK(back.grid() == g);
        CHECK(max_abs(back.positions() - s.positions()) == 0.0);
    }
    SUBCASE("documented layout") {
        const std::vector<std::string> lines = read_lines(dir / "a.obj");
        std::vector<std::string> v, f;
        for (const std::string& l : lines) {
            if (l.rfind("v ", 0) == 0) v.push_back(l);
            if (l.rfind("f ", 0) == 0) f.push_back(l);
        }
        CHECK(lines.front() == "# mlwave grid rows 5 cols 9 levels 2");
        REQUIRE(v.size() == 45);
        REQUIRE(f.size() == 4 * 8);
        // Vertex (r, c) is line r * cols + c.
        std::istringstream vs(v[std::size_t(g.index(3, 7))].substr(2));
        Vec3 p;
        vs >> p(0) >> p(1) >> p(2);
        CHECK(max_abs(p - s.positions().row(g.index(3, 7)).transpose()) == 0.0);
        // Quad (r, c) = (1, 2) is counter-clockwise, 1-based.
        const auto one = [&](int r, int c) { return std::to_string(g.index(r, c) + 1); };
        CHECK(f[std::size_t(1 * 8 + 2)] == "f " + one(1, 2) + " " + one(2, 2) + " " + one(2, 3) + " " + one(1, 3));
    }
    SUBCASE("headerless files need the grid") {
        std::string body;
        for (const std::string& l : read_lines(dir / "a.obj"))
            if (l.rfind('#', 0) != 0) body += l + "\n";
        write_text(dir / "b.obj", body);
        CHECK(error_of([&] { read_obj(dir / "b.obj"); }) == ErrorCode::FormatError);
        CHECK(max_abs(read_obj(dir / "b.obj", g).positions() - s.positions()) == 0.0);
        CHECK(error_of([&] { read_obj(dir / "b.obj", GridSpec{9, 9, 2}); }) == ErrorCode::InconsistentDimensions);
    }
    SUBCASE("malformed vertex") {
        write_text(dir / "c.obj", "# mlwave grid rows 3 cols 3 levels 1\nv 1 2\n");
        CHECK(error_of([&] { read_obj(dir / "c.obj"); }) == ErrorCode::FormatError);
    }
    CHECK(error_of([&] { read_obj(dir / "missing.obj"); }) == ErrorCode::IoFailure);
}

TEST_CASE("PLY point clouds") {
    TempDir dir;
    std::mt19937_64 rng(2);
    const Points pts = testutil::random_points(rng, 50, 30.0);
    Points nrm = testutil::random_points(rng, 50);
    nrm.rowwise().normalize();

    SUBCASE("round trip is exact") {
        write_ply(dir / "a.ply", pts, nrm);
        const TargetScan scan = read_ply(dir / "a.ply");
        CHECK(max_abs(scan.points() - pts) == 0.0);
        CHECK(max_abs(scan.normals() - nrm) < 1e-15);
        CHECK_FALSE(scan.landmarks().has_value());
        CHECK(error_of([&] { write_ply(dir / "b.ply", pts, nrm.topRows(10)); }) == ErrorCode::InconsistentDimensions);
    }
    SUBCASE("float properties, extra properties and trailing elements") {
        std::string file =
            "ply\nformat binary_little_endian 1.0\ncomment made by hand\nelement vertex 3\n"
            "property float x\nproperty float y\nproperty float z\nproperty uchar red\n"
            "property float nx\nproperty float ny\nproperty float nz\n"
            "element face 1\nproperty list uchar int vertex_indices\nend_header\n";
        const float xyz[3][3] = {{1, 2, 3}, {-4, 5.5f, 6}, {0, 0, -7}};
        const float n[3][3] = {{0, 0, 1}, {0, 1.0005f, 0}, {0.6f, 0.8f, 0}};
        for (int i = 0; i < 3; ++i) {
            for (float c : xyz[i]) append(file, c);
            append(file, std::uint8_t(200));
            for (float c : n[i]) append(file, c);
        }
        append(file, std::uint8_t(3));
        for (int i : {0, 1, 2}) append(file, std::int32_t(i));
        write_text(dir / "f.ply", file);

        const TargetScan scan = read_ply(dir / "f.ply");
        REQUIRE(scan.size() == 3);
        CHECK(max_abs(scan.points().row(1).transpose() - Vec3(-4, 5.5, 6)) == 0.0);
        CHECK(max_abs(scan.normals().row(1).transpose() - Vec3(0, 1, 0)) < 1e-15);
        CHECK(std::abs(scan.normals().row(2).norm() - 1.0) < 1e-7);
    }
    SUBCASE("rejected inputs") {
        write_text(dir / "ascii.ply", "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                                      "property float z\nproperty float nx\nproperty float ny\nproperty float nz\n"
                                      "end_header\n0 0 0 0 0 1\n");
        CHECK(error_of([&] { read_ply(dir / "ascii.ply"); }) == ErrorCode::FormatError);

        write_ply(dir / "a.ply", pts, nrm);
        std::ifstream in(dir / "a.ply", std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        write_text(dir / "cut.ply", bytes.substr(0, bytes.size() - 10));
        CHECK(error_of([&] { read_ply(dir / "cut.ply"); }) == ErrorCode::FormatError);

        write_text(dir / "nonormals.ply", "ply\nformat binary_little_endian 1.0\nelement vertex 0\nproperty float x\n"
                                          "property float y\nproperty float z\nend_header\n");
        CHECK(error_of([&] { read_ply(dir / "nonormals.ply"); }) == ErrorCode::FormatError);
        write_text(dir / "junk.ply", "hello\n");
        CHECK(error_of([&] { read_ply(dir / "junk.ply"); }) == ErrorCode::FormatError);
    }
}

TEST_CASE("landmarks and masks") {
    TempDir dir;
    std::mt19937_64 rng(3);
    LandmarkSet lm{{4, 0, 17, 200}, testutil::random_points(rng, 4, 50.0)};
    write_landmarks(dir / "l.txt", lm);
    const LandmarkSet back = read_landmarks(dir / "l.txt");
    CHECK(back.model_indices == lm.model_indices);
    CHECK(max_abs(back.data_points - lm.data_points) == 0.0);

    write_text(dir / "l2.txt", "# header\n\n3 1.5 2 -1\n  # indented comment\n7 0 0 0\n");
    const LandmarkSet parsed = read_landmarks(dir / "l2.txt");
    CHECK(parsed.model_indices == std::vector<Index>{3, 7});
    CHECK(parsed.data_points(0, 0) == 1.5);
    write_text(dir / "l3.txt", "3 1.5 2\n");
    CHECK(error_of([&] { read_landmarks(dir / "l3.txt"); }) == ErrorCode::FormatError);
    write_text(dir / "l4.txt", "3 1.5 2 4 extra\n");
    CHECK(error_of([&] { read_landmarks(dir / "l4.txt"); }) == ErrorCode::FormatError);

    const std::vector<Index> mask{5, 1, 99};
    write_mask(dir / "m.txt", mask);
    CHECK(read_mask(dir / "m.txt") == mask);
    write_text(dir / "m2.txt", "1\n-4\n");
    CHECK(error_of([&] { read_mask(dir / "m2.txt"); }) == ErrorCode::IndexOutOfRange);
    write_text(dir / "m3.txt", "1\nx\n");
    CHECK(error_of([&] { read_mask(dir / "m3.txt"); }) == ErrorCode::FormatError);
}

TEST_CASE("manifests resolve relative paths") {
    TempDir dir;
    fs::create_directories(dir / "sub");
    const std::vector<ManifestEntry> entries{{0, 0, "a.obj"}, {1, 0, "/abs/b.obj"}, {0, 1, "deeper/c.obj"}};
    write_training_manifest(dir / "sub/train.txt", entries);
    const std::vector<ManifestEntry> back = read_training_manifest(dir / "sub/train.txt");
    REQUIRE(back.size() == 3);
    CHECK(back[0].path == dir / "sub/a.obj");
    CHECK(back[1].path == fs::path("/abs/b.obj"));
    CHECK(back[2].path == dir / "sub/deeper/c.obj");
    CHECK(back[2].identity == 0);
    CHECK(back[2].expression == 1);

    write_text(dir / "frames.txt", "# frames\nf0.ply\n\n/x/f1.ply\n");
    const std::vector<fs::path> frames = read_frames_manifest(dir / "frames.txt");
    CHECK(frames == std::vector<fs::path>{dir / "f0.ply", "/x/f1.ply"});

    write_text(dir / "bad.txt", "0 a.obj\n");
    CHECK(error_of([&] { read_training_manifest(dir / "bad.txt"); }) == ErrorCode::FormatError);
}
