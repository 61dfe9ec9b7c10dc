#pragma once
// File formats.
//
// OBJ grids: a header comment `# mlwave grid rows R cols C levels L`, then
// R*C `v x y z` lines in row-major order (vertex (r, c) is line r*C + c),
// then `f` lines for the (R-1)(C-1) quads, 1-based, counter-clockwise
// (r,c) (r+1,c) (r+1,c+1) (r,c+1). Files without the header are accepted
// when rows/cols/levels are supplied by the caller.
//
// PLY point clouds: binary_little_endian 1.0, one `vertex` element with
// properties x y z nx ny nz. Writing uses double; reading accepts float or
// double for each property and ignores unknown properties and elements
// that follow the vertices.
//
// Text formats (blank lines and `#` comments skipped):
//   landmarks:  model_index x y z
//   mask:       vertex_index
//   training:   identity_id expression_id path
//   frames:     path
#include "mlwave/mesh.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mlwave {

void write_obj(const std::filesystem::path& path, const QuadGridShape& shape);
QuadGridShape read_obj(const std::filesystem::path& path, std::optional<GridSpec> grid = std::nullopt);

void write_ply(const std::filesystem::path& path, const Points& points, const Points& normals);
// Returns a scan without landmarks; normals are renormalised when within
// 1e-3 of unit length.
TargetScan read_ply(const std::filesystem::path& path);

void write_landmarks(const std::filesystem::path& path, const LandmarkSet& landmarks);
LandmarkSet read_landmarks(const std::filesystem::path& path);

void write_mask(const std::filesystem::path& path, const std::vector<Index>& mask);
std::vector<Index> read_mask(const std::filesystem::path& path);

struct ManifestEntry {
    int identity = 0;
    int expression = 0;
    std::filesystem::path path;
};
// Relative paths are resolved against the manifest's directory.
std::vector<ManifestEntry> read_training_manifest(const std::filesystem::path& path);
void write_training_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);
std::vector<std::filesystem::path> read_frames_manifest(const std::filesystem::path& path);

}  // namespace mlwave
