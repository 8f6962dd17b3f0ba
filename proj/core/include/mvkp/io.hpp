#pragma once

#include <filesystem>
#include <map>
#include <utility>
#include <vector>

#include "mvkp/geometry.hpp"
#include "mvkp/heatmap.hpp"
#include "mvkp/visibility.hpp"

namespace mvkp {

// One line per camera: id, K and R row-major, the center, then width and height.
void write_cameras(const std::filesystem::path& path, const std::vector<Camera>& cameras);
std::vector<Camera> read_cameras(const std::filesystem::path& path);

// `sphere cx cy cz r` / `box minx miny minz maxx maxy maxz`.
void write_occluders(const std::filesystem::path& path, const OccluderSet& occluders);
OccluderSet read_occluders(const std::filesystem::path& path);

// Annotations keyed by (frame, view).
using AnnotationTable = std::map<std::pair<int, int>, Annotation>;

// `t view channel x y visible provenance`, provenance is human or augmented.
void write_annotations(const std::filesystem::path& path, const AnnotationTable& table);
AnnotationTable read_annotations(const std::filesystem::path& path, int channels);

}  // namespace mvkp
