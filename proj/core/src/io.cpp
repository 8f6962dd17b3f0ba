#include "mvkp/io.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include "mvkp/error.hpp"

namespace mvkp {
namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  out.precision(17);
  return out;
}

// Calls handle(line_number, stream) for each non-empty, non-comment line.
template <typename Handler>
void for_each_record(std::ifstream& in, const std::filesystem::path& path, Handler&& handle) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    handle(fields);
    std::string extra;
    if (fields.fail() || (fields >> extra)) {
      fail(ErrorCode::kFormat, path.string() + ":" + std::to_string(number) + ": malformed record");
    }
  }
}

}  // namespace

void write_cameras(const std::filesystem::path& path, const std::vector<Camera>& cameras) {
  std::ofstream out = open_output(path);
  out << "# id K(3x3) R(3x3) C(3) width height\n";
  for (std::size_t id = 0; id < cameras.size(); ++id) {
    const Camera& cam = cameras[id];
    out << id;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out << ' ' << cam.intrinsics()(r, c);
    }
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out << ' ' << cam.rotation()(r, c);
    }
    for (int k = 0; k < 3; ++k) out << ' ' << cam.center()(k);
    out << ' ' << cam.image_width() << ' ' << cam.image_height() << '\n';
  }
}

std::vector<Camera> read_cameras(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<Camera> cameras;
  for_each_record(in, path, [&](std::istringstream& fields) {
    std::size_t id = 0;
    int w = 0, h = 0;
    Eigen::Matrix3d k, r;
    Eigen::Vector3d center;
    fields >> id;
    for (int i = 0; i < 9; ++i) fields >> k(i / 3, i % 3);
    for (int i = 0; i < 9; ++i) fields >> r(i / 3, i % 3);
    fields >> center.x() >> center.y() >> center.z() >> w >> h;
    if (fields.fail()) fail(ErrorCode::kFormat, path.string() + ": malformed camera record");
    if (id != cameras.size()) {
      fail(ErrorCode::kFormat, path.string() + ": camera ids must run 0, 1, 2, ...");
    }
    try {
      cameras.emplace_back(k, r, center, w, h);
    } catch (const Error& e) {
      fail(ErrorCode::kFormat, path.string() + ": " + e.detail());
    }
  });
  return cameras;
}

void write_occluders(const std::filesystem::path& path, const OccluderSet& occluders) {
  std::ofstream out = open_output(path);
  for (const Sphere& s : occluders.spheres) {
    out << "sphere " << s.center.x() << ' ' << s.center.y() << ' ' << s.center.z() << ' '
        << s.radius << '\n';
  }
  for (const Box& b : occluders.boxes) {
    out << "box " << b.min.x() << ' ' << b.min.y() << ' ' << b.min.z() << ' ' << b.max.x() << ' '
        << b.max.y() << ' ' << b.max.z() << '\n';
  }
}

OccluderSet read_occluders(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  OccluderSet set;
  for_each_record(in, path, [&](std::istringstream& fields) {
    std::string tag;
    fields >> tag;
    if (tag == "sphere") {
      Sphere s;
      fields >> s.center.x() >> s.center.y() >> s.center.z() >> s.radius;
      set.spheres.push_back(s);
    } else if (tag == "box") {
      Box b;
      fields >> b.min.x() >> b.min.y() >> b.min.z() >> b.max.x() >> b.max.y() >> b.max.z();
      set.boxes.push_back(b);
    } else {
      fail(ErrorCode::kFormat, path.string() + ": unknown occluder '" + tag + "'");
    }
  });
  try {
    set.validate();
  } catch (const Error& e) {
    fail(ErrorCode::kFormat, path.string() + ": " + e.detail());
  }
  return set;
}

void write_annotations(const std::filesystem::path& path, const AnnotationTable& table) {
  std::ofstream out = open_output(path);
  for (const auto& [key, annotation] : table) {
    for (int c = 0; c < annotation.channel_count(); ++c) {
      const auto& label = annotation.channels[c];
      if (!label) continue;
      out << key.first << ' ' << key.second << ' ' << c << ' ' << label->pixel.x() << ' '
          << label->pixel.y() << ' ' << (label->visible ? 1 : 0) << ' '
          << (label->provenance == Provenance::kHuman ? "human" : "augmented") << '\n';
    }
  }
}

AnnotationTable read_annotations(const std::filesystem::path& path, int channels) {
  std::ifstream in = open_input(path);
  AnnotationTable table;
  for_each_record(in, path, [&](std::istringstream& fields) {
    int t = 0, view = 0, channel = 0, visible = 0;
    double x = 0.0, y = 0.0;
    std::string provenance;
    fields >> t >> view >> channel >> x >> y >> visible >> provenance;
    if (fields.fail() || t < 0 || view < 0 || channel < 0 || channel >= channels ||
        (visible != 0 && visible != 1) || (provenance != "human" && provenance != "augmented")) {
      fail(ErrorCode::kFormat, path.string() + ": malformed annotation record");
    }
    auto [it, inserted] = table.try_emplace({t, view}, channels);
    it->second.channels[channel] =
        KeypointLabel{Eigen::Vector2d(x, y), visible == 1,
                      provenance == "human" ? Provenance::kHuman : Provenance::kAugmented};
  });
  return table;
}

}  // namespace mvkp
