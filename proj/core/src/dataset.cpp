#include "mvkp/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <string>

#include "mvkp/error.hpp"
#include "mvkp/io.hpp"

namespace mvkp {
namespace {

std::string frame_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d.txt", t);
  return buf;
}

std::string image_name(int view, int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "v%02d_t%04d.grid", view, t);
  return buf;
}

std::string flow_name(int view, int t1, int t2) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "v%02d_t%04d_t%04d.grid", view, t1, t2);
  return buf;
}

}  // namespace

const FlowField& Dataset::flow(int view, int t1, int t2) const {
  auto it = flows.find({view, t1, t2});
  if (it == flows.end()) {
    fail(ErrorCode::kInvalidArgument, "no flow stored for view " + std::to_string(view) +
                                          " frames " + std::to_string(t1) + "->" +
                                          std::to_string(t2));
  }
  return it->second;
}

Dataset dataset_from_scene(const Scene& scene, int flow_gap) {
  require(flow_gap >= 0, ErrorCode::kInvalidArgument, "flow gap must be non-negative");
  Dataset d;
  d.cameras = scene.cameras;
  d.frames = scene.frame_count();
  d.channels = scene.channel_count();
  d.flow_gap = flow_gap;
  d.images.resize(d.frames);
  d.truth.resize(d.frames);
  for (int t = 0; t < d.frames; ++t) {
    d.occluders.push_back(scene.occluders(t));
    for (int v = 0; v < d.view_count(); ++v) {
      d.images[t].push_back(render(scene, v, t));
      d.truth[t].push_back(ground_truth(scene, v, t).annotation);
      for (int t2 = std::max(0, t - flow_gap); t2 <= std::min(d.frames - 1, t + flow_gap); ++t2) {
        if (t2 != t) d.flows.emplace(std::make_tuple(v, t, t2), ground_truth_flow(scene, v, t, t2));
      }
    }
  }
  return d;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& d) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "occluders");
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "flow");
  {
    std::ofstream meta(dir / "scene.txt");
    if (!meta) fail(ErrorCode::kIo, "cannot write " + (dir / "scene.txt").string());
    meta << "frames " << d.frames << "\nchannels " << d.channels << "\nflow_gap " << d.flow_gap
         << "\n";
  }
  write_cameras(dir / "cameras.txt", d.cameras);
  AnnotationTable table;
  for (int t = 0; t < d.frames; ++t) {
    write_occluders(dir / "occluders" / frame_name(t), d.occluders[t]);
    for (int v = 0; v < d.view_count(); ++v) {
      table[{t, v}] = d.truth[t][v];
      write_grid(dir / "images" / image_name(v, t), d.images[t][v]);
    }
  }
  write_annotations(dir / "annotations.txt", table);
  for (const auto& [key, flow] : d.flows) {
    const auto& [v, t1, t2] = key;
    write_grid(dir / "flow" / flow_name(v, t1, t2), flow);
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  {
    std::ifstream meta(dir / "scene.txt");
    if (!meta) fail(ErrorCode::kIo, "cannot open " + (dir / "scene.txt").string());
    std::string key;
    int value = 0;
    while (meta >> key >> value) {
      if (key == "frames") d.frames = value;
      else if (key == "channels") d.channels = value;
      else if (key == "flow_gap") d.flow_gap = value;
      else fail(ErrorCode::kFormat, "unknown scene key " + key);
    }
    require(d.frames >= 2 && d.channels >= 2 && d.flow_gap >= 0, ErrorCode::kFormat,
            "scene.txt is incomplete");
  }
  d.cameras = read_cameras(dir / "cameras.txt");
  require(d.cameras.size() >= 2, ErrorCode::kFormat, "scene needs at least two cameras");
  const AnnotationTable table = read_annotations(dir / "annotations.txt", d.channels);
  d.images.resize(d.frames);
  d.truth.resize(d.frames);
  for (int t = 0; t < d.frames; ++t) {
    d.occluders.push_back(read_occluders(dir / "occluders" / frame_name(t)));
    for (int v = 0; v < d.view_count(); ++v) {
      d.images[t].push_back(read_grid<Image>(dir / "images" / image_name(v, t)));
      require(d.images[t].back().channels() == 3, ErrorCode::kFormat, "images must be RGB");
      auto it = table.find({t, v});
      d.truth[t].push_back(it == table.end() ? Annotation(d.channels) : it->second);
      for (int t2 = std::max(0, t - d.flow_gap); t2 <= std::min(d.frames - 1, t + d.flow_gap);
           ++t2) {
        if (t2 == t) continue;
        d.flows.emplace(std::make_tuple(v, t, t2),
                        read_grid<FlowField>(dir / "flow" / flow_name(v, t, t2)));
      }
    }
  }
  return d;
}

}  // namespace mvkp
