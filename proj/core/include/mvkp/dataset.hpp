#pragma once

#include <filesystem>
#include <map>
#include <tuple>
#include <vector>

#include "mvkp/geometry.hpp"
#include "mvkp/grid.hpp"
#include "mvkp/heatmap.hpp"
#include "mvkp/synth.hpp"
#include "mvkp/visibility.hpp"

namespace mvkp {

// Everything training and evaluation read from a multiview sequence.
struct Dataset {
  std::vector<Camera> cameras;
  int frames = 0;
  int channels = 0;
  int flow_gap = 0;
  std::vector<std::vector<Image>> images;      // [t][view]
  std::vector<std::vector<Annotation>> truth;  // [t][view]
  std::vector<OccluderSet> occluders;          // [t]
  // Backward flow on the t1 grid keyed by (view, t1, t2), 0 < |t1 - t2| <= flow_gap.
  std::map<std::tuple<int, int, int>, FlowField> flows;

  int view_count() const { return static_cast<int>(cameras.size()); }
  const FlowField& flow(int view, int t1, int t2) const;
};

Dataset dataset_from_scene(const Scene& scene, int flow_gap);

// Directory layout: scene.txt, cameras.txt, annotations.txt,
// occluders/frame_TTTT.txt, images/vVV_tTTTT.grid, flow/vVV_tTTTT_tTTTT.grid.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace mvkp
