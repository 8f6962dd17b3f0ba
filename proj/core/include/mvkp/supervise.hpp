#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "mvkp/epipolar_transfer.hpp"
#include "mvkp/grid.hpp"
#include "mvkp/heatmap.hpp"
#include "mvkp/temporal.hpp"

namespace mvkp {

struct LossWeights {
  double lambda_c = 1.0;
  double lambda_t = 1.0;
  double lambda_v = 1.0;
  double eps_m = 0.5;     // flow-sum gate, grid units
  double eps_M = 2000.0;  // flow-sum gate, grid units
  double eps_c = 4.5;     // adjacency radius, world units
  double sigma_gt = 1.0;  // label Gaussian, grid units

  // Throws kConfigInvalid.
  void validate() const;
};

// Target heatmap of an annotation: a Gaussian per labeled keypoint channel and
// a background channel proportional to one minus the largest peak-one
// keypoint Gaussian. Unlabeled keypoint channels are left at zero.
Heatmap label_heatmap(const Annotation& annotation, double sigma, int width, int height);

// Per-channel visibility target, or nullopt for unlabeled channels. The
// background channel is labeled whenever any keypoint is.
std::vector<std::optional<double>> label_visibility(const Annotation& annotation);

struct LabelLossResult {
  double value = 0.0;
  double keypoint = 0.0;
  double visibility = 0.0;
  GradientGrid grad_p;
  GradientGrid grad_v;
};

// D_KL(target || P) per labeled channel plus a Bernoulli KL between the
// visibility label and each channel's maximum of V.
LabelLossResult label_loss(const Heatmap& p, const VisibilityMap& v, const Annotation& annotation,
                           double sigma_gt);

struct Prediction {
  Heatmap heatmap;
  VisibilityMap visibility;
};

struct TemporalPartner {
  int slot = 0;  // prediction at t2, same view
  std::shared_ptr<const BilinearWarp> warp;
};

// Gate-filtered partner; nullopt when the flow magnitude is outside the gate.
std::optional<TemporalPartner> make_temporal_partner(int slot, const FlowField& flow,
                                                     const LossWeights& weights);

struct ViewPartner {
  int slot = 0;  // prediction of view j at t1
  std::shared_ptr<const TransferPlan> plan_reference;
  std::shared_ptr<const TransferPlan> plan_partner;
};

// One reference prediction and the partners it is compared against. Slots
// index the prediction list passed to overall_loss.
struct Batch {
  int reference = 0;
  std::optional<Annotation> annotation;
  std::optional<TemporalPartner> temporal;
  std::vector<ViewPartner> views;
  // Adjacent views at the same time, compared through per-channel maxima.
  std::vector<int> visibility_partners;
};

struct LossBreakdown {
  double label = 0.0;
  double cross = 0.0;
  double temporal = 0.0;
  double visibility = 0.0;
  double total = 0.0;
};

struct OverallLossResult {
  LossBreakdown values;  // unweighted components, weighted total
  std::vector<GradientGrid> grad_heatmap;
  std::vector<GradientGrid> grad_visibility;
};

// L_L + lambda_C L_C + lambda_T L_T + lambda_V L_V summed over batches, with
// gradients accumulated per prediction slot. The cross-view and temporal terms
// act on keypoint channels; the last channel is the background.
OverallLossResult overall_loss(std::span<const Prediction> predictions,
                               std::span<const Batch> batches, const LossWeights& weights,
                               const TemporalOptions& temporal_options = {});

}  // namespace mvkp
