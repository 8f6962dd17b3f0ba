#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mvkp/grid.hpp"

namespace mvkp {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kInputSize = kImageSize;
inline constexpr int kKernel = 5;
inline constexpr int kFeatures1 = 8;
inline constexpr int kFeatures2 = 16;

// Parameters of the predictor, stored flat. Tensors in order: conv1 weight
// (8, 3, 5, 5), conv1 bias, conv2 weight (16, 8, 5, 5), conv2 bias, keypoint
// head (C, 16), keypoint bias, visibility head (C, 16), visibility bias.
class PredictorWeights {
 public:
  struct Tensor {
    std::string name;
    std::size_t offset;
    int rows;
    int cols;

    std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
  };

  explicit PredictorWeights(int channels);
  static PredictorWeights random(int channels, std::uint64_t seed, double scale = 0.05);

  int channels() const { return channels_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  Eigen::VectorXd& values() { return values_; }
  const Eigen::VectorXd& values() const { return values_; }

  Eigen::Map<const RowMatrix> matrix(int tensor) const;
  Eigen::Map<RowMatrix> matrix(int tensor);

  friend bool operator==(const PredictorWeights& a, const PredictorWeights& b) {
    return a.channels_ == b.channels_ && a.values_ == b.values_;
  }

 private:
  int channels_;
  std::vector<Tensor> tensors_;
  Eigen::VectorXd values_;
};

enum WeightTensor {
  kConv1Weight,
  kConv1Bias,
  kConv2Weight,
  kConv2Bias,
  kHeadPWeight,
  kHeadPBias,
  kHeadVWeight,
  kHeadVBias,
};

struct ActivationCache {
  RowMatrix cols1;   // im2col of the input, 75 x 4096
  RowMatrix pre1;    // conv1 before ReLU, 8 x 4096
  RowMatrix cols2;   // im2col of the pooled features, 200 x 1024
  RowMatrix pre2;    // conv2 before ReLU, 16 x 1024
  RowMatrix hidden;  // ReLU(pre2)
  RowMatrix p;       // softmax rows, C x 1024
  RowMatrix v;       // logistic, C x 1024
};

struct ForwardResult {
  Heatmap heatmap;
  VisibilityMap visibility;
  ActivationCache cache;
};

ForwardResult forward(const PredictorWeights& weights, const Image& image);

// Gradient of the loss w.r.t. every parameter, in the flat layout.
Eigen::VectorXd backward(const PredictorWeights& weights, const ActivationCache& cache,
                         const GradientGrid& grad_heatmap, const GradientGrid& grad_visibility);

struct OptimizerState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;

  static OptimizerState for_weights(const PredictorWeights& weights, double learning_rate);
};

// Bias-corrected Adam update in place.
void step(OptimizerState& state, PredictorWeights& weights, const Eigen::VectorXd& grads);

// Binary checkpoint: version byte, channel count, tensor shapes, float64
// values, then optional optimizer state.
void save_checkpoint(const std::filesystem::path& path, const PredictorWeights& weights,
                     const OptimizerState* optimizer = nullptr);

struct Checkpoint {
  PredictorWeights weights;
  std::optional<OptimizerState> optimizer;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mvkp
