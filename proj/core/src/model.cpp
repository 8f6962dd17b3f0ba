#include "mvkp/model.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include "mvkp/error.hpp"

namespace mvkp {
namespace {

constexpr int kPad = kKernel / 2;
constexpr std::uint8_t kCheckpointVersion = 1;

// cols(ci*k*k + ky*k + kx, y*size + x) = in(ci, y + ky - pad, x + kx - pad)
void im2col(const double* in, int channels, int size, RowMatrix& cols) {
  cols.setZero(static_cast<Eigen::Index>(channels) * kKernel * kKernel,
               static_cast<Eigen::Index>(size) * size);
  for (int c = 0; c < channels; ++c) {
    const double* plane = in + static_cast<std::size_t>(c) * size * size;
    for (int ky = 0; ky < kKernel; ++ky) {
      for (int kx = 0; kx < kKernel; ++kx) {
        double* row = cols.row((c * kKernel + ky) * kKernel + kx).data();
        for (int y = 0; y < size; ++y) {
          const int sy = y + ky - kPad;
          if (sy < 0 || sy >= size) continue;
          const int x_lo = std::max(0, kPad - kx);
          const int x_hi = std::min(size, size + kPad - kx);
          for (int x = x_lo; x < x_hi; ++x) row[y * size + x] = plane[sy * size + x + kx - kPad];
        }
      }
    }
  }
}

// Transpose of im2col, accumulating into out (channels x size*size).
void col2im(const RowMatrix& cols, int channels, int size, RowMatrix& out) {
  out.setZero(channels, static_cast<Eigen::Index>(size) * size);
  for (int c = 0; c < channels; ++c) {
    double* plane = out.row(c).data();
    for (int ky = 0; ky < kKernel; ++ky) {
      for (int kx = 0; kx < kKernel; ++kx) {
        const double* row = cols.row((c * kKernel + ky) * kKernel + kx).data();
        for (int y = 0; y < size; ++y) {
          const int sy = y + ky - kPad;
          if (sy < 0 || sy >= size) continue;
          const int x_lo = std::max(0, kPad - kx);
          const int x_hi = std::min(size, size + kPad - kx);
          for (int x = x_lo; x < x_hi; ++x) plane[sy * size + x + kx - kPad] += row[y * size + x];
        }
      }
    }
  }
}

template <typename T>
void write_pod(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) fail(ErrorCode::kFormat, "truncated checkpoint");
  return value;
}

void write_vector(std::ofstream& out, const Eigen::VectorXd& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_vector(std::ifstream& in, Eigen::VectorXd& v) {
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!in) fail(ErrorCode::kFormat, "truncated checkpoint");
}

}  // namespace

PredictorWeights::PredictorWeights(int channels) : channels_(channels) {
  require(channels >= 2, ErrorCode::kInvalidArgument, "predictor needs at least two channels");
  const int k2 = kKernel * kKernel;
  const std::pair<const char*, std::pair<int, int>> layout[] = {
      {"conv1.weight", {kFeatures1, 3 * k2}},   {"conv1.bias", {kFeatures1, 1}},
      {"conv2.weight", {kFeatures2, kFeatures1 * k2}}, {"conv2.bias", {kFeatures2, 1}},
      {"head_p.weight", {channels, kFeatures2}}, {"head_p.bias", {channels, 1}},
      {"head_v.weight", {channels, kFeatures2}}, {"head_v.bias", {channels, 1}},
  };
  std::size_t offset = 0;
  for (const auto& [name, shape] : layout) {
    tensors_.push_back({name, offset, shape.first, shape.second});
    offset += tensors_.back().size();
  }
  values_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
}

PredictorWeights PredictorWeights::random(int channels, std::uint64_t seed, double scale) {
  PredictorWeights weights(channels);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (Eigen::Index k = 0; k < weights.values_.size(); ++k) weights.values_[k] = dist(rng);
  return weights;
}

Eigen::Map<const RowMatrix> PredictorWeights::matrix(int tensor) const {
  const Tensor& t = tensors_.at(tensor);
  return {values_.data() + t.offset, t.rows, t.cols};
}

Eigen::Map<RowMatrix> PredictorWeights::matrix(int tensor) {
  const Tensor& t = tensors_.at(tensor);
  return {values_.data() + t.offset, t.rows, t.cols};
}

ForwardResult forward(const PredictorWeights& weights, const Image& image) {
  require(image.width() == kInputSize && image.height() == kInputSize && image.channels() == 3,
          ErrorCode::kShapeMismatch, "predictor expects a 64x64x3 image");
  const int channels = weights.channels();
  const int n2 = kGridSize * kGridSize;
  ForwardResult out;
  ActivationCache& cache = out.cache;

  im2col(image.values().data(), 3, kInputSize, cache.cols1);
  cache.pre1.noalias() = weights.matrix(kConv1Weight) * cache.cols1;
  cache.pre1.colwise() += weights.matrix(kConv1Bias).col(0);

  RowMatrix pooled(kFeatures1, n2);
  for (int c = 0; c < kFeatures1; ++c) {
    const double* src = cache.pre1.row(c).data();
    for (int y = 0; y < kGridSize; ++y) {
      for (int x = 0; x < kGridSize; ++x) {
        const int base = 2 * y * kInputSize + 2 * x;
        pooled(c, y * kGridSize + x) =
            0.25 * (std::max(src[base], 0.0) + std::max(src[base + 1], 0.0) +
                    std::max(src[base + kInputSize], 0.0) +
                    std::max(src[base + kInputSize + 1], 0.0));
      }
    }
  }

  im2col(pooled.data(), kFeatures1, kGridSize, cache.cols2);
  cache.pre2.noalias() = weights.matrix(kConv2Weight) * cache.cols2;
  cache.pre2.colwise() += weights.matrix(kConv2Bias).col(0);
  cache.hidden = cache.pre2.cwiseMax(0.0);

  RowMatrix logits_p = weights.matrix(kHeadPWeight) * cache.hidden;
  logits_p.colwise() += weights.matrix(kHeadPBias).col(0);
  RowMatrix logits_v = weights.matrix(kHeadVWeight) * cache.hidden;
  logits_v.colwise() += weights.matrix(kHeadVBias).col(0);

  cache.p.resize(channels, n2);
  for (int c = 0; c < channels; ++c) {
    const double top = logits_p.row(c).maxCoeff();
    cache.p.row(c) = (logits_p.row(c).array() - top).exp();
    cache.p.row(c) /= cache.p.row(c).sum();
  }
  cache.v = (1.0 / (1.0 + (-logits_v.array()).exp())).matrix();

  out.heatmap = Heatmap(kGridSize, kGridSize, channels);
  out.visibility = VisibilityMap(kGridSize, kGridSize, channels);
  std::copy(cache.p.data(), cache.p.data() + cache.p.size(), out.heatmap.values().begin());
  std::copy(cache.v.data(), cache.v.data() + cache.v.size(), out.visibility.values().begin());
  return out;
}

Eigen::VectorXd backward(const PredictorWeights& weights, const ActivationCache& cache,
                         const GradientGrid& grad_heatmap, const GradientGrid& grad_visibility) {
  const int channels = weights.channels();
  const int n2 = kGridSize * kGridSize;
  const GridShape expected{kGridSize, kGridSize, channels};
  require(grad_heatmap.shape() == expected && grad_visibility.shape() == expected,
          ErrorCode::kShapeMismatch, "output gradients do not match the predictor");

  PredictorWeights grads(channels);
  const Eigen::Map<const RowMatrix> gp(grad_heatmap.values().data(), channels, n2);
  const Eigen::Map<const RowMatrix> gv(grad_visibility.values().data(), channels, n2);

  RowMatrix dlogits_p(channels, n2);
  for (int c = 0; c < channels; ++c) {
    const double dot = gp.row(c).dot(cache.p.row(c));
    dlogits_p.row(c) = cache.p.row(c).array() * (gp.row(c).array() - dot);
  }
  const RowMatrix dlogits_v =
      (gv.array() * cache.v.array() * (1.0 - cache.v.array())).matrix();

  grads.matrix(kHeadPWeight).noalias() = dlogits_p * cache.hidden.transpose();
  grads.matrix(kHeadPBias).col(0) = dlogits_p.rowwise().sum();
  grads.matrix(kHeadVWeight).noalias() = dlogits_v * cache.hidden.transpose();
  grads.matrix(kHeadVBias).col(0) = dlogits_v.rowwise().sum();

  RowMatrix dpre2 = weights.matrix(kHeadPWeight).transpose() * dlogits_p;
  dpre2.noalias() += weights.matrix(kHeadVWeight).transpose() * dlogits_v;
  dpre2 = (cache.pre2.array() > 0.0).select(dpre2, 0.0);

  grads.matrix(kConv2Weight).noalias() = dpre2 * cache.cols2.transpose();
  grads.matrix(kConv2Bias).col(0) = dpre2.rowwise().sum();

  const RowMatrix dcols2 = weights.matrix(kConv2Weight).transpose() * dpre2;
  RowMatrix dpooled;
  col2im(dcols2, kFeatures1, kGridSize, dpooled);

  RowMatrix dpre1(kFeatures1, kInputSize * kInputSize);
  for (int c = 0; c < kFeatures1; ++c) {
    const double* pre = cache.pre1.row(c).data();
    double* dst = dpre1.row(c).data();
    for (int y = 0; y < kInputSize; ++y) {
      for (int x = 0; x < kInputSize; ++x) {
        const int k = y * kInputSize + x;
        dst[k] = pre[k] > 0.0 ? 0.25 * dpooled(c, (y / 2) * kGridSize + x / 2) : 0.0;
      }
    }
  }
  grads.matrix(kConv1Weight).noalias() = dpre1 * cache.cols1.transpose();
  grads.matrix(kConv1Bias).col(0) = dpre1.rowwise().sum();
  return grads.values();
}

OptimizerState OptimizerState::for_weights(const PredictorWeights& weights, double learning_rate) {
  OptimizerState state;
  state.learning_rate = learning_rate;
  state.m = Eigen::VectorXd::Zero(weights.values().size());
  state.v = Eigen::VectorXd::Zero(weights.values().size());
  return state;
}

void step(OptimizerState& state, PredictorWeights& weights, const Eigen::VectorXd& grads) {
  require(state.m.size() == weights.values().size() && state.v.size() == weights.values().size() &&
              grads.size() == weights.values().size(),
          ErrorCode::kShapeMismatch, "optimizer state does not match the weights");
  ++state.step;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseProduct(grads);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  weights.values().array() -= state.learning_rate * (state.m.array() / c1) /
                              ((state.v.array() / c2).sqrt() + state.epsilon);
}

void save_checkpoint(const std::filesystem::path& path, const PredictorWeights& weights,
                     const OptimizerState* optimizer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write checkpoint " + path.string());
  write_pod<std::uint8_t>(out, kCheckpointVersion);
  write_pod<std::int32_t>(out, weights.channels());
  write_pod<std::int32_t>(out, static_cast<std::int32_t>(weights.tensors().size()));
  for (const auto& t : weights.tensors()) {
    write_pod<std::int32_t>(out, t.rows);
    write_pod<std::int32_t>(out, t.cols);
  }
  write_vector(out, weights.values());
  write_pod<std::uint8_t>(out, optimizer ? 1 : 0);
  if (optimizer) {
    write_pod<std::int64_t>(out, optimizer->step);
    write_pod<double>(out, optimizer->learning_rate);
    write_pod<double>(out, optimizer->beta1);
    write_pod<double>(out, optimizer->beta2);
    write_pod<double>(out, optimizer->epsilon);
    write_vector(out, optimizer->m);
    write_vector(out, optimizer->v);
  }
  if (!out) fail(ErrorCode::kIo, "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open checkpoint " + path.string());
  if (read_pod<std::uint8_t>(in) != kCheckpointVersion) {
    fail(ErrorCode::kFormat, "unsupported checkpoint version");
  }
  const int channels = read_pod<std::int32_t>(in);
  require(channels >= 2 && channels < 4096, ErrorCode::kFormat, "bad channel count in checkpoint");
  Checkpoint ckpt{PredictorWeights(channels), std::nullopt};
  const int tensor_count = read_pod<std::int32_t>(in);
  require(tensor_count == static_cast<int>(ckpt.weights.tensors().size()), ErrorCode::kFormat,
          "checkpoint tensor count does not match the predictor");
  for (const auto& t : ckpt.weights.tensors()) {
    const int rows = read_pod<std::int32_t>(in);
    const int cols = read_pod<std::int32_t>(in);
    require(rows == t.rows && cols == t.cols, ErrorCode::kFormat,
            "checkpoint tensor shape does not match the predictor");
  }
  read_vector(in, ckpt.weights.values());
  if (read_pod<std::uint8_t>(in) != 0) {
    OptimizerState state = OptimizerState::for_weights(ckpt.weights, 0.0);
    state.step = read_pod<std::int64_t>(in);
    state.learning_rate = read_pod<double>(in);
    state.beta1 = read_pod<double>(in);
    state.beta2 = read_pod<double>(in);
    state.epsilon = read_pod<double>(in);
    read_vector(in, state.m);
    read_vector(in, state.v);
    ckpt.optimizer = std::move(state);
  }
  return ckpt;
}

}  // namespace mvkp
