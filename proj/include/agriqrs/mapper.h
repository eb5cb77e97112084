#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "agriqrs/embed.h"

namespace agriqrs::mapper {

enum class MapperKind { kLstm, kLinear };

std::string to_string(MapperKind kind);
MapperKind parse_mapper_kind(const std::string& name);

struct MapperDims {
  std::size_t input = 768;
  std::size_t hidden1 = 768;
  std::size_t hidden2 = 512;
  std::size_t classes = 0;
};

struct Tensor {
  std::string name;
  Eigen::MatrixXd value;  // biases are single-column
};

// Classifier from a sentence embedding to a cluster label.
//
// The LSTM kind feeds the embedding as a one-step sequence through two
// stacked LSTM layers (zero initial state; gate rows ordered input, forget,
// candidate, output), applies dropout to the second layer's output while
// training, then a dense softmax head. Tensors, in order:
//   lstm1.kernel [4*h1 x d]   lstm1.bias [4*h1]
//   lstm2.kernel [4*h2 x h1]  lstm2.bias [4*h2]
//   dense.kernel [M x h2]     dense.bias [M]
// The linear kind is softmax regression: dense.kernel [M x d], dense.bias.
struct MapperModel {
  MapperKind kind = MapperKind::kLstm;
  MapperDims dims;
  double dropout = 0.2;
  std::vector<std::size_t> label_map;  // class id -> cluster id
  std::vector<Tensor> tensors;

  static MapperModel zeros(MapperKind kind, const MapperDims& dims,
                           double dropout);
  // Every entry uniform in +-1/sqrt(fan_in) of its layer.
  static MapperModel initialized(MapperKind kind, const MapperDims& dims,
                                 double dropout, std::uint64_t seed);

  const Tensor& tensor(const std::string& name) const;
  Tensor& tensor(const std::string& name);

  std::size_t parameter_count() const;

  // Shapes agree with dims, classes >= 2, all values finite.
  void validate() const;
};

// Expected tensor names and shapes for a kind/dims pair.
std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>>
tensor_layout(MapperKind kind, const MapperDims& dims);

// Rounds every parameter through float32, matching the on-disk precision.
void round_to_float32(MapperModel& model);

enum class ForwardMode { kTrain, kInfer };

// Rows of `batch` are embeddings; returns one probability row per input.
// Dropout uses a mask drawn from `seed` in train mode only.
Eigen::MatrixXd lstm_forward(const MapperModel& model,
                             const Eigen::MatrixXd& batch, ForwardMode mode,
                             std::uint64_t seed);

struct Prediction {
  std::size_t class_id = 0;
  double probability = 0.0;
};

// Argmax of the inference-mode distribution; ties go to the lowest class id.
Prediction predict_cluster(const MapperModel& model,
                           const embed::EmbeddingVector& embedding);

struct LabeledExample {
  embed::EmbeddingVector embedding;
  std::size_t label = 0;
};

Eigen::MatrixXd to_batch(const std::vector<LabeledExample>& examples);

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  double dropout = 0.2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 42;
  double train_fraction = 0.8;
  std::size_t hidden1 = 768;
  std::size_t hidden2 = 512;

  void validate() const;  // throws ConfigError
};

struct TrainResult {
  MapperModel model;
  std::vector<double> epoch_losses;  // mean training cross-entropy per epoch
};

// Adam on mean cross-entropy over shuffled mini-batches. The example order is
// canonicalized first, so the trajectory depends only on the example multiset
// and the seed. Throws TrainingError on a non-finite loss.
TrainResult train_mapper(const std::vector<LabeledExample>& train,
                         const TrainConfig& config, MapperKind kind);

// Mean cross-entropy and its analytic gradient (one matrix per tensor), with
// dropout disabled.
std::pair<double, std::vector<Eigen::MatrixXd>> loss_and_gradient(
    const MapperModel& model, const std::vector<LabeledExample>& batch);

double mean_cross_entropy(const MapperModel& model,
                          const std::vector<LabeledExample>& batch);

struct GradientCheck {
  double max_relative_error = 0.0;
  bool passed = false;
  std::vector<double> tensor_gradient_norms;  // analytic, per tensor
};

// Central differences (step 1e-5) for every parameter against the analytic
// gradient. Relative error is |a - n| / max(|a|, |n|, 1e-8).
GradientCheck gradient_check(const MapperModel& model,
                             const std::vector<LabeledExample>& batch,
                             double tolerance = 1e-4);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Stratified: per label floor(fraction * count) go to training, clamped so
// both sides get at least one. Throws ContractError for a label with a
// single example.
Split split_indices(const std::vector<std::size_t>& labels, double fraction,
                    std::uint64_t seed);

std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>>
split_dataset(const std::vector<LabeledExample>& examples, double fraction,
              std::uint64_t seed);

}  // namespace agriqrs::mapper
