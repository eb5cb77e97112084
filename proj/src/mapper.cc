#include "agriqrs/mapper.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "agriqrs/errors.h"
#include "agriqrs/rng.h"

namespace agriqrs::mapper {
namespace {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;

MatrixXd sigmoid(const MatrixXd& z) {
  return z.unaryExpr([](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

MatrixXd affine(const MatrixXd& x, const MatrixXd& kernel, const MatrixXd& bias) {
  MatrixXd z = x * kernel.transpose();
  z.rowwise() += bias.col(0).transpose();
  return z;
}

// Row-wise log-softmax.
MatrixXd log_softmax(const MatrixXd& logits) {
  MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const double lse =
        mx + std::log((logits.row(r).array() - mx).exp().sum());
    out.row(r) = logits.row(r).array() - lse;
  }
  return out;
}

struct LstmCache {
  MatrixXd x, i, f, g, o, c, tanh_c, h;
};

LstmCache lstm_step(const MatrixXd& x, const MatrixXd& kernel,
                    const MatrixXd& bias) {
  const Eigen::Index hidden = kernel.rows() / 4;
  const MatrixXd z = affine(x, kernel, bias);
  LstmCache k;
  k.x = x;
  k.i = sigmoid(z.middleCols(0, hidden));
  k.f = sigmoid(z.middleCols(hidden, hidden));
  k.g = z.middleCols(2 * hidden, hidden).array().tanh();
  k.o = sigmoid(z.middleCols(3 * hidden, hidden));
  const MatrixXd c_prev = MatrixXd::Zero(x.rows(), hidden);
  k.c = k.f.cwiseProduct(c_prev) + k.i.cwiseProduct(k.g);
  k.tanh_c = k.c.array().tanh();
  k.h = k.o.cwiseProduct(k.tanh_c);
  return k;
}

// Returns d(loss)/d(x); writes the kernel and bias gradients.
MatrixXd lstm_backward(const LstmCache& k, const MatrixXd& kernel,
                       const MatrixXd& dh, MatrixXd& dkernel, MatrixXd& dbias) {
  const Eigen::Index hidden = k.h.cols();
  const MatrixXd c_prev = MatrixXd::Zero(k.h.rows(), hidden);
  const MatrixXd d_o = dh.cwiseProduct(k.tanh_c);
  const MatrixXd dc = dh.cwiseProduct(k.o).cwiseProduct(
      (1.0 - k.tanh_c.array().square()).matrix());
  MatrixXd dz(k.h.rows(), 4 * hidden);
  dz.middleCols(0, hidden) = dc.cwiseProduct(k.g).cwiseProduct(
      k.i.cwiseProduct((1.0 - k.i.array()).matrix()));
  dz.middleCols(hidden, hidden) = dc.cwiseProduct(c_prev).cwiseProduct(
      k.f.cwiseProduct((1.0 - k.f.array()).matrix()));
  dz.middleCols(2 * hidden, hidden) = dc.cwiseProduct(k.i).cwiseProduct(
      (1.0 - k.g.array().square()).matrix());
  dz.middleCols(3 * hidden, hidden) = d_o.cwiseProduct(
      k.o.cwiseProduct((1.0 - k.o.array()).matrix()));
  dkernel = dz.transpose() * k.x;
  dbias = dz.colwise().sum().transpose();
  return dz * kernel;
}

MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate,
                      std::uint64_t seed) {
  Rng rng(seed);
  const double keep = 1.0 - rate;
  MatrixXd mask(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      mask(r, c) = rng.bernoulli(keep) ? 1.0 / keep : 0.0;
  return mask;
}

struct Forward {
  LstmCache l1, l2;
  MatrixXd mask;    // empty when dropout is off
  MatrixXd head_in;
  MatrixXd log_probs;
};

Forward run_forward(const MapperModel& m, const MatrixXd& batch,
                    ForwardMode mode, std::uint64_t seed) {
  if (static_cast<std::size_t>(batch.cols()) != m.dims.input)
    throw ContractError("mapper input dimension " +
                        std::to_string(batch.cols()) + " != " +
                        std::to_string(m.dims.input));
  Forward f;
  if (m.kind == MapperKind::kLinear) {
    f.head_in = batch;
    f.log_probs = log_softmax(
        affine(batch, m.tensors[0].value, m.tensors[1].value));
    return f;
  }
  f.l1 = lstm_step(batch, m.tensors[0].value, m.tensors[1].value);
  f.l2 = lstm_step(f.l1.h, m.tensors[2].value, m.tensors[3].value);
  if (mode == ForwardMode::kTrain && m.dropout > 0.0) {
    f.mask = dropout_mask(f.l2.h.rows(), f.l2.h.cols(), m.dropout, seed);
    f.head_in = f.l2.h.cwiseProduct(f.mask);
  } else {
    f.head_in = f.l2.h;
  }
  f.log_probs =
      log_softmax(affine(f.head_in, m.tensors[4].value, m.tensors[5].value));
  return f;
}

double cross_entropy(const MatrixXd& log_probs,
                     const std::vector<std::size_t>& labels) {
  double total = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r)
    total -= log_probs(static_cast<Eigen::Index>(r),
                       static_cast<Eigen::Index>(labels[r]));
  return total / static_cast<double>(labels.size());
}

std::vector<MatrixXd> backward(const MapperModel& m, const Forward& f,
                               const std::vector<std::size_t>& labels) {
  const auto n = static_cast<double>(labels.size());
  MatrixXd dlogits = f.log_probs.array().exp();
  for (std::size_t r = 0; r < labels.size(); ++r)
    dlogits(static_cast<Eigen::Index>(r),
            static_cast<Eigen::Index>(labels[r])) -= 1.0;
  dlogits /= n;

  std::vector<MatrixXd> grads(m.tensors.size());
  const std::size_t head = m.tensors.size() - 2;
  grads[head] = dlogits.transpose() * f.head_in;
  grads[head + 1] = dlogits.colwise().sum().transpose();
  if (m.kind == MapperKind::kLinear) return grads;

  MatrixXd dh2 = dlogits * m.tensors[head].value;
  if (f.mask.size() != 0) dh2 = dh2.cwiseProduct(f.mask);
  const MatrixXd dh1 =
      lstm_backward(f.l2, m.tensors[2].value, dh2, grads[2], grads[3]);
  lstm_backward(f.l1, m.tensors[0].value, dh1, grads[0], grads[1]);
  return grads;
}

std::vector<std::size_t> labels_of(const std::vector<LabeledExample>& batch,
                                   std::size_t classes) {
  std::vector<std::size_t> labels;
  labels.reserve(batch.size());
  for (const auto& e : batch) {
    if (e.label >= classes)
      throw ContractError("label " + std::to_string(e.label) +
                          " outside the mapper's " + std::to_string(classes) +
                          " classes");
    labels.push_back(e.label);
  }
  return labels;
}

}  // namespace

std::string to_string(MapperKind kind) {
  return kind == MapperKind::kLstm ? "lstm" : "linear";
}

MapperKind parse_mapper_kind(const std::string& name) {
  if (name == "lstm") return MapperKind::kLstm;
  if (name == "linear") return MapperKind::kLinear;
  throw ConfigError("unknown mapper kind '" + name + "'");
}

std::vector<std::pair<std::string, std::pair<std::size_t, std::size_t>>>
tensor_layout(MapperKind kind, const MapperDims& d) {
  if (kind == MapperKind::kLinear)
    return {{"dense.kernel", {d.classes, d.input}}, {"dense.bias", {d.classes, 1}}};
  return {{"lstm1.kernel", {4 * d.hidden1, d.input}},
          {"lstm1.bias", {4 * d.hidden1, 1}},
          {"lstm2.kernel", {4 * d.hidden2, d.hidden1}},
          {"lstm2.bias", {4 * d.hidden2, 1}},
          {"dense.kernel", {d.classes, d.hidden2}},
          {"dense.bias", {d.classes, 1}}};
}

MapperModel MapperModel::zeros(MapperKind kind, const MapperDims& dims,
                               double dropout) {
  MapperModel m;
  m.kind = kind;
  m.dims = dims;
  m.dropout = dropout;
  m.label_map.resize(dims.classes);
  std::iota(m.label_map.begin(), m.label_map.end(), std::size_t{0});
  for (const auto& [name, shape] : tensor_layout(kind, dims))
    m.tensors.push_back(
        {name, MatrixXd::Zero(static_cast<Eigen::Index>(shape.first),
                              static_cast<Eigen::Index>(shape.second))});
  return m;
}

MapperModel MapperModel::initialized(MapperKind kind, const MapperDims& dims,
                                     double dropout, std::uint64_t seed) {
  MapperModel m = zeros(kind, dims, dropout);
  Rng rng(seed);
  for (std::size_t t = 0; t < m.tensors.size(); t += 2) {
    const auto fan_in = static_cast<double>(m.tensors[t].value.cols());
    const double limit = 1.0 / std::sqrt(fan_in);
    for (std::size_t u = t; u < t + 2; ++u) {
      auto& v = m.tensors[u].value;
      for (Eigen::Index r = 0; r < v.rows(); ++r)
        for (Eigen::Index c = 0; c < v.cols(); ++c)
          v(r, c) = rng.uniform(-limit, limit);
    }
  }
  return m;
}

const Tensor& MapperModel::tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw ContractError("mapper has no tensor '" + name + "'");
}

Tensor& MapperModel::tensor(const std::string& name) {
  return const_cast<Tensor&>(std::as_const(*this).tensor(name));
}

std::size_t MapperModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += static_cast<std::size_t>(t.value.size());
  return n;
}

void MapperModel::validate() const {
  if (dims.classes < 2)
    throw ContractError("mapper needs at least 2 classes");
  if (dims.input == 0 ||
      (kind == MapperKind::kLstm && (dims.hidden1 == 0 || dims.hidden2 == 0)))
    throw ContractError("mapper dimensions must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ContractError("dropout must be in [0, 1)");
  if (label_map.size() != dims.classes)
    throw ContractError("label map size does not match class count");
  const auto layout = tensor_layout(kind, dims);
  if (layout.size() != tensors.size())
    throw ContractError("mapper tensor count mismatch");
  for (std::size_t t = 0; t < layout.size(); ++t) {
    const auto& [name, shape] = layout[t];
    const auto& v = tensors[t].value;
    if (tensors[t].name != name ||
        static_cast<std::size_t>(v.rows()) != shape.first ||
        static_cast<std::size_t>(v.cols()) != shape.second)
      throw ContractError("mapper tensor '" + tensors[t].name +
                          "' does not match expected '" + name + "' [" +
                          std::to_string(shape.first) + " x " +
                          std::to_string(shape.second) + "]");
    if (!v.allFinite())
      throw ContractError("mapper tensor '" + name + "' has non-finite values");
  }
}

void round_to_float32(MapperModel& model) {
  for (auto& t : model.tensors)
    t.value = t.value.cast<float>().cast<double>();
}

MatrixXd lstm_forward(const MapperModel& model, const MatrixXd& batch,
                      ForwardMode mode, std::uint64_t seed) {
  return run_forward(model, batch, mode, seed).log_probs.array().exp();
}

Prediction predict_cluster(const MapperModel& model,
                           const embed::EmbeddingVector& embedding) {
  const MatrixXd x = Eigen::Map<const RowVectorXd>(
      embedding.values.data(), static_cast<Eigen::Index>(embedding.values.size()));
  const MatrixXd p = lstm_forward(model, x, ForwardMode::kInfer, 0);
  Prediction best;
  best.probability = -1.0;
  for (Eigen::Index c = 0; c < p.cols(); ++c)
    if (p(0, c) > best.probability) {
      best.class_id = static_cast<std::size_t>(c);
      best.probability = p(0, c);
    }
  return best;
}

MatrixXd to_batch(const std::vector<LabeledExample>& examples) {
  if (examples.empty()) return {};
  const std::size_t d = examples.front().embedding.dimension();
  MatrixXd x(static_cast<Eigen::Index>(examples.size()),
             static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < examples.size(); ++r) {
    const auto& v = examples[r].embedding.values;
    if (v.size() != d)
      throw ContractError("embeddings in a batch must share one dimension");
    for (std::size_t c = 0; c < d; ++c)
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[c];
  }
  return x;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0))
    throw ConfigError("dropout must be in [0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("Adam betas must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train_fraction must be in (0, 1)");
  if (hidden1 == 0 || hidden2 == 0)
    throw ConfigError("hidden sizes must be positive");
}

double mean_cross_entropy(const MapperModel& model,
                          const std::vector<LabeledExample>& batch) {
  const auto labels = labels_of(batch, model.dims.classes);
  return cross_entropy(
      run_forward(model, to_batch(batch), ForwardMode::kInfer, 0).log_probs,
      labels);
}

std::pair<double, std::vector<MatrixXd>> loss_and_gradient(
    const MapperModel& model, const std::vector<LabeledExample>& batch) {
  const auto labels = labels_of(batch, model.dims.classes);
  const Forward f = run_forward(model, to_batch(batch), ForwardMode::kInfer, 0);
  return {cross_entropy(f.log_probs, labels), backward(model, f, labels)};
}

TrainResult train_mapper(const std::vector<LabeledExample>& train,
                         const TrainConfig& config, MapperKind kind) {
  config.validate();
  if (train.empty()) throw ContractError("training set is empty");
  std::size_t max_label = 0;
  std::set<std::size_t> distinct;
  for (const auto& e : train) {
    max_label = std::max(max_label, e.label);
    distinct.insert(e.label);
  }
  if (distinct.size() < 2)
    throw ContractError("training set needs at least 2 distinct labels");

  MapperDims dims;
  dims.input = train.front().embedding.dimension();
  dims.hidden1 = config.hidden1;
  dims.hidden2 = config.hidden2;
  dims.classes = max_label + 1;
  TrainResult result{
      MapperModel::initialized(kind, dims, config.dropout, config.seed), {}};
  MapperModel& model = result.model;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (train[a].label != train[b].label) return train[a].label < train[b].label;
    return train[a].embedding.values < train[b].embedding.values;
  });

  std::vector<MatrixXd> m1, m2;
  for (const auto& t : model.tensors) {
    m1.push_back(MatrixXd::Zero(t.value.rows(), t.value.cols()));
    m2.push_back(MatrixXd::Zero(t.value.rows(), t.value.cols()));
  }
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<std::size_t> perm = order;
    Rng(mix64(config.seed) ^ (epoch + 1)).shuffle(perm.begin(), perm.end());
    double epoch_loss = 0.0;
    for (std::size_t start = 0, b = 0; start < perm.size();
         start += config.batch_size, ++b) {
      const std::size_t end = std::min(perm.size(), start + config.batch_size);
      std::vector<LabeledExample> batch;
      std::vector<std::size_t> labels;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train[perm[i]]);
        labels.push_back(train[perm[i]].label);
      }
      const std::uint64_t mask_seed =
          mix64(config.seed ^ mix64((epoch << 32) | b));
      const Forward f =
          run_forward(model, to_batch(batch), ForwardMode::kTrain, mask_seed);
      const double loss = cross_entropy(f.log_probs, labels);
      if (!std::isfinite(loss))
        throw TrainingError("non-finite loss at epoch " +
                            std::to_string(epoch + 1) + ", batch " +
                            std::to_string(b + 1));
      epoch_loss += loss * static_cast<double>(end - start);
      const auto grads = backward(model, f, labels);

      ++step;
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t t = 0; t < model.tensors.size(); ++t) {
        m1[t] = config.beta1 * m1[t] + (1.0 - config.beta1) * grads[t];
        m2[t] = config.beta2 * m2[t] +
                (1.0 - config.beta2) * grads[t].cwiseProduct(grads[t]);
        model.tensors[t].value.array() -=
            config.learning_rate * (m1[t].array() / bc1) /
            ((m2[t].array() / bc2).sqrt() + config.epsilon);
      }
    }
    result.epoch_losses.push_back(epoch_loss /
                                  static_cast<double>(train.size()));
  }
  round_to_float32(model);
  return result;
}

GradientCheck gradient_check(const MapperModel& model,
                             const std::vector<LabeledExample>& batch,
                             double tolerance) {
  constexpr double kStep = 1e-5;
  constexpr double kFloor = 1e-8;
  const auto [loss, grads] = loss_and_gradient(model, batch);
  (void)loss;
  GradientCheck out;
  MapperModel probe = model;
  probe.dropout = 0.0;
  for (std::size_t t = 0; t < probe.tensors.size(); ++t) {
    out.tensor_gradient_norms.push_back(grads[t].norm());
    auto& v = probe.tensors[t].value;
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (Eigen::Index c = 0; c < v.cols(); ++c) {
        const double saved = v(r, c);
        v(r, c) = saved + kStep;
        const double up = mean_cross_entropy(probe, batch);
        v(r, c) = saved - kStep;
        const double down = mean_cross_entropy(probe, batch);
        v(r, c) = saved;
        const double numeric = (up - down) / (2.0 * kStep);
        const double analytic = grads[t](r, c);
        const double denom =
            std::max({std::abs(analytic), std::abs(numeric), kFloor});
        out.max_relative_error = std::max(
            out.max_relative_error, std::abs(analytic - numeric) / denom);
      }
  }
  out.passed = out.max_relative_error <= tolerance;
  return out;
}

Split split_indices(const std::vector<std::size_t>& labels, double fraction,
                    std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw ConfigError("train fraction must be in (0, 1)");
  std::map<std::size_t, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
  Split split;
  for (auto& [label, members] : by_label) {
    if (members.size() < 2)
      throw ContractError("label " + std::to_string(label) +
                          " has a single example; cannot stratify");
    Rng(mix64(seed) ^ mix64(label)).shuffle(members.begin(), members.end());
    auto n_train = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(members.size()) + 1e-9));
    n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
    split.train.insert(split.train.end(), members.begin(),
                       members.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.test.insert(split.test.end(),
                      members.begin() + static_cast<std::ptrdiff_t>(n_train),
                      members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>>
split_dataset(const std::vector<LabeledExample>& examples, double fraction,
              std::uint64_t seed) {
  std::vector<std::size_t> labels;
  for (const auto& e : examples) labels.push_back(e.label);
  const Split s = split_indices(labels, fraction, seed);
  std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> out;
  for (auto i : s.train) out.first.push_back(examples[i]);
  for (auto i : s.test) out.second.push_back(examples[i]);
  return out;
}

}  // namespace agriqrs::mapper
