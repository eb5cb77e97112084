#include "agriqrs/classification_metrics.h"

#include <algorithm>
#include <map>

#include "agriqrs/errors.h"

namespace agriqrs::mapper {
namespace {

double weighted_term(std::size_t support, std::size_t num, std::size_t den) {
  if (den == 0) return 0.0;
  return static_cast<double>(support * num) / static_cast<double>(den);
}

}  // namespace

EvalReport evaluate_predictions(const std::vector<std::size_t>& truth,
                                const std::vector<std::size_t>& predicted) {
  if (truth.size() != predicted.size())
    throw ContractError("truth and prediction lengths differ");
  if (truth.empty()) throw MetricError("no examples to evaluate");

  std::map<std::size_t, ClassCounts> classes;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> off;
  EvalReport r;
  r.total = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& t = classes[truth[i]];
    t.label = truth[i];
    ++t.support;
    if (truth[i] == predicted[i]) {
      ++t.true_positive;
      ++r.correct;
    } else {
      ++t.false_negative;
      auto& p = classes[predicted[i]];
      p.label = predicted[i];
      ++p.false_positive;
      ++off[{truth[i], predicted[i]}];
    }
  }

  double wp = 0.0, wr = 0.0, wf = 0.0;
  for (const auto& [label, c] : classes) {
    r.per_class.push_back(c);
    wp += weighted_term(c.support, c.true_positive,
                        c.true_positive + c.false_positive);
    wr += weighted_term(c.support, c.true_positive, c.support);
    wf += weighted_term(c.support, 2 * c.true_positive,
                        2 * c.true_positive + c.false_positive +
                            c.false_negative);
  }
  const auto n = static_cast<double>(r.total);
  r.accuracy = static_cast<double>(r.correct) / n;
  r.weighted_precision = wp / n;
  r.weighted_recall = wr / n;
  r.weighted_f1 = wf / n;
  r.map = r.accuracy;

  for (const auto& [key, count] : off)
    r.confusions.push_back({key.first, key.second, count});
  std::stable_sort(r.confusions.begin(), r.confusions.end(),
                   [](const Confusion& a, const Confusion& b) {
                     return a.count > b.count;
                   });
  return r;
}

EvalReport evaluate_mapper(const MapperModel& model,
                           const std::vector<LabeledExample>& test) {
  std::vector<std::size_t> truth, predicted;
  for (const auto& e : test) {
    truth.push_back(e.label);
    predicted.push_back(predict_cluster(model, e.embedding).class_id);
  }
  return evaluate_predictions(truth, predicted);
}

}  // namespace agriqrs::mapper
