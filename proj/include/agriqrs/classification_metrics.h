#pragma once

#include <cstddef>
#include <vector>

#include "agriqrs/mapper.h"

namespace agriqrs::mapper {

struct ClassCounts {
  std::size_t label = 0;
  std::size_t support = 0;  // true occurrences
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t false_negative = 0;
};

struct Confusion {
  std::size_t truth = 0;
  std::size_t predicted = 0;
  std::size_t count = 0;
};

struct EvalReport {
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  // Mean average precision with a single relevant cluster per query: the
  // average precision of a query is 1 when the top prediction is right.
  double map = 0.0;
  std::vector<ClassCounts> per_class;  // ascending label
  std::vector<Confusion> confusions;   // off-diagonal, most frequent first
};

// Weights are true-label supports. A class with no predictions has precision
// 0; every weighted term is computed as support * numerator / denominator from
// integer counts, so weighted recall reproduces accuracy exactly.
EvalReport evaluate_predictions(const std::vector<std::size_t>& truth,
                                const std::vector<std::size_t>& predicted);

EvalReport evaluate_mapper(const MapperModel& model,
                           const std::vector<LabeledExample>& test);

}  // namespace agriqrs::mapper
