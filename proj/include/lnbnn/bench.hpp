#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lnbnn/classifiers.hpp"
#include "lnbnn/core.hpp"
#include "lnbnn/dataset.hpp"

namespace lnbnn::bench {

enum class Method { nbnn, local, positive, logodds };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);  // throws on unknown names

struct EvalParams {
  std::size_t k = 10;
  /// Location weight, echoed into reports. Augmentation itself happens
  /// when descriptor files are loaded.
  double alpha = 1.6;
  std::uint32_t trees = 4;
  /// Leaf-check budget. 0 selects the exact brute-force engine. For
  /// nbnn/positive/logodds the budget applies to each per-class index,
  /// for local to the single merged index.
  std::uint32_t checks = 0;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct ClassificationReport {
  Method method = Method::nbnn;
  EvalParams params;
  std::uint32_t class_count = 0;
  std::uint64_t query_image_count = 0;
  /// Row-major class_count x class_count counts, row = true class.
  std::vector<std::uint64_t> confusion;
  std::vector<double> per_class_accuracy;
  double mean_per_class_accuracy = 0.0;
  /// Only meaningful for positive/logodds runs.
  double avg_increments_per_descriptor = 0.0;
  double build_seconds = 0.0;
  double query_seconds = 0.0;

  std::uint64_t at(std::uint32_t true_class, std::uint32_t predicted) const {
    return confusion[std::size_t{true_class} * class_count + predicted];
  }
};

/// Classifies every query image and assembles the report. Query images
/// may be processed by `params.threads` workers; all non-timing fields
/// are identical for any thread count.
ClassificationReport evaluate(Method method, const LabeledDescriptorSet& train,
                              std::span<const QueryImage> queries,
                              const EvalParams& params);

/// Fills per_class_accuracy and the mean from a confusion matrix.
/// Exposed separately so the definition is testable on hand-made
/// matrices.
void finalize_accuracy(ClassificationReport& report);

/// One local-NBNN evaluation per k over the identical split.
/// CSV columns: k,accuracy
std::string sweep_k_csv(const LabeledDescriptorSet& train,
                        std::span<const QueryImage> queries,
                        std::span<const std::size_t> ks,
                        const EvalParams& params);

/// Accuracy and query time per (method, leaf-check budget).
/// CSV columns: method,checks,accuracy,query_seconds
std::string sweep_checks_csv(const LabeledDescriptorSet& train,
                             std::span<const QueryImage> queries,
                             std::span<const Method> methods,
                             std::span<const std::uint32_t> checks_values,
                             const EvalParams& params);

struct ScalingRow {
  std::uint32_t class_count = 0;
  Method method = Method::nbnn;
  double build_seconds = 0.0;
  double mean_query_seconds_per_image = 0.0;
};

/// Grows the class count while holding per-class data and the budget
/// fixed, timing the query phase of both classifiers over one fixed
/// query set. Data for class c is identical at every class count that
/// includes c (classes are subsets of one generated corpus).
std::vector<ScalingRow> scaling_experiment(
    std::span<const std::uint32_t> class_counts, const SyntheticSpec& per_class,
    const EvalParams& params, double min_measure_seconds = 0.2);

/// CSV columns: class_count,method,build_seconds,mean_query_seconds_per_image
std::string scaling_csv(std::span<const ScalingRow> rows);

/// Single-row wide CSV of the report. The two timing columns come last
/// so consumers can strip them when comparing runs.
std::string report_csv(const ClassificationReport& report);

/// The confusion matrix as CSV: header "true_class,<predicted ids...>",
/// one row per true class.
std::string confusion_csv(const ClassificationReport& report);

}  // namespace lnbnn::bench
