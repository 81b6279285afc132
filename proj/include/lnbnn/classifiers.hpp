#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "lnbnn/ann.hpp"
#include "lnbnn/core.hpp"

namespace lnbnn {

/// Engine selection for model building: exact brute-force scan or the
/// KD-tree forest with a leaf-check budget.
struct EngineConfig {
  bool exact = true;
  ForestConfig forest{};
};

/// Accumulated per-class totals. Classes never touched stay at 0.
struct ClassScores {
  std::vector<double> totals;
};

struct Prediction {
  std::uint32_t class_id = 0;
  ClassScores scores;
};

/// One nearest-neighbor index per class.
struct NbnnModel {
  std::vector<std::unique_ptr<NnIndex>> per_class;
  std::uint32_t class_count = 0;
  std::size_t dimension = 0;
};

/// One merged index over every training descriptor, a parallel class
/// lookup, and the neighborhood size k.
struct LocalNbnnModel {
  std::unique_ptr<NnIndex> merged;
  std::vector<std::uint32_t> labels;
  std::uint32_t class_count = 0;
  std::size_t k = 10;
};

/// Builds per-class indices. Forest seeds are derived per class from
/// config.forest.rng_seed.
NbnnModel build_nbnn(const LabeledDescriptorSet& train,
                     const EngineConfig& engine);

/// Builds the merged index. Throws when k + 1 exceeds the training point
/// count.
LocalNbnnModel build_local_nbnn(const LabeledDescriptorSet& train,
                                std::size_t k, const EngineConfig& engine);

/// totals[C] = sum over query descriptors of the squared distance to the
/// nearest training descriptor of class C; predicts the argmin.
Prediction nbnn_classify(const NbnnModel& model, const QueryImage& query);

/// Per descriptor, fetches the k+1 nearest neighbors from the merged
/// index. The k+1-st distance is the background estimate dist_B; every
/// class present among the first k gets its closest-member distance
/// minus dist_B added to its total. Classes outside the neighborhood are
/// untouched. Predicts the argmin over all classes.
Prediction local_nbnn_classify(const LocalNbnnModel& model,
                               const QueryImage& query);

/// Per-class posterior log-odds increments for one descriptor.
///
/// The posterior is the softmax of -distance/bandwidth over classes; the
/// increment for class C is log[ P(C|d)/(1-P(C|d)) * (1-P(C))/P(C) ],
/// positive exactly when the posterior exceeds the prior. Evaluated in
/// log-space throughout, so large distances underflow to finite
/// increments rather than NaN.
std::vector<double> log_odds_increments(std::span<const double> distances,
                                        std::span<const double> priors,
                                        double bandwidth = 1.0);

struct LogOddsPrediction {
  std::uint32_t class_id = 0;
  ClassScores scores;
  /// Increments actually added across all descriptors.
  std::uint64_t increments_applied = 0;
  double avg_increments_per_descriptor = 0.0;
};

/// Log-odds NBNN with uniform priors. positive_only keeps only the
/// increments > 0 (the selective variant); otherwise every increment is
/// applied. Predicts the argmax of accumulated evidence.
LogOddsPrediction log_odds_classify(const NbnnModel& model,
                                    const QueryImage& query,
                                    bool positive_only,
                                    double bandwidth = 1.0);

inline LogOddsPrediction positive_increment_classify(const NbnnModel& model,
                                                     const QueryImage& query) {
  return log_odds_classify(model, query, /*positive_only=*/true);
}

}  // namespace lnbnn
