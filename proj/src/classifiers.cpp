#include "lnbnn/classifiers.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "lnbnn/random.hpp"

namespace lnbnn {

namespace {

std::unique_ptr<NnIndex> make_index(DescriptorArray data,
                                    const EngineConfig& engine,
                                    std::uint64_t seed_stream) {
  if (engine.exact) return std::make_unique<BruteForceIndex>(std::move(data));
  ForestConfig cfg = engine.forest;
  cfg.rng_seed = derive_seed(engine.forest.rng_seed, seed_stream);
  return std::make_unique<KdForestIndex>(std::move(data), cfg);
}

void check_query_image(const QueryImage& query, std::size_t dimension) {
  if (query.descriptors.empty())
    throw std::invalid_argument("classify: query image has no descriptors");
  if (query.descriptors.dimension() != dimension)
    throw std::invalid_argument("classify: query dimension " +
                                std::to_string(query.descriptors.dimension()) +
                                " does not match model dimension " +
                                std::to_string(dimension));
}

// inc[c] = log posterior odds of c minus its prior log-odds.
std::vector<double> increments_from_logits(std::span<const double> distances,
                                           std::span<const double> prior_logits,
                                           double bandwidth) {
  const std::size_t n = distances.size();
  std::vector<double> z(n);
  for (std::size_t c = 0; c < n; ++c) z[c] = -distances[c] / bandwidth;

  std::vector<double> inc(n);
  for (std::size_t c = 0; c < n; ++c) {
    // log sum of exp(z_j) over the complement classes, computed against
    // the complement's own max so a dominant class c cannot cancel the
    // remainder away.
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != c && z[j] > m) m = z[j];
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != c) sum += std::exp(z[j] - m);
    }
    // (z - m) before the log term: when class c ties the complement's
    // best, the posterior part reduces to -log(sum) with no rounding
    // from re-adding m, so uniform-prior ties cancel to exactly zero.
    inc[c] = (z[c] - m) - std::log(sum) - prior_logits[c];
  }
  return inc;
}

}  // namespace

NbnnModel build_nbnn(const LabeledDescriptorSet& train,
                     const EngineConfig& engine) {
  train.validate();
  NbnnModel model;
  model.class_count = train.class_count;
  model.dimension = train.dimension();

  std::vector<DescriptorArray> slices(train.class_count,
                                      DescriptorArray(train.dimension()));
  for (std::size_t i = 0; i < train.size(); ++i)
    slices[train.labels[i]].push_back(train.descriptors[i]);
  model.per_class.reserve(train.class_count);
  for (std::uint32_t c = 0; c < train.class_count; ++c)
    model.per_class.push_back(make_index(std::move(slices[c]), engine, c));
  return model;
}

LocalNbnnModel build_local_nbnn(const LabeledDescriptorSet& train,
                                std::size_t k, const EngineConfig& engine) {
  train.validate();
  if (k == 0) throw std::invalid_argument("build_local_nbnn: k must be >= 1");
  if (k + 1 > train.size())
    throw std::invalid_argument(
        "build_local_nbnn: k+1 = " + std::to_string(k + 1) + " exceeds the " +
        std::to_string(train.size()) +
        " training descriptors; use a smaller k");
  LocalNbnnModel model;
  model.class_count = train.class_count;
  model.k = k;
  model.labels = train.labels;
  DescriptorArray merged(train.dimension(), train.descriptors.data());
  model.merged = make_index(std::move(merged), engine, 0);
  return model;
}

Prediction nbnn_classify(const NbnnModel& model, const QueryImage& query) {
  check_query_image(query, model.dimension);
  Prediction pred;
  pred.scores.totals.assign(model.class_count, 0.0);
  std::vector<Neighbor> nn;
  for (std::size_t i = 0; i < query.descriptors.size(); ++i) {
    const auto descriptor = query.descriptors[i];
    for (std::uint32_t c = 0; c < model.class_count; ++c) {
      model.per_class[c]->knn(descriptor, 1, nn);
      pred.scores.totals[c] += nn.front().squared_distance;
    }
  }
  pred.class_id = argmin_class(pred.scores.totals);
  return pred;
}

Prediction local_nbnn_classify(const LocalNbnnModel& model,
                               const QueryImage& query) {
  check_query_image(query, model.merged->dimension());
  if (model.k + 1 > model.merged->size())
    throw std::invalid_argument(
        "local_nbnn_classify: k+1 exceeds the merged index size; use a smaller k");

  Prediction pred;
  pred.scores.totals.assign(model.class_count, 0.0);
  std::vector<Neighbor> neighbors;
  std::vector<std::uint32_t> seen_stamp(model.class_count, 0);
  std::uint32_t epoch = 0;

  for (std::size_t i = 0; i < query.descriptors.size(); ++i) {
    model.merged->knn(query.descriptors[i], model.k + 1, neighbors);
    // An approximate engine under a starved budget can return fewer than
    // k+1 points; the last retrieved neighbor then serves as background.
    const std::size_t m = neighbors.size();
    if (m < 2) continue;
    const double background = neighbors[m - 1].squared_distance;
    ++epoch;
    for (std::size_t j = 0; j + 1 < m; ++j) {
      const std::uint32_t cls = model.labels[neighbors[j].point_index];
      if (seen_stamp[cls] == epoch) continue;  // closer member already counted
      seen_stamp[cls] = epoch;
      pred.scores.totals[cls] += neighbors[j].squared_distance - background;
    }
  }
  pred.class_id = argmin_class(pred.scores.totals);
  return pred;
}

std::vector<double> log_odds_increments(std::span<const double> distances,
                                        std::span<const double> priors,
                                        double bandwidth) {
  const std::size_t n = distances.size();
  if (n < 2)
    throw std::invalid_argument("log_odds_increments: need at least 2 classes");
  if (priors.size() != n)
    throw std::invalid_argument("log_odds_increments: one prior per class required");
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
    throw std::invalid_argument("log_odds_increments: bandwidth must be positive");
  double prior_sum = 0.0;
  for (double p : priors) {
    if (!std::isfinite(p) || p <= 0.0)
      throw std::invalid_argument("log_odds_increments: priors must be positive");
    prior_sum += p;
  }
  if (std::abs(prior_sum - 1.0) > 1e-9)
    throw std::invalid_argument("log_odds_increments: priors must sum to 1");
  for (double d : distances) {
    if (!std::isfinite(d))
      throw std::invalid_argument("log_odds_increments: distances must be finite");
  }

  std::vector<double> logits(n);
  for (std::size_t c = 0; c < n; ++c)
    logits[c] = std::log(priors[c]) - std::log(1.0 - priors[c]);
  return increments_from_logits(distances, logits, bandwidth);
}

LogOddsPrediction log_odds_classify(const NbnnModel& model,
                                    const QueryImage& query, bool positive_only,
                                    double bandwidth) {
  check_query_image(query, model.dimension);
  LogOddsPrediction pred;
  pred.scores.totals.assign(model.class_count, 0.0);
  if (model.class_count == 1) return pred;  // single class wins trivially

  // Uniform prior: log-odds of every class is -log(N-1). Written this
  // way (instead of log(p) - log(1-p)) so equidistant descriptors cancel
  // to an increment of exactly zero.
  const std::vector<double> prior_logits(
      model.class_count, -std::log(static_cast<double>(model.class_count - 1)));

  std::vector<double> distances(model.class_count);
  std::vector<Neighbor> nn;
  const std::size_t n = query.descriptors.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto descriptor = query.descriptors[i];
    for (std::uint32_t c = 0; c < model.class_count; ++c) {
      model.per_class[c]->knn(descriptor, 1, nn);
      distances[c] = nn.front().squared_distance;
    }
    const std::vector<double> inc =
        increments_from_logits(distances, prior_logits, bandwidth);
    for (std::uint32_t c = 0; c < model.class_count; ++c) {
      if (positive_only && !(inc[c] > 0.0)) continue;
      pred.scores.totals[c] += inc[c];
      ++pred.increments_applied;
    }
  }
  pred.avg_increments_per_descriptor =
      static_cast<double>(pred.increments_applied) / static_cast<double>(n);
  pred.class_id = argmax_class(pred.scores.totals);
  return pred;
}

}  // namespace lnbnn
