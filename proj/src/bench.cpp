#include "lnbnn/bench.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace lnbnn::bench {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// Runs f(0..count) across a worker pool. Each slot is independent, so
// results do not depend on scheduling; the first worker exception is
// rethrown after join.
template <typename F>
void parallel_for(std::size_t count, unsigned threads, F&& f) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= count) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned n = std::min<std::size_t>(threads, count);
  pool.reserve(n);
  for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct Models {
  std::unique_ptr<NbnnModel> nbnn;
  std::unique_ptr<LocalNbnnModel> local;
};

EngineConfig engine_from_params(const EvalParams& params) {
  EngineConfig engine;
  engine.exact = params.checks == 0;
  engine.forest.num_trees = params.trees;
  engine.forest.leaf_checks = params.checks == 0 ? 1 : params.checks;
  engine.forest.rng_seed = params.seed;
  return engine;
}

Models build_models(Method method, const LabeledDescriptorSet& train,
                    const EvalParams& params) {
  const EngineConfig engine = engine_from_params(params);
  Models models;
  if (method == Method::local) {
    models.local = std::make_unique<LocalNbnnModel>(
        build_local_nbnn(train, params.k, engine));
  } else {
    models.nbnn = std::make_unique<NbnnModel>(build_nbnn(train, engine));
  }
  return models;
}

struct ImageResult {
  std::uint32_t predicted = 0;
  std::uint64_t increments = 0;
  std::uint64_t descriptor_count = 0;
};

ImageResult classify_one(Method method, const Models& models,
                         const QueryImage& query) {
  ImageResult result;
  result.descriptor_count = query.descriptors.size();
  switch (method) {
    case Method::nbnn:
      result.predicted = nbnn_classify(*models.nbnn, query).class_id;
      break;
    case Method::local:
      result.predicted = local_nbnn_classify(*models.local, query).class_id;
      break;
    case Method::positive: {
      const auto pred = positive_increment_classify(*models.nbnn, query);
      result.predicted = pred.class_id;
      result.increments = pred.increments_applied;
      break;
    }
    case Method::logodds: {
      const auto pred = log_odds_classify(*models.nbnn, query, false);
      result.predicted = pred.class_id;
      result.increments = pred.increments_applied;
      break;
    }
  }
  return result;
}

}  // namespace

std::string_view method_name(Method m) {
  switch (m) {
    case Method::nbnn:
      return "nbnn";
    case Method::local:
      return "local";
    case Method::positive:
      return "positive";
    case Method::logodds:
      return "logodds";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "nbnn") return Method::nbnn;
  if (name == "local") return Method::local;
  if (name == "positive") return Method::positive;
  if (name == "logodds") return Method::logodds;
  throw std::invalid_argument("unknown method '" + std::string(name) +
                              "' (expected nbnn, local, positive or logodds)");
}

void finalize_accuracy(ClassificationReport& report) {
  const std::uint32_t n = report.class_count;
  report.per_class_accuracy.assign(n, 0.0);
  double sum = 0.0;
  std::uint32_t scored = 0;
  for (std::uint32_t c = 0; c < n; ++c) {
    std::uint64_t row_total = 0;
    for (std::uint32_t p = 0; p < n; ++p) row_total += report.at(c, p);
    if (row_total == 0) continue;
    report.per_class_accuracy[c] =
        static_cast<double>(report.at(c, c)) / static_cast<double>(row_total);
    sum += report.per_class_accuracy[c];
    ++scored;
  }
  report.mean_per_class_accuracy = scored ? sum / scored : 0.0;
}

ClassificationReport evaluate(Method method, const LabeledDescriptorSet& train,
                              std::span<const QueryImage> queries,
                              const EvalParams& params) {
  if (queries.empty()) throw std::invalid_argument("evaluate: no query images");
  for (const QueryImage& q : queries) {
    if (!q.true_label)
      throw std::invalid_argument("evaluate: query image " +
                                  std::to_string(q.image_id) +
                                  " lacks a true label");
    if (*q.true_label >= train.class_count)
      throw std::invalid_argument("evaluate: query image " +
                                  std::to_string(q.image_id) +
                                  " has label outside the training classes");
  }

  ClassificationReport report;
  report.method = method;
  report.params = params;
  report.class_count = train.class_count;
  report.query_image_count = queries.size();

  const auto build_start = Clock::now();
  const Models models = build_models(method, train, params);
  report.build_seconds = seconds_since(build_start);

  std::vector<ImageResult> results(queries.size());
  const auto query_start = Clock::now();
  parallel_for(queries.size(), params.threads, [&](std::size_t i) {
    results[i] = classify_one(method, models, queries[i]);
  });
  report.query_seconds = seconds_since(query_start);

  report.confusion.assign(std::size_t{report.class_count} * report.class_count, 0);
  std::uint64_t total_increments = 0;
  std::uint64_t total_descriptors = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const std::uint32_t truth = *queries[i].true_label;
    ++report.confusion[std::size_t{truth} * report.class_count +
                       results[i].predicted];
    total_increments += results[i].increments;
    total_descriptors += results[i].descriptor_count;
  }
  if ((method == Method::positive || method == Method::logodds) &&
      total_descriptors > 0) {
    report.avg_increments_per_descriptor =
        static_cast<double>(total_increments) /
        static_cast<double>(total_descriptors);
  }
  finalize_accuracy(report);
  return report;
}

std::string sweep_k_csv(const LabeledDescriptorSet& train,
                        std::span<const QueryImage> queries,
                        std::span<const std::size_t> ks,
                        const EvalParams& params) {
  std::string csv = "k,accuracy\n";
  for (std::size_t k : ks) {
    EvalParams p = params;
    p.k = k;
    const auto report = evaluate(Method::local, train, queries, p);
    csv += std::to_string(k) + "," + format_double(report.mean_per_class_accuracy) +
           "\n";
  }
  return csv;
}

std::string sweep_checks_csv(const LabeledDescriptorSet& train,
                             std::span<const QueryImage> queries,
                             std::span<const Method> methods,
                             std::span<const std::uint32_t> checks_values,
                             const EvalParams& params) {
  std::string csv = "method,checks,accuracy,query_seconds\n";
  for (Method method : methods) {
    for (std::uint32_t checks : checks_values) {
      EvalParams p = params;
      p.checks = checks;
      const auto report = evaluate(method, train, queries, p);
      csv += std::string(method_name(method)) + "," + std::to_string(checks) +
             "," + format_double(report.mean_per_class_accuracy) + "," +
             format_double(report.query_seconds) + "\n";
    }
  }
  return csv;
}

std::vector<ScalingRow> scaling_experiment(
    std::span<const std::uint32_t> class_counts, const SyntheticSpec& per_class,
    const EvalParams& params, double min_measure_seconds) {
  if (class_counts.empty())
    throw std::invalid_argument("scaling_experiment: no class counts");
  for (std::size_t i = 1; i < class_counts.size(); ++i) {
    if (class_counts[i] <= class_counts[i - 1])
      throw std::invalid_argument(
          "scaling_experiment: class counts must be strictly increasing");
  }
  if (params.checks == 0)
    throw std::invalid_argument(
        "scaling_experiment: a leaf-check budget (checks >= 1) is required");

  // One corpus at the largest class count; smaller counts use the prefix
  // of its classes, so per-class data is identical along the curve. The
  // timed query set is fixed: the query images of the classes present at
  // every count.
  SyntheticSpec spec = per_class;
  spec.class_count = class_counts.back();
  const SyntheticData data = generate_synthetic(spec);

  std::vector<QueryImage> fixed_queries;
  for (const QueryImage& q : data.queries) {
    if (*q.true_label < class_counts.front()) fixed_queries.push_back(q);
  }

  std::vector<ScalingRow> rows;
  for (std::uint32_t count : class_counts) {
    LabeledDescriptorSet subset;
    subset.class_count = count;
    subset.class_names.assign(data.train.class_names.begin(),
                              data.train.class_names.begin() + count);
    subset.descriptors = DescriptorArray(data.train.dimension());
    for (std::size_t i = 0; i < data.train.size(); ++i) {
      if (data.train.labels[i] >= count) continue;
      subset.descriptors.push_back(data.train.descriptors[i]);
      subset.labels.push_back(data.train.labels[i]);
      subset.image_ids.push_back(data.train.image_ids[i]);
    }

    for (Method method : {Method::nbnn, Method::local}) {
      const auto build_start = Clock::now();
      const Models models = build_models(method, subset, params);
      const double build_seconds = seconds_since(build_start);

      // Repeat the query phase until the measurement is long enough to
      // trust, then report the per-image mean.
      std::size_t repeats = 0;
      const auto query_start = Clock::now();
      double elapsed = 0.0;
      do {
        for (const QueryImage& q : fixed_queries) classify_one(method, models, q);
        ++repeats;
        elapsed = seconds_since(query_start);
      } while (elapsed < min_measure_seconds);

      rows.push_back({count, method, build_seconds,
                      elapsed / (static_cast<double>(repeats) *
                                 static_cast<double>(fixed_queries.size()))});
    }
  }
  return rows;
}

std::string scaling_csv(std::span<const ScalingRow> rows) {
  std::string csv = "class_count,method,build_seconds,mean_query_seconds_per_image\n";
  for (const ScalingRow& row : rows) {
    csv += std::to_string(row.class_count) + "," +
           std::string(method_name(row.method)) + "," +
           format_double(row.build_seconds) + "," +
           format_double(row.mean_query_seconds_per_image) + "\n";
  }
  return csv;
}

std::string report_csv(const ClassificationReport& report) {
  // run-environment columns (threads) and timings sit at the end so
  // consumers can strip them when comparing runs
  std::string csv =
      "method,k,alpha,trees,checks,seed,classes,query_images,"
      "mean_per_class_accuracy,avg_increments_per_descriptor,"
      "threads,build_seconds,query_seconds\n";
  csv += std::string(method_name(report.method)) + "," +
         std::to_string(report.params.k) + "," +
         format_double(report.params.alpha) + "," +
         std::to_string(report.params.trees) + "," +
         std::to_string(report.params.checks) + "," +
         std::to_string(report.params.seed) + "," +
         std::to_string(report.class_count) + "," +
         std::to_string(report.query_image_count) + "," +
         format_double(report.mean_per_class_accuracy) + "," +
         format_double(report.avg_increments_per_descriptor) + "," +
         std::to_string(report.params.threads) + "," +
         format_double(report.build_seconds) + "," +
         format_double(report.query_seconds) + "\n";
  return csv;
}

std::string confusion_csv(const ClassificationReport& report) {
  std::string csv = "true_class";
  for (std::uint32_t p = 0; p < report.class_count; ++p)
    csv += ",predicted_" + std::to_string(p);
  csv += "\n";
  for (std::uint32_t c = 0; c < report.class_count; ++c) {
    csv += std::to_string(c);
    for (std::uint32_t p = 0; p < report.class_count; ++p)
      csv += "," + std::to_string(report.at(c, p));
    csv += "\n";
  }
  return csv;
}

}  // namespace lnbnn::bench
