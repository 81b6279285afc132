// Acceptance suite: one criterion per section, one PASS/FAIL line each.
// Exit status is nonzero when any criterion fails. Criterion 7 is
// timing-sensitive and can be skipped on loaded machines by setting
// LNBNN_SKIP_PERF=1.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "lnbnn/ann.hpp"
#include "lnbnn/bench.hpp"
#include "lnbnn/classifiers.hpp"
#include "lnbnn/dataset.hpp"
#include "lnbnn/random.hpp"
#include "test_support.hpp"

using namespace lnbnn;

namespace {

struct Failure {
  std::string message;
};

void require(bool condition, const std::string& message) {
  if (!condition) throw Failure{message};
}

int g_failures = 0;

void criterion(int number, const std::string& title,
               const std::function<std::string()>& body) {
  const auto start = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  };
  try {
    const std::string detail = body();
    std::printf("criterion %d (%s): PASS [%.1fs]%s%s\n", number, title.c_str(),
                elapsed(), detail.empty() ? "" : " -- ", detail.c_str());
  } catch (const Failure& failure) {
    ++g_failures;
    std::printf("criterion %d (%s): FAIL [%.1fs] -- %s\n", number, title.c_str(),
                elapsed(), failure.message.c_str());
  } catch (const std::exception& e) {
    ++g_failures;
    std::printf("criterion %d (%s): FAIL [%.1fs] -- unexpected exception: %s\n",
                number, title.c_str(), elapsed(), e.what());
  }
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

// The standard overlapping benchmark used by criteria 5 and 6:
// 10 Gaussian classes in 8-d whose means sit 1.7 stddevs apart on the
// lattice, 15 training / 10 query images per class, 20 descriptors per
// image. Pilot accuracies at this setting: nbnn ~0.99, local(k=10)
// ~0.99, local(k=1) ~0.93, so the classes overlap without collapsing.
SyntheticData overlapping_benchmark(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.class_count = 10;
  spec.train_images_per_class = 15;
  spec.query_images_per_class = 10;
  spec.descriptors_per_image = 20;
  spec.dimension = 8;
  spec.class_mean_separation = 1.7;
  spec.within_class_stddev = 1.0;
  spec.rng_seed = seed;
  return generate_synthetic(spec);
}

double mean_accuracy(bench::Method method, std::size_t k, std::uint32_t checks) {
  double total = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto data = overlapping_benchmark(seed);
    bench::EvalParams params;
    params.k = k;
    params.checks = checks;
    params.threads = 2;
    total += bench::evaluate(method, data.train, data.queries, params)
                 .mean_per_class_accuracy;
  }
  return total / 5.0;
}

std::string strip_last_columns(const std::string& csv, int columns) {
  std::stringstream out;
  std::stringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    std::size_t cut = std::string::npos;
    for (int i = 0; i < columns; ++i) cut = line.rfind(',', cut - 1);
    out << line.substr(0, cut) << "\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------

std::string criterion_1_oracle_exactness() {
  Rng rng = make_rng(20260101);
  std::size_t datasets = 0;
  for (int round = 0; round < 50; ++round) {
    const std::size_t count = 100 + uniform_below(rng, 4901);  // up to 5000
    const std::size_t dim = 2 + uniform_below(rng, 63);        // 2..64
    DescriptorArray data;
    if (round % 10 == 9) {
      // coarse integer grid: loaded with exact distance ties
      data = testsupport::random_integer_points(count, dim, rng(), 3);
    } else {
      data = testsupport::random_points(count, dim, rng());
    }
    const KdForestIndex forest(data,
                               {4, static_cast<std::uint32_t>(count), rng()});
    std::vector<float> query(dim);
    std::vector<Neighbor> got;
    for (int q = 0; q < 100; ++q) {
      for (auto& v : query)
        v = static_cast<float>(uniform_double(rng) * 1.2 - 0.1);
      forest.knn(query, 10, got);
      const auto expect = brute_force_knn(data, query, 10);
      require(got.size() == expect.size(),
              fmt("dataset %d query %d: size %zu vs %zu", round, q, got.size(),
                  expect.size()));
      for (std::size_t i = 0; i < got.size(); ++i) {
        require(got[i].point_index == expect[i].point_index &&
                    got[i].squared_distance == expect[i].squared_distance,
                fmt("dataset %d query %d: rank %zu differs", round, q, i));
      }
    }
    ++datasets;
  }
  return fmt("%zu datasets x 100 queries, exact equality", datasets);
}

std::string criterion_2_equivalence() {
  std::size_t images = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    SyntheticSpec spec;
    spec.class_count = 5;
    spec.train_images_per_class = 6;
    spec.query_images_per_class = 14;
    spec.descriptors_per_image = 10;
    spec.dimension = 8;
    spec.class_mean_separation = 1.2;
    spec.within_class_stddev = 1.0;
    spec.rng_seed = seed;
    const auto data = generate_synthetic(spec);
    const auto nbnn = build_nbnn(data.train, {});
    const auto local = build_local_nbnn(data.train, data.train.size() - 1, {});
    for (const auto& query : data.queries) {
      const auto a = nbnn_classify(nbnn, query).class_id;
      const auto b = local_nbnn_classify(local, query).class_id;
      require(a == b, fmt("seed %llu image %u: nbnn=%u local=%u",
                          (unsigned long long)seed, query.image_id, a, b));
      ++images;
    }
  }
  require(images >= 200, fmt("only %zu query images", images));
  return fmt("argmin equal on %zu/%zu query images", images, images);
}

std::string criterion_3_hand_trace() {
  LabeledDescriptorSet train;
  train.class_count = 3;
  train.class_names = {"A", "B", "C"};
  train.descriptors = testsupport::descriptors_from({{0, 0}, {5, 0}, {20, 0}});
  train.labels = {0, 1, 2};
  train.image_ids = {0, 1, 2};
  const auto model = build_local_nbnn(train, 2, {});
  QueryImage query;
  query.descriptors = testsupport::descriptors_from({{1, 0}});
  const auto pred = local_nbnn_classify(model, query);
  require(pred.scores.totals[0] == -360.0,
          fmt("totals[A] = %.17g, want -360", pred.scores.totals[0]));
  require(pred.scores.totals[1] == -345.0,
          fmt("totals[B] = %.17g, want -345", pred.scores.totals[1]));
  require(pred.scores.totals[2] == 0.0,
          fmt("totals[C] = %.17g, want 0", pred.scores.totals[2]));
  require(pred.class_id == 0, fmt("predicted %u, want A", pred.class_id));
  return "totals (-360, -345, 0), prediction A";
}

std::string criterion_4_log_odds() {
  Rng rng = make_rng(40404);
  double worst = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    const std::size_t n = 2 + uniform_below(rng, 9);
    std::vector<double> distances(n);
    std::vector<long double> distances_ld(n);
    for (std::size_t c = 0; c < n; ++c) {
      distances[c] = uniform_double(rng) * 8.0;
      distances_ld[c] = distances[c];
    }
    std::vector<double> priors(n);
    std::vector<long double> priors_ld(n);
    double sum = 0.0;
    for (auto& p : priors) {
      p = 0.5 + uniform_double(rng);
      sum += p;
    }
    for (std::size_t c = 0; c < n; ++c) {
      priors[c] /= sum;
      priors_ld[c] = priors[c];
    }

    const auto got = log_odds_increments(distances, priors);
    const auto oracle = testsupport::logodds_oracle(distances_ld, priors_ld);
    const auto posterior = testsupport::logodds_posterior(distances_ld);
    for (std::size_t c = 0; c < n; ++c) {
      const double reference = static_cast<double>(oracle[c]);
      const double rel =
          std::abs(got[c] - reference) / std::max(std::abs(reference), 1e-3);
      worst = std::max(worst, rel);
      require(rel <= 1e-10,
              fmt("draw %d class %zu: increment %.17g vs oracle %.17g (rel %.3g)",
                  draw, c, got[c], reference, rel));
      if (posterior[c] > priors_ld[c])
        require(got[c] > 0.0, fmt("draw %d class %zu: posterior > prior but "
                                  "increment %.17g <= 0", draw, c, got[c]));
      if (posterior[c] < priors_ld[c])
        require(got[c] < 0.0, fmt("draw %d class %zu: posterior < prior but "
                                  "increment %.17g >= 0", draw, c, got[c]));
    }
  }
  return fmt("1000 draws, worst relative error %.2e (tolerance 1e-10)", worst);
}

std::string criterion_5_table1_analogue() {
  const double positive = mean_accuracy(bench::Method::positive, 10, 0);
  const double full = mean_accuracy(bench::Method::logodds, 10, 0);
  require(std::abs(positive - full) <= 0.02,
          fmt("positive-only %.4f vs full log-odds %.4f: gap %.4f > 0.02",
              positive, full, std::abs(positive - full)));
  return fmt("positive-only %.4f vs full log-odds %.4f (gap %.4f <= 0.02)",
             positive, full, std::abs(positive - full));
}

std::string criterion_6_k_shape() {
  const auto sample = overlapping_benchmark(1);
  const std::size_t k_full = sample.train.size() - 1;
  const double at_k1 = mean_accuracy(bench::Method::local, 1, 0);
  const double at_k3 = mean_accuracy(bench::Method::local, 3, 0);
  const double at_k10 = mean_accuracy(bench::Method::local, 10, 0);
  const double at_k50 = mean_accuracy(bench::Method::local, 50, 0);
  const double at_kfull = mean_accuracy(bench::Method::local, k_full, 0);
  // only the two endpoints are asserted; the rest of the curve is
  // reported for the record
  require(at_k10 >= at_k1, fmt("k=10 accuracy %.4f below k=1 accuracy %.4f",
                               at_k10, at_k1));
  require(at_k10 >= at_kfull - 0.01,
          fmt("k=10 accuracy %.4f more than 1pt below k=%zu accuracy %.4f",
              at_k10, k_full, at_kfull));
  return fmt("k=1: %.4f, k=3: %.4f, k=10: %.4f, k=50: %.4f, k=%zu: %.4f",
             at_k1, at_k3, at_k10, at_k50, k_full, at_kfull);
}

std::string criterion_7_scaling() {
  if (std::getenv("LNBNN_SKIP_PERF")) return "SKIPPED (LNBNN_SKIP_PERF set)";

  // Pilot on an idle 2-core machine measured nbnn growth ~19x, local
  // growth ~1.2x and a ~27x ratio at 64 classes, so the 4x / 2x / 5x
  // thresholds leave wide margins for load noise.
  SyntheticSpec spec;
  spec.train_images_per_class = 5;
  spec.query_images_per_class = 4;
  spec.descriptors_per_image = 20;
  spec.dimension = 16;
  spec.class_mean_separation = 3.0;
  spec.within_class_stddev = 1.0;
  spec.rng_seed = 99;
  bench::EvalParams params;
  params.checks = 32;
  params.k = 10;
  const std::uint32_t counts[] = {4, 8, 16, 32, 64};
  const auto rows = bench::scaling_experiment(counts, spec, params, 0.3);

  double nbnn_4 = 0, nbnn_64 = 0, local_4 = 0, local_64 = 0;
  for (const auto& row : rows) {
    if (row.method == bench::Method::nbnn) {
      if (row.class_count == 4) nbnn_4 = row.mean_query_seconds_per_image;
      if (row.class_count == 64) nbnn_64 = row.mean_query_seconds_per_image;
    } else {
      if (row.class_count == 4) local_4 = row.mean_query_seconds_per_image;
      if (row.class_count == 64) local_64 = row.mean_query_seconds_per_image;
    }
  }
  const double nbnn_growth = nbnn_64 / nbnn_4;
  const double local_growth = local_64 / local_4;
  const double ratio = nbnn_64 / local_64;
  require(nbnn_growth >= 4.0,
          fmt("nbnn query time grew only %.2fx from 4 to 64 classes", nbnn_growth));
  require(local_growth <= 2.0,
          fmt("local query time grew %.2fx from 4 to 64 classes", local_growth));
  require(ratio >= 5.0, fmt("nbnn/local ratio at 64 classes is %.2fx", ratio));

  // same budget, same data: the speed ratio must not come from an
  // accuracy gap
  SyntheticSpec with_classes = spec;
  with_classes.class_count = 64;
  const auto data = generate_synthetic(with_classes);
  const auto acc_nbnn =
      bench::evaluate(bench::Method::nbnn, data.train, data.queries, params)
          .mean_per_class_accuracy;
  const auto acc_local =
      bench::evaluate(bench::Method::local, data.train, data.queries, params)
          .mean_per_class_accuracy;
  require(std::abs(acc_nbnn - acc_local) <= 0.02,
          fmt("accuracy gap at 64 classes: nbnn %.4f vs local %.4f", acc_nbnn,
              acc_local));
  return fmt("nbnn growth %.1fx (>=4), local growth %.2fx (<=2), ratio %.1fx "
             "(>=5), accuracy %.3f/%.3f",
             nbnn_growth, local_growth, ratio, acc_nbnn, acc_local);
}

std::string criterion_8_recall_monotonicity() {
  // 50,000 descriptor-like points: 100-cluster Gaussian mixture in 32-d.
  // Pilot recalls at budgets 32..512: 0.26, 0.41, 0.62, 0.84, 1.00; the
  // curve must be non-decreasing and cross 0.8 by 256 checks. (Uniform
  // noise was rejected in the pilot: KD-trees only reach recall ~0.25 at
  // 256 checks there, which exercises nothing.)
  const auto data = testsupport::clustered_points(50000, 32, 100, 3, 30.0);
  const KdForestIndex index(data, {4, 32, 11});
  Rng rng = make_rng(555);
  std::vector<std::vector<float>> queries;
  for (int i = 0; i < 100; ++i) {
    std::vector<float> q(32);
    const auto base = data[uniform_below(rng, data.size())];
    for (std::size_t j = 0; j < q.size(); ++j)
      q[j] = base[j] + static_cast<float>(uniform_double(rng) - 0.5);
    queries.push_back(q);
  }

  std::string curve;
  double previous = -1.0;
  double at_256 = 0.0;
  std::vector<Neighbor> got;
  for (std::uint32_t checks : {32u, 64u, 128u, 256u, 512u}) {
    double recall = 0.0;
    for (const auto& q : queries) {
      index.knn_with_budget(q, 10, checks, got);
      recall += testsupport::recall_against(got, brute_force_knn(data, q, 10));
    }
    recall /= queries.size();
    curve += fmt("%u:%.3f ", checks, recall);
    require(recall >= previous,
            fmt("mean recall dropped from %.4f to %.4f at checks=%u", previous,
                recall, checks));
    previous = recall;
    if (checks == 256) at_256 = recall;
  }
  require(at_256 >= 0.8, fmt("recall@10 at 256 checks is %.4f < 0.8", at_256));
  return "recall@10 " + curve + "(non-decreasing, >=0.8 at 256)";
}

std::string criterion_9_csv_determinism() {
  const auto data = overlapping_benchmark(1);
  for (bench::Method method :
       {bench::Method::nbnn, bench::Method::local, bench::Method::positive}) {
    bench::EvalParams serial;
    serial.checks = 128;
    serial.threads = 1;
    bench::EvalParams parallel = serial;
    parallel.threads = 8;
    const auto a = bench::evaluate(method, data.train, data.queries, serial);
    const auto b = bench::evaluate(method, data.train, data.queries, parallel);
    require(bench::confusion_csv(a) == bench::confusion_csv(b),
            fmt("%s: confusion CSV differs across thread counts",
                std::string(bench::method_name(method)).c_str()));
    require(strip_last_columns(bench::report_csv(a), 3) ==
                strip_last_columns(bench::report_csv(b), 3),
            fmt("%s: report CSV differs beyond threads/timing columns",
                std::string(bench::method_name(method)).c_str()));
  }

  bench::EvalParams serial;
  serial.threads = 1;
  bench::EvalParams parallel = serial;
  parallel.threads = 8;
  const std::size_t ks[] = {1, 5, 10};
  require(bench::sweep_k_csv(data.train, data.queries, ks, serial) ==
              bench::sweep_k_csv(data.train, data.queries, ks, parallel),
          "sweep-k CSV differs across thread counts");
  const bench::Method methods[] = {bench::Method::nbnn, bench::Method::local};
  const std::uint32_t budgets[] = {64, 256};
  require(strip_last_columns(bench::sweep_checks_csv(data.train, data.queries,
                                                     methods, budgets, serial),
                             1) ==
              strip_last_columns(bench::sweep_checks_csv(
                                     data.train, data.queries, methods, budgets,
                                     parallel),
                                 1),
          "sweep-checks CSV differs beyond the timing column");
  return "evaluate/sweep CSVs byte-identical at 1 and 8 threads";
}

}  // namespace

int main() {
  criterion(1, "oracle exactness at full budget", criterion_1_oracle_exactness);
  criterion(2, "NBNN and local NBNN argmin equivalence", criterion_2_equivalence);
  criterion(3, "three-point hand trace", criterion_3_hand_trace);
  criterion(4, "log-odds increments vs high-precision oracle",
            criterion_4_log_odds);
  criterion(5, "positive-increment parity with full log-odds",
            criterion_5_table1_analogue);
  criterion(6, "neighborhood size shape", criterion_6_k_shape);
  criterion(7, "class-count scaling", criterion_7_scaling);
  criterion(8, "recall monotonicity in the check budget",
            criterion_8_recall_monotonicity);
  criterion(9, "CSV determinism across thread counts",
            criterion_9_csv_determinism);

  if (g_failures) {
    std::printf("%d criterion(s) FAILED\n", g_failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
