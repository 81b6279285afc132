// Command-line driver for NBNN / Local NBNN experiments. Every
// subcommand is deterministic given --seed (timing columns aside) and
// exits nonzero with a message on any error.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "lnbnn/bench.hpp"
#include "lnbnn/dataset.hpp"
#include "lnbnn/distance_kernels.hpp"

namespace {

using namespace lnbnn;

void write_or_print(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream os(path);
  if (!os) throw std::runtime_error(path + ": cannot open file for writing");
  os << content;
  if (!os) throw std::runtime_error(path + ": write failed");
}

void apply_kernel_choice(const std::string& name) {
  if (name == "auto") {
    kernels::select_best();
    return;
  }
  kernels::Kind kind;
  if (name == "scalar") {
    kind = kernels::Kind::scalar;
  } else if (name == "avx2") {
    kind = kernels::Kind::avx2;
  } else if (name == "neon") {
    kind = kernels::Kind::neon;
  } else {
    throw CLI::ValidationError("--kernel", "expected auto, scalar, avx2 or neon");
  }
  if (!kernels::select(kind))
    throw CLI::ValidationError("--kernel",
                               name + " is not available on this machine");
}

struct DataArgs {
  std::string train_path;
  std::string query_path;
  double alpha = 1.6;

  void attach(CLI::App& cmd) {
    cmd.add_option("--train", train_path, "training descriptor file (.ldsc)")
        ->required();
    cmd.add_option("--queries", query_path, "query descriptor file (.ldsc)")
        ->required();
    cmd.add_option("--alpha", alpha,
                   "location weight applied when files carry locations")
        ->capture_default_str();
  }

  LabeledDescriptorSet load_train() const {
    return load_descriptor_file(train_path, alpha);
  }
  std::vector<QueryImage> load_queries() const {
    return to_query_images(load_descriptor_file(query_path, alpha));
  }
};

void attach_engine(CLI::App& cmd, bench::EvalParams& params) {
  cmd.add_option("--k", params.k, "local neighborhood size")
      ->capture_default_str();
  cmd.add_option("--trees", params.trees, "randomized KD-trees per index")
      ->capture_default_str();
  cmd.add_option("--checks", params.checks,
                 "leaf-check budget per search; 0 = exact brute force")
      ->capture_default_str();
  cmd.add_option("--seed", params.seed, "seed for all randomness")
      ->capture_default_str();
  cmd.add_option("--threads", params.threads, "query worker threads")
      ->capture_default_str();
}

void attach_synthetic(CLI::App& cmd, SyntheticSpec& spec, bool with_classes) {
  if (with_classes) {
    cmd.add_option("--classes", spec.class_count, "number of classes")
        ->capture_default_str();
  }
  cmd.add_option("--train-images", spec.train_images_per_class,
                 "training images per class")
      ->capture_default_str();
  cmd.add_option("--query-images", spec.query_images_per_class,
                 "query images per class")
      ->capture_default_str();
  cmd.add_option("--descriptors", spec.descriptors_per_image,
                 "descriptors per image")
      ->capture_default_str();
  cmd.add_option("--dim", spec.dimension, "descriptor dimension")
      ->capture_default_str();
  cmd.add_option("--separation", spec.class_mean_separation,
                 "distance between class-mean lattice cells")
      ->capture_default_str();
  cmd.add_option("--stddev", spec.within_class_stddev,
                 "within-class standard deviation")
      ->capture_default_str();
}

void print_report(const bench::ClassificationReport& report) {
  std::cout << "method=" << bench::method_name(report.method)
            << " classes=" << report.class_count
            << " query_images=" << report.query_image_count << "\n"
            << "mean_per_class_accuracy=" << report.mean_per_class_accuracy
            << "\n";
  if (report.method == bench::Method::positive ||
      report.method == bench::Method::logodds) {
    std::cout << "avg_increments_per_descriptor="
              << report.avg_increments_per_descriptor << "\n";
  }
  std::cout << "build_seconds=" << report.build_seconds
            << " query_seconds=" << report.query_seconds << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NBNN and Local NBNN descriptor classification benchmarks"};
  app.require_subcommand(1);

  app.add_option("--kernel",
                 "distance kernel: auto, scalar, avx2 or neon (default auto)")
      ->each(apply_kernel_choice);

  // evaluate -----------------------------------------------------------
  auto* evaluate_cmd =
      app.add_subcommand("evaluate", "classify a query set and report accuracy");
  DataArgs eval_data;
  bench::EvalParams eval_params;
  std::string eval_method = "local";
  std::string eval_out, eval_confusion;
  eval_data.attach(*evaluate_cmd);
  evaluate_cmd->add_option("--method", eval_method,
                           "nbnn, local, positive or logodds")
      ->capture_default_str();
  attach_engine(*evaluate_cmd, eval_params);
  evaluate_cmd->add_option("--out", eval_out, "write the report CSV here");
  evaluate_cmd->add_option("--confusion", eval_confusion,
                           "write the confusion matrix CSV here");
  evaluate_cmd->callback([&] {
    const auto train = eval_data.load_train();
    const auto queries = eval_data.load_queries();
    eval_params.alpha = eval_data.alpha;
    const auto report = bench::evaluate(bench::parse_method(eval_method), train,
                                        queries, eval_params);
    print_report(report);
    if (!eval_out.empty()) write_or_print(eval_out, bench::report_csv(report));
    if (!eval_confusion.empty())
      write_or_print(eval_confusion, bench::confusion_csv(report));
  });

  // sweep-k --------------------------------------------------------------
  auto* sweep_k_cmd = app.add_subcommand(
      "sweep-k", "local NBNN accuracy across neighborhood sizes");
  DataArgs sweep_k_data;
  bench::EvalParams sweep_k_params;
  std::vector<std::size_t> k_values{1, 2, 5, 10, 20, 50};
  std::string sweep_k_out;
  sweep_k_data.attach(*sweep_k_cmd);
  sweep_k_cmd->add_option("--k-values", k_values, "k values to sweep")
      ->delimiter(',')
      ->capture_default_str();
  attach_engine(*sweep_k_cmd, sweep_k_params);
  sweep_k_cmd->add_option("--out", sweep_k_out, "output CSV path");
  sweep_k_cmd->callback([&] {
    const auto train = sweep_k_data.load_train();
    const auto queries = sweep_k_data.load_queries();
    sweep_k_params.alpha = sweep_k_data.alpha;
    write_or_print(sweep_k_out,
                   bench::sweep_k_csv(train, queries, k_values, sweep_k_params));
  });

  // sweep-checks -----------------------------------------------------------
  auto* sweep_checks_cmd = app.add_subcommand(
      "sweep-checks", "accuracy vs leaf-check budget per method");
  DataArgs sweep_checks_data;
  bench::EvalParams sweep_checks_params;
  std::vector<std::string> method_names{"nbnn", "local"};
  std::vector<std::uint32_t> checks_values{32, 64, 128, 256, 512};
  std::string sweep_checks_out;
  sweep_checks_data.attach(*sweep_checks_cmd);
  sweep_checks_cmd->add_option("--methods", method_names, "methods to sweep")
      ->delimiter(',')
      ->capture_default_str();
  sweep_checks_cmd
      ->add_option("--checks-values", checks_values, "budgets to sweep")
      ->delimiter(',')
      ->capture_default_str();
  attach_engine(*sweep_checks_cmd, sweep_checks_params);
  sweep_checks_cmd->add_option("--out", sweep_checks_out, "output CSV path");
  sweep_checks_cmd->callback([&] {
    const auto train = sweep_checks_data.load_train();
    const auto queries = sweep_checks_data.load_queries();
    sweep_checks_params.alpha = sweep_checks_data.alpha;
    std::vector<bench::Method> methods;
    for (const auto& name : method_names)
      methods.push_back(bench::parse_method(name));
    write_or_print(sweep_checks_out,
                   bench::sweep_checks_csv(train, queries, methods,
                                           checks_values, sweep_checks_params));
  });

  // scaling ------------------------------------------------------------------
  auto* scaling_cmd = app.add_subcommand(
      "scaling", "query-time growth of both methods with the class count");
  std::vector<std::uint32_t> class_counts{4, 8, 16, 32, 64};
  std::string scaling_out;
  bench::EvalParams scaling_params;
  scaling_params.checks = 32;
  SyntheticSpec scaling_spec;
  scaling_spec.train_images_per_class = 5;
  scaling_spec.query_images_per_class = 4;
  scaling_spec.descriptors_per_image = 20;
  scaling_spec.dimension = 16;
  scaling_spec.class_mean_separation = 3.0;
  scaling_spec.within_class_stddev = 1.0;
  attach_synthetic(*scaling_cmd, scaling_spec, /*with_classes=*/false);
  scaling_cmd
      ->add_option("--class-counts", class_counts,
                   "ascending class counts to measure")
      ->delimiter(',')
      ->capture_default_str();
  attach_engine(*scaling_cmd, scaling_params);
  scaling_cmd->add_option("--out", scaling_out, "output CSV path");
  scaling_cmd->callback([&] {
    scaling_spec.rng_seed = scaling_params.seed;
    const auto rows =
        bench::scaling_experiment(class_counts, scaling_spec, scaling_params);
    write_or_print(scaling_out, bench::scaling_csv(rows));
  });

  // gen-synthetic ---------------------------------------------------------
  auto* gen_cmd = app.add_subcommand(
      "gen-synthetic", "generate a synthetic train/query descriptor pair");
  SyntheticSpec gen_spec;
  gen_spec.class_count = 10;
  gen_spec.train_images_per_class = 10;
  gen_spec.query_images_per_class = 5;
  gen_spec.descriptors_per_image = 20;
  gen_spec.dimension = 8;
  gen_spec.class_mean_separation = 2.0;
  gen_spec.within_class_stddev = 1.0;
  std::string gen_train_out, gen_query_out;
  attach_synthetic(*gen_cmd, gen_spec, /*with_classes=*/true);
  gen_cmd->add_option("--seed", gen_spec.rng_seed, "generator seed")
      ->capture_default_str();
  gen_cmd->add_option("--out-train", gen_train_out, "training set output path")
      ->required();
  gen_cmd->add_option("--out-queries", gen_query_out, "query set output path")
      ->required();
  gen_cmd->callback([&] {
    const SyntheticData data = generate_synthetic(gen_spec);
    save_descriptor_file(gen_train_out, data.train);
    save_descriptor_file(gen_query_out,
                         from_query_images(data.queries, data.train));
    std::cout << "wrote " << data.train.size() << " training descriptors to "
              << gen_train_out << " and " << data.queries.size()
              << " query images to " << gen_query_out << "\n";
  });

  // convert -------------------------------------------------------------
  auto* convert_cmd = app.add_subcommand(
      "convert", "convert descriptor sets between CSV and binary");
  std::string convert_in, convert_out, convert_to = "bin";
  bool convert_locations = false;
  convert_cmd->add_option("--in", convert_in, "input file (format auto-detected)")
      ->required();
  convert_cmd->add_option("--out", convert_out, "output file")->required();
  convert_cmd->add_option("--to", convert_to, "output format: bin or csv")
      ->capture_default_str();
  convert_cmd->add_flag("--locations", convert_locations,
                        "CSV input carries x,y columns");
  convert_cmd->callback([&] {
    char magic[4] = {};
    {
      std::ifstream probe(convert_in, std::ios::binary);
      if (!probe) throw std::runtime_error(convert_in + ": cannot open file");
      probe.read(magic, 4);
    }
    const LabeledDescriptorSet set = std::string_view(magic, 4) == "LDSC"
                                         ? load_descriptor_file(convert_in)
                                         : load_csv(convert_in, convert_locations);
    if (convert_to == "bin") {
      save_descriptor_file(convert_out, set);
    } else if (convert_to == "csv") {
      save_csv(convert_out, set);
    } else {
      throw std::invalid_argument("convert: --to must be bin or csv");
    }
    std::cout << "wrote " << set.size() << " records to " << convert_out << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
