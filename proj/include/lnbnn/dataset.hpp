#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lnbnn/core.hpp"

namespace lnbnn {

/// Parameters of the synthetic Gaussian-class generator used by the
/// benchmarks. Class means sit on a randomly chosen integer lattice
/// scaled by class_mean_separation, so distinct classes are at least
/// that far apart; descriptors are isotropic Gaussians around the mean.
struct SyntheticSpec {
  std::uint32_t class_count = 2;
  std::uint32_t train_images_per_class = 5;
  std::uint32_t query_images_per_class = 2;
  std::uint32_t descriptors_per_image = 10;
  std::uint32_t dimension = 8;
  double class_mean_separation = 1.0;
  double within_class_stddev = 1.0;
  std::uint64_t rng_seed = 0;
};

struct SyntheticData {
  LabeledDescriptorSet train;
  std::vector<QueryImage> queries;
};

/// Deterministic given spec.rng_seed. Query images carry true labels.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Reads a binary descriptor file (magic "LDSC"). When the file carries
/// locations and alpha > 0, every descriptor is location-augmented at
/// load time (dimension d + 2); with alpha == 0 the raw descriptors are
/// returned with locations attached. Malformed input fails with a
/// diagnostic naming the byte offset.
LabeledDescriptorSet load_descriptor_file(const std::string& path,
                                          double alpha = 0.0);

void save_descriptor_file(const std::string& path,
                          const LabeledDescriptorSet& set);

/// CSV fixture format: one record per line,
/// class_id,image_id[,x,y],v1,...,vd. Whether x,y columns are present
/// cannot be inferred from the data, so the caller declares it.
LabeledDescriptorSet load_csv(const std::string& path, bool has_locations);

void save_csv(const std::string& path, const LabeledDescriptorSet& set);

/// Groups a labeled set into one QueryImage per (label, image_id) pair,
/// ordered by (label, image_id).
std::vector<QueryImage> to_query_images(const LabeledDescriptorSet& set);

/// Flattens query images back into a labeled set; class metadata
/// (count, names) is taken from `like`.
LabeledDescriptorSet from_query_images(std::span<const QueryImage> queries,
                                       const LabeledDescriptorSet& like);

struct SplitResult {
  LabeledDescriptorSet train;
  std::vector<QueryImage> queries;
};

/// Splits by image: per class, train_images_per_class whole images go to
/// the training side and the rest become query images. No image appears
/// on both sides. Deterministic given the seed; throws naming the class
/// when one has too few images.
SplitResult split_by_image(const LabeledDescriptorSet& set,
                           std::uint32_t train_images_per_class,
                           std::uint64_t rng_seed);

}  // namespace lnbnn
