#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lnbnn/core.hpp"

namespace lnbnn {

struct Neighbor {
  std::uint32_t point_index = 0;
  float squared_distance = 0.0f;
};

struct ForestConfig {
  std::uint32_t num_trees = 4;
  /// Per-query budget: the number of distinct points whose distance is
  /// computed. Shared across all trees of the forest; a point reached by
  /// several trees is scored and counted once.
  std::uint32_t leaf_checks = 32;
  std::uint64_t rng_seed = 0;
};

/// Nearest-neighbor engine over one descriptor set. Implementations are
/// immutable after construction; concurrent knn() calls are safe.
class NnIndex {
 public:
  virtual ~NnIndex() = default;

  virtual std::size_t size() const = 0;
  virtual std::size_t dimension() const = 0;

  /// The min(k, size) nearest points, ascending by (squared_distance,
  /// point_index). Throws on k == 0 or a dimension mismatch.
  virtual void knn(std::span<const float> query, std::size_t k,
                   std::vector<Neighbor>& out) const = 0;

  std::vector<Neighbor> knn(std::span<const float> query,
                            std::size_t k) const {
    std::vector<Neighbor> out;
    knn(query, k, out);
    return out;
  }
};

/// Exhaustive-scan engine; the exact baseline the forest is tested
/// against.
class BruteForceIndex final : public NnIndex {
 public:
  explicit BruteForceIndex(DescriptorArray data);

  using NnIndex::knn;
  std::size_t size() const override { return data_.size(); }
  std::size_t dimension() const override { return data_.dimension(); }
  void knn(std::span<const float> query, std::size_t k,
           std::vector<Neighbor>& out) const override;

  const DescriptorArray& points() const { return data_; }

 private:
  DescriptorArray data_;
};

/// Randomized KD-tree forest searched best-bin-first under a shared
/// leaf-check budget.
///
/// Each tree splits on a dimension drawn uniformly among the
/// highest-variance dimensions of the node's points (split value = mean
/// along that dimension), so trees differ only through the seed. A query
/// first descends every tree root-to-leaf, then backtracks through one
/// priority queue of unvisited branches ordered by lower-bound distance,
/// until the budget is exhausted. With leaf_checks >= size() the
/// traversal visits every point and the result equals brute force.
class KdForestIndex final : public NnIndex {
 public:
  /// Builds the forest. Deterministic given (data, config.rng_seed).
  /// Throws on empty data.
  KdForestIndex(DescriptorArray data, const ForestConfig& config);

  using NnIndex::knn;
  std::size_t size() const override { return data_.size(); }
  std::size_t dimension() const override { return data_.dimension(); }
  const ForestConfig& config() const { return config_; }

  /// knn under the config's leaf_checks budget.
  void knn(std::span<const float> query, std::size_t k,
           std::vector<Neighbor>& out) const override;

  /// knn under an explicit budget, for sweeping checks without
  /// rebuilding. Identical structure, different work limit.
  void knn_with_budget(std::span<const float> query, std::size_t k,
                       std::uint32_t leaf_checks,
                       std::vector<Neighbor>& out) const;

  /// Distinct points scored by the most recent knn call on this thread.
  static std::uint64_t last_query_checks();

  /// Writes the forest structure (not the points) to a versioned binary
  /// file, magic "LNBN". load() rebinds a saved structure to the same
  /// descriptor data and validates dimension and point count.
  void save(const std::string& path) const;
  static KdForestIndex load(const std::string& path, DescriptorArray data);

  const DescriptorArray& points() const { return data_; }

 private:
  struct Node {
    std::int32_t split_dim = -1;  // -1 marks a leaf
    float split_value = 0.0f;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t begin = 0;  // leaf range into leaf_points_
    std::uint32_t end = 0;
  };

  KdForestIndex() = default;
  void build();

  DescriptorArray data_;
  ForestConfig config_;
  std::vector<Node> nodes_;
  std::vector<std::int32_t> roots_;
  std::vector<std::uint32_t> leaf_points_;

  friend struct ForestBuilder;
};

/// Exact k nearest neighbors by full scan, ascending by
/// (squared_distance, point_index). Throws on empty data or k == 0.
std::vector<Neighbor> brute_force_knn(const DescriptorArray& data,
                                      std::span<const float> query,
                                      std::size_t k);

inline KdForestIndex build_forest(DescriptorArray data,
                                  const ForestConfig& config) {
  return KdForestIndex(std::move(data), config);
}

inline std::vector<Neighbor> forest_knn(const KdForestIndex& index,
                                        std::span<const float> query,
                                        std::size_t k) {
  return index.knn(query, k);
}

/// knn over a merged multi-class set, each neighbor annotated with its
/// source class through the parallel labels array.
std::vector<std::pair<Neighbor, std::uint32_t>> knn_with_class_lookup(
    const NnIndex& index, std::span<const std::uint32_t> labels,
    std::span<const float> query, std::size_t k);

}  // namespace lnbnn
