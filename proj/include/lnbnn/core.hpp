#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lnbnn {

/// A single descriptor: a fixed-dimension vector of finite reals.
using Descriptor = std::vector<float>;

/// Descriptor plus its image-normalized position. x and y lie in [0, 1]
/// (pixel coordinates divided by the longest image side).
struct LocatedDescriptor {
  Descriptor values;
  float x = 0.0f;
  float y = 0.0f;
};

struct ClassInfo {
  std::uint32_t id = 0;
  std::string name;
};

/// Contiguous row-major storage for descriptors sharing one dimension.
class DescriptorArray {
 public:
  DescriptorArray() = default;
  explicit DescriptorArray(std::size_t dim) : dim_(dim) {}
  DescriptorArray(std::size_t dim, std::vector<float> data);

  std::size_t dimension() const { return dim_; }
  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }

  const float* row(std::size_t i) const { return data_.data() + i * dim_; }
  std::span<const float> operator[](std::size_t i) const {
    return {row(i), dim_};
  }
  const std::vector<float>& data() const { return data_; }

  /// Appends one descriptor. Rejects dimension mismatches and non-finite
  /// entries.
  void push_back(std::span<const float> descriptor);

  void reserve(std::size_t n) { data_.reserve(n * dim_); }

 private:
  std::size_t dim_ = 0;
  std::size_t count_ = 0;
  std::vector<float> data_;
};

/// The training corpus: descriptors with parallel class labels and
/// image-of-origin ids. Class ids are dense in [0, class_count).
struct LabeledDescriptorSet {
  DescriptorArray descriptors;
  std::vector<std::uint32_t> labels;
  std::vector<std::uint32_t> image_ids;
  std::uint32_t class_count = 0;
  std::vector<std::string> class_names;
  /// Per-record (x, y), parallel to descriptors, present only when the
  /// source carried locations and no augmentation was applied.
  std::optional<std::vector<std::array<float, 2>>> locations;

  std::size_t size() const { return descriptors.size(); }
  std::size_t dimension() const { return descriptors.dimension(); }

  /// Throws std::invalid_argument naming the first violated invariant:
  /// parallel lengths, non-empty, labels in range, every class present.
  void validate() const;
};

/// One image to classify: its descriptors plus an optional ground-truth
/// label (present for benchmark splits).
struct QueryImage {
  DescriptorArray descriptors;
  std::optional<std::uint32_t> true_label;
  std::uint32_t image_id = 0;
};

/// Sum of squared coordinate differences. Throws on dimension mismatch.
double squared_distance(std::span<const float> a, std::span<const float> b);

/// Appends (alpha * x, alpha * y) to the descriptor, yielding dimension
/// d + 2. alpha = 0 appends two zeros, so location is ignored when
/// matching.
Descriptor augment_with_location(const LocatedDescriptor& ld, double alpha);

/// Index of the minimum total; ties break toward the lowest class id.
/// Throws on an empty span.
std::uint32_t argmin_class(std::span<const double> totals);

/// Index of the maximum total; ties break toward the lowest class id.
std::uint32_t argmax_class(std::span<const double> totals);

}  // namespace lnbnn
