#include "lnbnn/core.hpp"

#include <cmath>
#include <stdexcept>

#include "lnbnn/distance_kernels.hpp"

namespace lnbnn {

DescriptorArray::DescriptorArray(std::size_t dim, std::vector<float> data)
    : dim_(dim), data_(std::move(data)) {
  if (dim_ == 0) throw std::invalid_argument("DescriptorArray: dimension must be >= 1");
  if (data_.size() % dim_ != 0)
    throw std::invalid_argument("DescriptorArray: data size not a multiple of dimension");
  count_ = data_.size() / dim_;
  for (float v : data_) {
    if (!std::isfinite(v))
      throw std::invalid_argument("DescriptorArray: non-finite descriptor entry");
  }
}

void DescriptorArray::push_back(std::span<const float> descriptor) {
  if (dim_ == 0) {
    if (descriptor.empty())
      throw std::invalid_argument("DescriptorArray: dimension must be >= 1");
    dim_ = descriptor.size();
  } else if (descriptor.size() != dim_) {
    throw std::invalid_argument("DescriptorArray: descriptor dimension mismatch");
  }
  for (float v : descriptor) {
    if (!std::isfinite(v))
      throw std::invalid_argument("DescriptorArray: non-finite descriptor entry");
  }
  data_.insert(data_.end(), descriptor.begin(), descriptor.end());
  ++count_;
}

void LabeledDescriptorSet::validate() const {
  const std::size_t n = descriptors.size();
  if (n == 0) throw std::invalid_argument("LabeledDescriptorSet: empty set");
  if (labels.size() != n)
    throw std::invalid_argument("LabeledDescriptorSet: labels length mismatch");
  if (image_ids.size() != n)
    throw std::invalid_argument("LabeledDescriptorSet: image_ids length mismatch");
  if (class_count == 0)
    throw std::invalid_argument("LabeledDescriptorSet: class_count must be >= 1");
  if (locations && locations->size() != n)
    throw std::invalid_argument("LabeledDescriptorSet: locations length mismatch");
  std::vector<bool> seen(class_count, false);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] >= class_count)
      throw std::invalid_argument("LabeledDescriptorSet: label out of range at record " +
                                  std::to_string(i));
    seen[labels[i]] = true;
  }
  for (std::uint32_t c = 0; c < class_count; ++c) {
    if (!seen[c])
      throw std::invalid_argument("LabeledDescriptorSet: class " + std::to_string(c) +
                                  " has no descriptors");
  }
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("squared_distance: dimension mismatch (" +
                                std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  if (a.empty()) throw std::invalid_argument("squared_distance: empty descriptors");
  return kernels::l2sqr(a.data(), b.data(), a.size());
}

Descriptor augment_with_location(const LocatedDescriptor& ld, double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("augment_with_location: alpha must be finite and >= 0");
  if (!std::isfinite(ld.x) || !std::isfinite(ld.y) || ld.x < 0.0f || ld.x > 1.0f ||
      ld.y < 0.0f || ld.y > 1.0f)
    throw std::invalid_argument("augment_with_location: location outside [0,1]");
  Descriptor out;
  out.reserve(ld.values.size() + 2);
  out.insert(out.end(), ld.values.begin(), ld.values.end());
  out.push_back(static_cast<float>(alpha * ld.x));
  out.push_back(static_cast<float>(alpha * ld.y));
  return out;
}

std::uint32_t argmin_class(std::span<const double> totals) {
  if (totals.empty()) throw std::invalid_argument("argmin_class: no classes");
  std::uint32_t best = 0;
  for (std::uint32_t c = 1; c < totals.size(); ++c) {
    if (totals[c] < totals[best]) best = c;
  }
  return best;
}

std::uint32_t argmax_class(std::span<const double> totals) {
  if (totals.empty()) throw std::invalid_argument("argmax_class: no classes");
  std::uint32_t best = 0;
  for (std::uint32_t c = 1; c < totals.size(); ++c) {
    if (totals[c] > totals[best]) best = c;
  }
  return best;
}

}  // namespace lnbnn
