#include "lnbnn/ann.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "lnbnn/distance_kernels.hpp"
#include "lnbnn/random.hpp"

namespace lnbnn {

namespace {

// k-best collector ordered by (squared_distance, point_index); the
// lexicographic tie-break makes results independent of scan order.
class KBest {
 public:
  explicit KBest(std::size_t k) : k_(k) {}

  void offer(std::uint32_t index, float dist) {
    if (heap_.size() < k_) {
      heap_.emplace_back(dist, index);
      std::push_heap(heap_.begin(), heap_.end());
      return;
    }
    const std::pair<float, std::uint32_t> cand(dist, index);
    if (cand < heap_.front()) {
      std::pop_heap(heap_.begin(), heap_.end());
      heap_.back() = cand;
      std::push_heap(heap_.begin(), heap_.end());
    }
  }

  void take_sorted(std::vector<Neighbor>& out) {
    std::sort(heap_.begin(), heap_.end());
    out.clear();
    out.reserve(heap_.size());
    for (const auto& [dist, index] : heap_) out.push_back({index, dist});
    heap_.clear();
  }

 private:
  std::size_t k_;
  std::vector<std::pair<float, std::uint32_t>> heap_;
};

void check_query(std::span<const float> query, std::size_t dim, std::size_t k) {
  if (k == 0) throw std::invalid_argument("knn: k must be >= 1");
  if (query.size() != dim)
    throw std::invalid_argument("knn: query dimension " + std::to_string(query.size()) +
                                " does not match index dimension " + std::to_string(dim));
}

void scan_all(const DescriptorArray& data, std::span<const float> query,
              std::size_t k, std::vector<Neighbor>& out) {
  const auto l2 = kernels::active_l2sqr();
  const std::size_t dim = data.dimension();
  KBest best(std::min(k, data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    best.offer(static_cast<std::uint32_t>(i), l2(query.data(), data.row(i), dim));
  }
  best.take_sorted(out);
}

thread_local std::uint64_t tls_last_checks = 0;

}  // namespace

std::vector<Neighbor> brute_force_knn(const DescriptorArray& data,
                                      std::span<const float> query,
                                      std::size_t k) {
  if (data.empty()) throw std::invalid_argument("brute_force_knn: empty data");
  check_query(query, data.dimension(), k);
  std::vector<Neighbor> out;
  scan_all(data, query, k, out);
  return out;
}

BruteForceIndex::BruteForceIndex(DescriptorArray data) : data_(std::move(data)) {
  if (data_.empty()) throw std::invalid_argument("BruteForceIndex: empty data");
}

void BruteForceIndex::knn(std::span<const float> query, std::size_t k,
                          std::vector<Neighbor>& out) const {
  check_query(query, data_.dimension(), k);
  scan_all(data_, query, k, out);
}

// ---------------------------------------------------------------------------
// Forest construction

struct ForestBuilder {
  // Node splits draw uniformly among this many highest-variance
  // dimensions.
  static constexpr std::size_t kTopVarianceDims = 5;
  static constexpr std::uint32_t kLeafCapacity = 16;
  // Past this depth every node becomes a leaf; mean splits on real data
  // never get close.
  static constexpr int kMaxDepth = 64;

  const DescriptorArray& data;
  std::vector<KdForestIndex::Node>& nodes;
  Rng rng{0};

  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<std::uint32_t> dim_order;
  std::vector<std::uint32_t> partition_buf;

  ForestBuilder(const DescriptorArray& d, std::vector<KdForestIndex::Node>& n)
      : data(d), nodes(n), mean(d.dimension()), variance(d.dimension()),
        dim_order(d.dimension()) {}

  std::int32_t make_leaf(std::uint32_t abs_begin, std::uint32_t abs_end) {
    KdForestIndex::Node node;
    node.split_dim = -1;
    node.begin = abs_begin;
    node.end = abs_end;
    nodes.push_back(node);
    return static_cast<std::int32_t>(nodes.size() - 1);
  }

  // Builds the subtree over ids[begin, end); `offset` maps positions in
  // ids to absolute positions in the forest-wide leaf_points array.
  std::int32_t build(std::vector<std::uint32_t>& ids, std::uint32_t begin,
                     std::uint32_t end, std::uint32_t offset, int depth) {
    const std::uint32_t count = end - begin;
    if (count <= kLeafCapacity || depth >= kMaxDepth)
      return make_leaf(offset + begin, offset + end);

    const std::size_t dim = data.dimension();
    std::fill(mean.begin(), mean.end(), 0.0);
    std::fill(variance.begin(), variance.end(), 0.0);
    for (std::uint32_t i = begin; i < end; ++i) {
      const float* row = data.row(ids[i]);
      for (std::size_t j = 0; j < dim; ++j) mean[j] += row[j];
    }
    for (std::size_t j = 0; j < dim; ++j) mean[j] /= count;
    for (std::uint32_t i = begin; i < end; ++i) {
      const float* row = data.row(ids[i]);
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = row[j] - mean[j];
        variance[j] += d * d;
      }
    }

    for (std::size_t j = 0; j < dim; ++j) dim_order[j] = static_cast<std::uint32_t>(j);
    std::size_t top = std::min(kTopVarianceDims, dim);
    std::partial_sort(dim_order.begin(), dim_order.begin() + top, dim_order.end(),
                      [&](std::uint32_t a, std::uint32_t b) {
                        if (variance[a] != variance[b]) return variance[a] > variance[b];
                        return a < b;
                      });
    if (variance[dim_order[0]] == 0.0)
      return make_leaf(offset + begin, offset + end);  // all points identical
    while (variance[dim_order[top - 1]] == 0.0) --top;  // keep splittable dims only

    const std::uint32_t split_dim = dim_order[uniform_below(rng, top)];
    // Partition against the same float the traversal will compare with,
    // so the stored plane and the actual split agree exactly.
    const float split_value = static_cast<float>(mean[split_dim]);

    // Stable two-pass partition: point order within each side is
    // preserved, so tree layout does not depend on std::partition
    // internals.
    partition_buf.clear();
    std::uint32_t left_end = begin;
    for (std::uint32_t i = begin; i < end; ++i) {
      if (data.row(ids[i])[split_dim] < split_value) {
        ids[left_end++] = ids[i];
      } else {
        partition_buf.push_back(ids[i]);
      }
    }
    std::copy(partition_buf.begin(), partition_buf.end(), ids.begin() + left_end);

    if (left_end == begin || left_end == end)
      return make_leaf(offset + begin, offset + end);

    KdForestIndex::Node node;
    node.split_dim = static_cast<std::int32_t>(split_dim);
    node.split_value = split_value;
    const std::int32_t id = static_cast<std::int32_t>(nodes.size());
    nodes.push_back(node);
    const std::int32_t left = build(ids, begin, left_end, offset, depth + 1);
    const std::int32_t right = build(ids, left_end, end, offset, depth + 1);
    nodes[id].left = left;
    nodes[id].right = right;
    return id;
  }
};

KdForestIndex::KdForestIndex(DescriptorArray data, const ForestConfig& config)
    : data_(std::move(data)), config_(config) {
  if (data_.empty()) throw std::invalid_argument("KdForestIndex: empty data");
  if (config_.num_trees == 0)
    throw std::invalid_argument("KdForestIndex: num_trees must be >= 1");
  if (config_.leaf_checks == 0)
    throw std::invalid_argument("KdForestIndex: leaf_checks must be >= 1");
  build();
}

void KdForestIndex::build() {
  const std::uint32_t n = static_cast<std::uint32_t>(data_.size());
  ForestBuilder builder(data_, nodes_);
  leaf_points_.reserve(std::size_t{config_.num_trees} * n);
  std::vector<std::uint32_t> ids(n);
  for (std::uint32_t t = 0; t < config_.num_trees; ++t) {
    builder.rng = make_rng(derive_seed(config_.rng_seed, t));
    for (std::uint32_t i = 0; i < n; ++i) ids[i] = i;
    roots_.push_back(builder.build(ids, 0, n, t * n, 0));
    leaf_points_.insert(leaf_points_.end(), ids.begin(), ids.end());
  }
}

// ---------------------------------------------------------------------------
// Best-bin-first search

namespace {

struct Branch {
  float bound;
  std::int32_t node;
};

struct BranchGreater {
  bool operator()(const Branch& a, const Branch& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.node > b.node;
  }
};

// Query-local scratch, reused across calls on the same thread. The
// visited stamps use an epoch so reset is O(1).
struct SearchScratch {
  std::vector<std::uint32_t> stamp;
  std::uint32_t epoch = 0;
  std::vector<Branch> branches;
  std::uint64_t checked = 0;
  bool exhausted = false;

  void begin(std::size_t n) {
    if (stamp.size() < n) {
      stamp.assign(n, 0);
      epoch = 0;
    }
    if (++epoch == 0) {
      std::fill(stamp.begin(), stamp.end(), 0);
      epoch = 1;
    }
    branches.clear();
    checked = 0;
    exhausted = false;
  }

  void push(Branch b) {
    branches.push_back(b);
    std::push_heap(branches.begin(), branches.end(), BranchGreater{});
  }

  Branch pop() {
    std::pop_heap(branches.begin(), branches.end(), BranchGreater{});
    Branch b = branches.back();
    branches.pop_back();
    return b;
  }
};

thread_local SearchScratch tls_scratch;

}  // namespace

void KdForestIndex::knn(std::span<const float> query, std::size_t k,
                        std::vector<Neighbor>& out) const {
  knn_with_budget(query, k, config_.leaf_checks, out);
}

void KdForestIndex::knn_with_budget(std::span<const float> query, std::size_t k,
                                    std::uint32_t leaf_checks,
                                    std::vector<Neighbor>& out) const {
  check_query(query, data_.dimension(), k);
  if (leaf_checks == 0)
    throw std::invalid_argument("knn_with_budget: leaf_checks must be >= 1");

  SearchScratch& scratch = tls_scratch;
  scratch.begin(data_.size());
  KBest best(std::min(k, data_.size()));
  const auto l2 = kernels::active_l2sqr();
  const float* q = query.data();
  const std::size_t dim = data_.dimension();

  auto descend = [&](std::int32_t node_id, float bound) {
    while (true) {
      const Node& node = nodes_[node_id];
      if (node.split_dim < 0) {
        for (std::uint32_t i = node.begin; i < node.end; ++i) {
          const std::uint32_t point = leaf_points_[i];
          if (scratch.stamp[point] == scratch.epoch) continue;
          if (scratch.checked >= leaf_checks) {
            scratch.exhausted = true;
            return;
          }
          scratch.stamp[point] = scratch.epoch;
          ++scratch.checked;
          best.offer(point, l2(q, data_.row(point), dim));
        }
        return;
      }
      const float diff = q[node.split_dim] - node.split_value;
      const std::int32_t near = diff < 0.0f ? node.left : node.right;
      const std::int32_t far = diff < 0.0f ? node.right : node.left;
      scratch.push({bound + diff * diff, far});
      node_id = near;
    }
  };

  // Root-to-leaf descent of every tree first, then backtracking through
  // the one shared priority queue until the budget runs out.
  for (std::int32_t root : roots_) {
    if (scratch.exhausted) break;
    descend(root, 0.0f);
  }
  while (!scratch.exhausted && !scratch.branches.empty()) {
    const Branch branch = scratch.pop();
    descend(branch.node, branch.bound);
  }

  best.take_sorted(out);
  tls_last_checks = scratch.checked;
}

std::uint64_t KdForestIndex::last_query_checks() { return tls_last_checks; }

// ---------------------------------------------------------------------------
// Serialization: magic "LNBN", version u16, little-endian integers,
// IEEE-754 binary32 reals. The file carries the forest structure only;
// load() re-attaches the descriptor data and validates it matches.

namespace {

constexpr char kForestMagic[4] = {'L', 'N', 'B', 'N'};
constexpr std::uint16_t kForestVersion = 1;

template <typename T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_unsigned_v<T>);
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  os.write(bytes, sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  static_assert(std::is_unsigned_v<T>);
  unsigned char bytes[sizeof(T)];
  is.read(reinterpret_cast<char*>(bytes), sizeof(T));
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

void write_i32(std::ostream& os, std::int32_t v) {
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(v));
}
std::int32_t read_i32(std::istream& is) {
  return static_cast<std::int32_t>(read_le<std::uint32_t>(is));
}
void write_f32(std::ostream& os, float v) {
  write_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
}
float read_f32(std::istream& is) {
  return std::bit_cast<float>(read_le<std::uint32_t>(is));
}

}  // namespace

void KdForestIndex::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("save: cannot open " + path);
  os.write(kForestMagic, 4);
  write_le<std::uint16_t>(os, kForestVersion);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(data_.dimension()));
  write_le<std::uint64_t>(os, data_.size());
  write_le<std::uint32_t>(os, config_.num_trees);
  write_le<std::uint32_t>(os, config_.leaf_checks);
  write_le<std::uint64_t>(os, config_.rng_seed);
  write_le<std::uint64_t>(os, nodes_.size());
  for (std::int32_t root : roots_) write_i32(os, root);
  for (const Node& n : nodes_) {
    write_i32(os, n.split_dim);
    write_f32(os, n.split_value);
    write_i32(os, n.left);
    write_i32(os, n.right);
    write_le<std::uint32_t>(os, n.begin);
    write_le<std::uint32_t>(os, n.end);
  }
  for (std::uint32_t p : leaf_points_) write_le<std::uint32_t>(os, p);
  if (!os) throw std::runtime_error("save: write failed for " + path);
}

KdForestIndex KdForestIndex::load(const std::string& path, DescriptorArray data) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("load: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kForestMagic, 4) != 0)
    throw std::runtime_error("load: bad magic in " + path);
  const std::uint16_t version = read_le<std::uint16_t>(is);
  if (version != kForestVersion)
    throw std::runtime_error("load: unsupported format version " +
                             std::to_string(version));
  const std::uint32_t dim = read_le<std::uint32_t>(is);
  const std::uint64_t count = read_le<std::uint64_t>(is);
  if (dim != data.dimension() || count != data.size())
    throw std::runtime_error("load: file describes " + std::to_string(count) +
                             " points of dimension " + std::to_string(dim) +
                             ", data has " + std::to_string(data.size()) +
                             " of dimension " + std::to_string(data.dimension()));

  KdForestIndex index;
  index.data_ = std::move(data);
  index.config_.num_trees = read_le<std::uint32_t>(is);
  index.config_.leaf_checks = read_le<std::uint32_t>(is);
  index.config_.rng_seed = read_le<std::uint64_t>(is);
  const std::uint64_t node_count = read_le<std::uint64_t>(is);
  index.roots_.resize(index.config_.num_trees);
  for (auto& root : index.roots_) root = read_i32(is);
  index.nodes_.resize(node_count);
  for (Node& n : index.nodes_) {
    n.split_dim = read_i32(is);
    n.split_value = read_f32(is);
    n.left = read_i32(is);
    n.right = read_i32(is);
    n.begin = read_le<std::uint32_t>(is);
    n.end = read_le<std::uint32_t>(is);
  }
  const std::uint64_t leaf_total = std::uint64_t{index.config_.num_trees} * count;
  index.leaf_points_.resize(leaf_total);
  for (auto& p : index.leaf_points_) p = read_le<std::uint32_t>(is);
  if (!is) throw std::runtime_error("load: truncated file " + path);

  const std::int64_t nodes_signed = static_cast<std::int64_t>(node_count);
  for (const Node& n : index.nodes_) {
    if (n.split_dim >= 0) {
      if (n.split_dim >= static_cast<std::int32_t>(dim) || n.left < 0 ||
          n.right < 0 || n.left >= nodes_signed || n.right >= nodes_signed)
        throw std::runtime_error("load: corrupt node in " + path);
    } else if (n.begin > n.end || n.end > leaf_total) {
      throw std::runtime_error("load: corrupt leaf range in " + path);
    }
  }
  for (std::uint32_t p : index.leaf_points_) {
    if (p >= count) throw std::runtime_error("load: corrupt point id in " + path);
  }
  return index;
}

std::vector<std::pair<Neighbor, std::uint32_t>> knn_with_class_lookup(
    const NnIndex& index, std::span<const std::uint32_t> labels,
    std::span<const float> query, std::size_t k) {
  if (labels.size() != index.size())
    throw std::invalid_argument("knn_with_class_lookup: labels length " +
                                std::to_string(labels.size()) +
                                " does not match index size " +
                                std::to_string(index.size()));
  std::vector<Neighbor> neighbors;
  index.knn(query, k, neighbors);
  std::vector<std::pair<Neighbor, std::uint32_t>> out;
  out.reserve(neighbors.size());
  for (const Neighbor& n : neighbors) out.emplace_back(n, labels[n.point_index]);
  return out;
}

}  // namespace lnbnn
