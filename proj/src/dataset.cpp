#include "lnbnn/dataset.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "lnbnn/random.hpp"

namespace lnbnn {

namespace {

constexpr char kDatasetMagic[4] = {'L', 'D', 'S', 'C'};
constexpr std::uint16_t kDatasetVersion = 1;

// Little-endian reader over an in-memory file image; every failure
// reports the byte offset it happened at.
class ByteReader {
 public:
  ByteReader(const std::string& path, std::vector<unsigned char> bytes)
      : path_(path), bytes_(std::move(bytes)) {}

  std::size_t offset() const { return off_; }
  bool at_end() const { return off_ == bytes_.size(); }

  void require(std::size_t n, const char* what) {
    if (off_ + n > bytes_.size())
      throw std::runtime_error(path_ + ": truncated file at byte offset " +
                               std::to_string(off_) + " while reading " + what);
  }

  void read_magic() {
    require(4, "magic");
    if (std::memcmp(bytes_.data(), kDatasetMagic, 4) != 0)
      throw std::runtime_error(path_ + ": bad magic at byte offset 0");
    off_ += 4;
  }

  template <typename T>
  T read(const char* what) {
    static_assert(std::is_unsigned_v<T>);
    require(sizeof(T), what);
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      value |= static_cast<T>(bytes_[off_ + i]) << (8 * i);
    off_ += sizeof(T);
    return value;
  }

  float read_f32(const char* what) {
    return std::bit_cast<float>(read<std::uint32_t>(what));
  }

  [[noreturn]] void fail(const std::string& message, std::size_t at) const {
    throw std::runtime_error(path_ + ": " + message + " at byte offset " +
                             std::to_string(at));
  }

 private:
  std::string path_;
  std::vector<unsigned char> bytes_;
  std::size_t off_ = 0;
};

std::vector<unsigned char> slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) throw std::runtime_error(path + ": cannot open file");
  const std::streamsize size = is.tellg();
  is.seekg(0);
  std::vector<unsigned char> bytes(static_cast<std::size_t>(size));
  if (size > 0) is.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!is) throw std::runtime_error(path + ": read failed");
  return bytes;
}

template <typename T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_unsigned_v<T>);
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i)
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  os.write(bytes, sizeof(T));
}

void write_f32(std::ostream& os, float v) {
  write_le<std::uint32_t>(os, std::bit_cast<std::uint32_t>(v));
}

std::vector<std::string> default_class_names(std::uint32_t class_count) {
  std::vector<std::string> names;
  names.reserve(class_count);
  for (std::uint32_t c = 0; c < class_count; ++c)
    names.push_back("class_" + std::to_string(c));
  return names;
}

std::string format_float(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

LabeledDescriptorSet load_descriptor_file(const std::string& path, double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha))
    throw std::invalid_argument("load_descriptor_file: alpha must be finite and >= 0");
  ByteReader reader(path, slurp(path));
  reader.read_magic();
  const std::uint16_t version = reader.read<std::uint16_t>("version");
  if (version != kDatasetVersion)
    reader.fail("unsupported format version " + std::to_string(version),
                reader.offset() - 2);
  const std::uint32_t dim = reader.read<std::uint32_t>("dimension");
  if (dim == 0) reader.fail("dimension must be >= 1", reader.offset() - 4);
  const std::uint64_t count = reader.read<std::uint64_t>("record count");
  if (count == 0) reader.fail("record count must be >= 1", reader.offset() - 8);
  const std::uint8_t has_locations = reader.read<std::uint8_t>("locations flag");
  if (has_locations > 1)
    reader.fail("locations flag must be 0 or 1", reader.offset() - 1);
  const std::uint32_t class_count = reader.read<std::uint32_t>("class count");
  if (class_count == 0) reader.fail("class count must be >= 1", reader.offset() - 4);

  const bool augment = has_locations && alpha > 0.0;
  LabeledDescriptorSet set;
  set.class_count = class_count;
  set.class_names = default_class_names(class_count);
  set.descriptors = DescriptorArray(augment ? dim + 2 : dim);
  set.descriptors.reserve(count);
  set.labels.reserve(count);
  set.image_ids.reserve(count);
  if (has_locations && !augment)
    set.locations.emplace();

  std::vector<float> values(augment ? dim + 2 : dim);
  for (std::uint64_t rec = 0; rec < count; ++rec) {
    const std::size_t record_offset = reader.offset();
    const std::uint32_t label = reader.read<std::uint32_t>("class id");
    if (label >= class_count)
      reader.fail("record " + std::to_string(rec) + " has class id " +
                      std::to_string(label) + " >= class count " +
                      std::to_string(class_count),
                  record_offset);
    const std::uint32_t image_id = reader.read<std::uint32_t>("image id");
    float x = 0.0f, y = 0.0f;
    if (has_locations) {
      x = reader.read_f32("x");
      y = reader.read_f32("y");
      if (!std::isfinite(x) || !std::isfinite(y) || x < 0.0f || x > 1.0f ||
          y < 0.0f || y > 1.0f)
        reader.fail("record " + std::to_string(rec) + " has location outside [0,1]",
                    record_offset + 8);
    }
    for (std::uint32_t j = 0; j < dim; ++j) {
      const std::size_t value_offset = reader.offset();
      values[j] = reader.read_f32("descriptor value");
      if (!std::isfinite(values[j]))
        reader.fail("record " + std::to_string(rec) + " has a non-finite value",
                    value_offset);
    }
    if (augment) {
      values[dim] = static_cast<float>(alpha * x);
      values[dim + 1] = static_cast<float>(alpha * y);
    }
    set.descriptors.push_back(values);
    set.labels.push_back(label);
    set.image_ids.push_back(image_id);
    if (set.locations) set.locations->push_back({x, y});
  }
  if (!reader.at_end())
    reader.fail("trailing bytes after the last record", reader.offset());
  set.validate();
  return set;
}

void save_descriptor_file(const std::string& path, const LabeledDescriptorSet& set) {
  set.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path + ": cannot open file for writing");
  const bool has_locations = set.locations.has_value();
  os.write(kDatasetMagic, 4);
  write_le<std::uint16_t>(os, kDatasetVersion);
  write_le<std::uint32_t>(os, static_cast<std::uint32_t>(set.dimension()));
  write_le<std::uint64_t>(os, set.size());
  write_le<std::uint8_t>(os, has_locations ? 1 : 0);
  write_le<std::uint32_t>(os, set.class_count);
  for (std::size_t i = 0; i < set.size(); ++i) {
    write_le<std::uint32_t>(os, set.labels[i]);
    write_le<std::uint32_t>(os, set.image_ids[i]);
    if (has_locations) {
      write_f32(os, (*set.locations)[i][0]);
      write_f32(os, (*set.locations)[i][1]);
    }
    const auto row = set.descriptors[i];
    for (float v : row) write_f32(os, v);
  }
  if (!os) throw std::runtime_error(path + ": write failed");
}

LabeledDescriptorSet load_csv(const std::string& path, bool has_locations) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error(path + ": cannot open file");

  LabeledDescriptorSet set;
  if (has_locations) set.locations.emplace();
  std::uint32_t max_label = 0;
  std::string line;
  std::size_t line_no = 0;
  std::vector<float> values;

  auto fail = [&](const std::string& message) -> void {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + message);
  };

  auto parse_u32 = [&](std::string_view field, const char* what) {
    std::uint32_t v = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
      fail(std::string("cannot parse ") + what + " from '" + std::string(field) + "'");
    return v;
  };
  auto parse_f32 = [&](std::string_view field, const char* what) {
    float v = 0.0f;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
      fail(std::string("cannot parse ") + what + " from '" + std::string(field) + "'");
    return v;
  };

  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    const std::string_view view(line);
    while (true) {
      const std::size_t comma = view.find(',', start);
      if (comma == std::string_view::npos) {
        fields.push_back(view.substr(start));
        break;
      }
      fields.push_back(view.substr(start, comma - start));
      start = comma + 1;
    }
    const std::size_t fixed = has_locations ? 4 : 2;
    if (fields.size() <= fixed) fail("too few fields");
    const std::size_t dim = fields.size() - fixed;
    if (set.size() > 0 && dim != set.dimension())
      fail("record has " + std::to_string(dim) + " values, expected " +
           std::to_string(set.dimension()));

    const std::uint32_t label = parse_u32(fields[0], "class id");
    const std::uint32_t image_id = parse_u32(fields[1], "image id");
    float x = 0.0f, y = 0.0f;
    if (has_locations) {
      x = parse_f32(fields[2], "x");
      y = parse_f32(fields[3], "y");
    }
    values.clear();
    for (std::size_t j = fixed; j < fields.size(); ++j)
      values.push_back(parse_f32(fields[j], "descriptor value"));

    set.descriptors.push_back(values);
    set.labels.push_back(label);
    set.image_ids.push_back(image_id);
    if (set.locations) set.locations->push_back({x, y});
    max_label = std::max(max_label, label);
  }
  if (set.size() == 0) throw std::runtime_error(path + ": no records");
  set.class_count = max_label + 1;
  set.class_names = default_class_names(set.class_count);
  set.validate();
  return set;
}

void save_csv(const std::string& path, const LabeledDescriptorSet& set) {
  set.validate();
  std::ofstream os(path);
  if (!os) throw std::runtime_error(path + ": cannot open file for writing");
  for (std::size_t i = 0; i < set.size(); ++i) {
    os << set.labels[i] << ',' << set.image_ids[i];
    if (set.locations)
      os << ',' << format_float((*set.locations)[i][0]) << ','
         << format_float((*set.locations)[i][1]);
    for (float v : set.descriptors[i]) os << ',' << format_float(v);
    os << '\n';
  }
  if (!os) throw std::runtime_error(path + ": write failed");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  if (spec.class_count == 0 || spec.train_images_per_class == 0 ||
      spec.query_images_per_class == 0 || spec.descriptors_per_image == 0 ||
      spec.dimension == 0)
    throw std::invalid_argument("generate_synthetic: all counts must be >= 1");
  if (!(spec.class_mean_separation > 0.0) || !(spec.within_class_stddev > 0.0))
    throw std::invalid_argument(
        "generate_synthetic: separation and stddev must be > 0");

  Rng rng = make_rng(spec.rng_seed);
  NormalSampler normal;

  // Class means: distinct cells of an integer lattice scaled by the
  // separation, drawn at random from a grid with at least twice as many
  // cells as classes. Distinct cells differ by >= separation.
  const std::size_t lattice_dims = std::min<std::size_t>(spec.dimension, 16);
  auto lattice_cells = [&](std::uint64_t b) {
    std::uint64_t total = 1;
    for (std::size_t j = 0; j < lattice_dims; ++j) {
      if (total > std::numeric_limits<std::uint64_t>::max() / b)
        return std::numeric_limits<std::uint64_t>::max();
      total *= b;
    }
    return total;
  };
  std::uint64_t side = 2;
  while (lattice_cells(side) < std::uint64_t{2} * spec.class_count) ++side;

  std::set<std::vector<std::uint32_t>> used;
  std::vector<std::vector<double>> means;
  means.reserve(spec.class_count);
  while (means.size() < spec.class_count) {
    std::vector<std::uint32_t> cell(lattice_dims);
    for (auto& digit : cell)
      digit = static_cast<std::uint32_t>(uniform_below(rng, side));
    if (!used.insert(cell).second) continue;
    std::vector<double> mean(spec.dimension, 0.0);
    for (std::size_t j = 0; j < lattice_dims; ++j)
      mean[j] = static_cast<double>(cell[j]) * spec.class_mean_separation;
    means.push_back(std::move(mean));
  }

  SyntheticData data;
  data.train.class_count = spec.class_count;
  data.train.class_names = default_class_names(spec.class_count);
  data.train.descriptors = DescriptorArray(spec.dimension);
  data.train.descriptors.reserve(std::size_t{spec.class_count} *
                                 spec.train_images_per_class *
                                 spec.descriptors_per_image);

  std::vector<float> values(spec.dimension);
  auto draw_descriptor = [&](const std::vector<double>& mean) {
    for (std::uint32_t j = 0; j < spec.dimension; ++j)
      values[j] = static_cast<float>(mean[j] +
                                     spec.within_class_stddev * normal.next(rng));
  };

  std::uint32_t next_image_id = 0;
  for (std::uint32_t c = 0; c < spec.class_count; ++c) {
    for (std::uint32_t img = 0; img < spec.train_images_per_class; ++img) {
      const std::uint32_t image_id = next_image_id++;
      for (std::uint32_t d = 0; d < spec.descriptors_per_image; ++d) {
        draw_descriptor(means[c]);
        data.train.descriptors.push_back(values);
        data.train.labels.push_back(c);
        data.train.image_ids.push_back(image_id);
      }
    }
  }
  for (std::uint32_t c = 0; c < spec.class_count; ++c) {
    for (std::uint32_t img = 0; img < spec.query_images_per_class; ++img) {
      QueryImage query;
      query.image_id = next_image_id++;
      query.true_label = c;
      query.descriptors = DescriptorArray(spec.dimension);
      for (std::uint32_t d = 0; d < spec.descriptors_per_image; ++d) {
        draw_descriptor(means[c]);
        query.descriptors.push_back(values);
      }
      data.queries.push_back(std::move(query));
    }
  }
  data.train.validate();
  return data;
}

std::vector<QueryImage> to_query_images(const LabeledDescriptorSet& set) {
  set.validate();
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < set.size(); ++i)
    groups[{set.labels[i], set.image_ids[i]}].push_back(i);

  std::vector<QueryImage> queries;
  queries.reserve(groups.size());
  for (const auto& [key, rows] : groups) {
    QueryImage query;
    query.true_label = key.first;
    query.image_id = key.second;
    query.descriptors = DescriptorArray(set.dimension());
    for (std::size_t row : rows) query.descriptors.push_back(set.descriptors[row]);
    queries.push_back(std::move(query));
  }
  return queries;
}

LabeledDescriptorSet from_query_images(std::span<const QueryImage> queries,
                                       const LabeledDescriptorSet& like) {
  LabeledDescriptorSet set;
  set.class_count = like.class_count;
  set.class_names = like.class_names;
  set.descriptors = DescriptorArray(like.dimension());
  for (const QueryImage& query : queries) {
    if (!query.true_label)
      throw std::invalid_argument("from_query_images: query image lacks a true label");
    for (std::size_t i = 0; i < query.descriptors.size(); ++i) {
      set.descriptors.push_back(query.descriptors[i]);
      set.labels.push_back(*query.true_label);
      set.image_ids.push_back(query.image_id);
    }
  }
  set.validate();
  return set;
}

SplitResult split_by_image(const LabeledDescriptorSet& set,
                           std::uint32_t train_images_per_class,
                           std::uint64_t rng_seed) {
  set.validate();
  if (train_images_per_class == 0)
    throw std::invalid_argument("split_by_image: train_images_per_class must be >= 1");

  std::vector<std::set<std::uint32_t>> images_by_class(set.class_count);
  for (std::size_t i = 0; i < set.size(); ++i)
    images_by_class[set.labels[i]].insert(set.image_ids[i]);

  Rng rng = make_rng(rng_seed);
  std::unordered_set<std::uint64_t> train_keys;
  for (std::uint32_t c = 0; c < set.class_count; ++c) {
    const auto& images = images_by_class[c];
    if (images.size() <= train_images_per_class)
      throw std::invalid_argument(
          "split_by_image: class " + std::to_string(c) + " (" +
          set.class_names[c] + ") has " + std::to_string(images.size()) +
          " images; need more than " + std::to_string(train_images_per_class));
    std::vector<std::uint32_t> shuffled(images.begin(), images.end());
    portable_shuffle(shuffled, rng);
    for (std::uint32_t i = 0; i < train_images_per_class; ++i)
      train_keys.insert((std::uint64_t{c} << 32) | shuffled[i]);
  }

  SplitResult result;
  result.train.class_count = set.class_count;
  result.train.class_names = set.class_names;
  result.train.descriptors = DescriptorArray(set.dimension());
  if (set.locations) result.train.locations.emplace();
  LabeledDescriptorSet rest;
  rest.class_count = set.class_count;
  rest.class_names = set.class_names;
  rest.descriptors = DescriptorArray(set.dimension());

  for (std::size_t i = 0; i < set.size(); ++i) {
    const std::uint64_t key =
        (std::uint64_t{set.labels[i]} << 32) | set.image_ids[i];
    LabeledDescriptorSet& side = train_keys.count(key) ? result.train : rest;
    side.descriptors.push_back(set.descriptors[i]);
    side.labels.push_back(set.labels[i]);
    side.image_ids.push_back(set.image_ids[i]);
    if (side.locations) side.locations->push_back((*set.locations)[i]);
  }
  result.queries = to_query_images(rest);
  result.train.validate();
  return result;
}

}  // namespace lnbnn
