#include "klrf/io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

namespace klrf::io {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'K', 'L', 'R', 'F', 'M', 'D', 'L', '1'};
constexpr std::size_t kHeaderSize = 8 + 4 + 8 + 4;

class Writer
{
  public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u32(std::uint32_t v)
    {
      for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v)
    {
      for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(std::string const & s)
    {
      u64(s.size());
      out_.insert(out_.end(), s.begin(), s.end());
    }
    void f64s(std::span<const double> v)
    {
      u64(v.size());
      for (double x : v) f64(x);
    }

    std::vector<std::uint8_t> take() { return std::move(out_); }

  private:
    std::vector<std::uint8_t> out_;
};

class Reader
{
  public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    std::uint8_t u8() { return need(1)[0]; }
    std::uint32_t u32()
    {
      auto b = need(4);
      std::uint32_t v = 0;
      for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[i]} << (8 * i);
      return v;
    }
    std::uint64_t u64()
    {
      auto b = need(8);
      std::uint64_t v = 0;
      for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
      return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::size_t count(std::size_t element_size)
    {
      std::uint64_t n = u64();
      if (element_size > 0 && n > remaining() / element_size) throw ModelFormatError("model file: corrupt length field");
      return static_cast<std::size_t>(n);
    }
    std::string str()
    {
      std::size_t n = count(1);
      auto b = need(n);
      return {reinterpret_cast<char const *>(b.data()), n};
    }
    std::vector<double> f64s()
    {
      std::vector<double> v(count(8));
      for (double & x : v) x = f64();
      return v;
    }
    std::size_t remaining() const { return in_.size() - pos_; }

  private:
    std::span<const std::uint8_t> need(std::size_t n)
    {
      if (n > remaining()) throw ModelFormatError("model file: truncated payload");
      auto s = in_.subspan(pos_, n);
      pos_ += n;
      return s;
    }

    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

std::uint32_t crc(std::span<const std::uint8_t> bytes)
{
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large payloads
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::size_t const n = std::min<std::size_t>(bytes.size() - pos, 1U << 30);
    c = crc32(c, bytes.data() + pos, static_cast<uInt>(n));
    pos += n;
  }
  return static_cast<std::uint32_t>(c);
}

void write_forest(Writer & w, forest::Forest const & f)
{
  w.u8(static_cast<std::uint8_t>(f.source));
  w.u64(f.feature_dim);
  w.str(config_to_json(f.config));
  w.u64(f.labels.size());
  for (auto const & n : f.labels.names()) w.str(n);

  w.u64(f.trees.size());
  for (auto const & tree : f.trees) {
    w.u64(tree.nodes.size());
    for (auto const & node : tree.nodes) {
      w.u8(node.is_leaf ? 1 : 0);
      w.u32(node.split.gamma);
      w.f64(node.split.tau);
      w.u8(static_cast<std::uint8_t>(node.choice));
      w.i32(node.left);
      w.i32(node.right);
      w.i32(node.leaf);
    }
    w.u64(tree.leaves.size());
    for (auto const & leaf : tree.leaves) {
      w.f64s(leaf.class_hist.probs());
      w.u64(leaf.members.size());
      for (auto m : leaf.members) w.u32(m);
    }
  }

  w.u64(f.in_bag.size());
  for (auto const & bits : f.in_bag) {
    w.u64(bits.size());
    w.u64(bits.words().size());
    for (auto word : bits.words()) w.u64(word);
  }

  w.u64(f.kinematic_table.rows());
  w.u64(f.kinematic_table.cols());
  for (double v : f.kinematic_table.values()) w.f64(v);
}

forest::Forest read_forest(Reader & r)
{
  forest::Forest f;
  std::uint8_t const source = r.u8();
  if (source > 1) throw ModelFormatError("model file: unknown feature source");
  f.source = static_cast<forest::FeatureSource>(source);
  f.feature_dim = r.u64();
  f.config = config_from_json(r.str());
  std::vector<std::string> names(r.count(8));
  for (auto & n : names) n = r.str();
  f.labels = LabelMap(std::move(names));

  f.trees.resize(r.count(8));
  for (auto & tree : f.trees) {
    tree.nodes.resize(r.count(26));
    for (auto & node : tree.nodes) {
      node.is_leaf = r.u8() != 0;
      node.split.gamma = r.u32();
      node.split.tau = r.f64();
      std::uint8_t const choice = r.u8();
      if (choice > 3) throw ModelFormatError("model file: unknown quality choice");
      node.choice = static_cast<forest::QualityChoice>(choice);
      node.left = r.i32();
      node.right = r.i32();
      node.leaf = r.i32();
    }
    tree.leaves.resize(r.count(16));
    for (auto & leaf : tree.leaves) {
      try {
        leaf.class_hist = ClassDistribution(r.f64s());
      } catch (InvariantError const & e) {
        throw ModelFormatError(std::string("model file: bad leaf distribution: ") + e.what());
      }
      leaf.members.resize(r.count(4));
      for (auto & m : leaf.members) m = r.u32();
    }
    // structural checks so routing can never index out of range
    std::int32_t const n_nodes = static_cast<std::int32_t>(tree.nodes.size());
    std::int32_t const n_leaves = static_cast<std::int32_t>(tree.leaves.size());
    if (n_nodes == 0) throw ModelFormatError("model file: empty tree");
    for (std::int32_t i = 0; i < n_nodes; ++i) {
      auto const & node = tree.nodes[i];
      bool const ok = node.is_leaf ? (node.leaf >= 0 && node.leaf < n_leaves)
                                   : (node.left > i && node.left < n_nodes && node.right > i &&
                                      node.right < n_nodes && node.split.gamma < f.feature_dim);
      if (!ok) throw ModelFormatError("model file: inconsistent tree structure");
    }
  }

  f.in_bag.resize(r.count(16));
  for (auto & bits : f.in_bag) {
    std::size_t const size = r.u64();
    std::vector<std::uint64_t> words(r.count(8));
    for (auto & word : words) word = r.u64();
    if (words.size() != (size + 63) / 64) throw ModelFormatError("model file: bitmap length mismatch");
    bits = forest::Bitmap::from_words(size, std::move(words));
  }

  std::size_t const rows = r.u64();
  std::size_t const cols = r.u64();
  if (cols != 0 && rows > r.remaining() / 8 / cols) throw ModelFormatError("model file: corrupt kinematic table");
  std::vector<double> values(rows * cols);
  for (double & v : values) v = r.f64();
  f.kinematic_table = Matrix(rows, cols, std::move(values));
  return f;
}

} // namespace

std::uint32_t model_checksum(std::span<const std::uint8_t> image)
{
  if (image.size() < kHeaderSize) throw ModelFormatError("model file: too short");
  return crc(image.subspan(kHeaderSize));
}

std::vector<std::uint8_t> serialize_model(learning::TrainedModel const & model, bool include_references)
{
  Writer w;
  w.str(model.mode);
  write_forest(w, model.forest);
  bool const refs = include_references && model.references.has_value();
  w.u8(refs ? 1 : 0);
  if (refs) {
    write_forest(w, model.references->appearance);
    write_forest(w, model.references->kinematic);
  }
  w.u64(model.training_labels.size());
  for (int l : model.training_labels) w.i32(l);
  w.f64s(model.usefulness);
  std::vector<std::uint8_t> payload = w.take();

  Writer h;
  for (char c : kMagic) h.u8(static_cast<std::uint8_t>(c));
  h.u32(kModelVersion);
  h.u64(payload.size());
  h.u32(crc(payload));
  std::vector<std::uint8_t> image = h.take();
  image.insert(image.end(), payload.begin(), payload.end());
  return image;
}

learning::TrainedModel deserialize_model(std::span<const std::uint8_t> bytes)
{
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw ModelFormatError("not a KLRF model file (bad magic)");
  if (bytes.size() < kHeaderSize) throw ChecksumError("model file: truncated header");
  Reader h(bytes.subspan(sizeof kMagic, kHeaderSize - sizeof kMagic));
  std::uint32_t const version = h.u32();
  if (version != kModelVersion)
    throw VersionMismatchError("model file version " + std::to_string(version) + ", this build reads version " +
                               std::to_string(kModelVersion));
  std::uint64_t const length = h.u64();
  std::uint32_t const stored = h.u32();
  auto const payload = bytes.subspan(kHeaderSize);
  // a short or padded payload cannot carry the stored checksum
  if (payload.size() != length)
    throw ChecksumError("model file: checksum failure (payload is " + std::to_string(payload.size()) +
                        " bytes, header declares " + std::to_string(length) + ")");
  if (crc(payload) != stored) throw ChecksumError("model file: checksum mismatch");

  Reader r(payload);
  learning::TrainedModel model;
  model.mode = r.str();
  if (model.mode != "klrf" && model.mode != "baseline") throw ModelFormatError("model file: unknown mode");
  model.forest = read_forest(r);
  if (r.u8() != 0) {
    learning::ReferenceForests refs;
    refs.appearance = read_forest(r);
    refs.kinematic = read_forest(r);
    model.references = std::move(refs);
  }
  model.training_labels.resize(r.count(4));
  for (int & l : model.training_labels) l = r.i32();
  model.usefulness = r.f64s();
  if (r.remaining() != 0) throw ModelFormatError("model file: trailing bytes after payload");
  return model;
}

void save_model(learning::TrainedModel const & model, fs::path const & path, bool include_references)
{
  auto const image = serialize_model(model, include_references);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<char const *>(image.data()), static_cast<std::streamsize>(image.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

learning::TrainedModel load_model(fs::path const & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

} // namespace klrf::io
