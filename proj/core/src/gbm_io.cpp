// EYDS model container.
//
//   offset  type      field
//   0       char[4]   magic "EYDS"
//   4       u16       format version
//   6       u32       total file size in bytes
//   10      u16       n_features
//   12      u16       max_depth
//   14      u32       n_estimators
//   18      f64       learning_rate
//   26      f64       base_score
//   34      f64       threshold
//   42      u32       tree count
//   46      trees     per tree: u16 node count, then nodes in preorder as
//                     u8 feature (0xFF marks a leaf) + f64 threshold or leaf value
//   end-4   u32       CRC-32 (zlib polynomial) of every preceding byte
//
// All integers and IEEE-754 doubles are little-endian.

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "eyedas/error.hpp"
#include "eyedas/gbm.hpp"

namespace eyedas::gbm {
namespace {

constexpr char kMagic[4] = {'E', 'Y', 'D', 'S'};
constexpr std::uint8_t kLeafTag = 0xFF;
constexpr std::size_t kHeaderSize = 46;
constexpr std::size_t kChecksumSize = 4;

using Kind = ModelFormatError::Kind;

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    out_.insert(out_.end(), p, p + n);
  }
  template <typename T>
  void uint(T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
  void f64(double value) { uint(std::bit_cast<std::uint64_t>(value)); }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  template <typename T>
  T uint() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(static_cast<T>(data_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return value;
  }
  double f64() { return std::bit_cast<double>(uint<std::uint64_t>()); }
  std::size_t position() const noexcept { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw ModelFormatError(Kind::kTruncated, "model file: unexpected end of tree data");
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

void write_preorder(Writer& w, const std::vector<TreeNode>& nodes, int id) {
  const TreeNode& n = nodes[static_cast<std::size_t>(id)];
  if (n.is_leaf()) {
    w.uint<std::uint8_t>(kLeafTag);
    w.f64(n.value);
    return;
  }
  w.uint<std::uint8_t>(static_cast<std::uint8_t>(n.feature));
  w.f64(n.threshold);
  write_preorder(w, nodes, n.left);
  write_preorder(w, nodes, n.right);
}

std::size_t count_reachable(const std::vector<TreeNode>& nodes, int id) {
  const TreeNode& n = nodes[static_cast<std::size_t>(id)];
  return n.is_leaf() ? 1 : 1 + count_reachable(nodes, n.left) + count_reachable(nodes, n.right);
}

int read_preorder(Reader& r, std::vector<TreeNode>& nodes, std::size_t budget, int n_features,
                  int depth, int max_depth) {
  if (nodes.size() >= budget) throw ModelFormatError(Kind::kMalformed, "model file: tree exceeds its node count");
  if (depth > max_depth) throw ModelFormatError(Kind::kMalformed, "model file: tree deeper than max_depth");
  const auto tag = r.uint<std::uint8_t>();
  const double payload = r.f64();
  const int id = static_cast<int>(nodes.size());
  nodes.push_back(TreeNode{});
  if (tag == kLeafTag) {
    nodes[static_cast<std::size_t>(id)].value = payload;
    return id;
  }
  if (tag >= n_features) throw ModelFormatError(Kind::kMalformed, "model file: split feature out of range");
  nodes[static_cast<std::size_t>(id)].feature = tag;
  nodes[static_cast<std::size_t>(id)].threshold = payload;
  const int left = read_preorder(r, nodes, budget, n_features, depth + 1, max_depth);
  const int right = read_preorder(r, nodes, budget, n_features, depth + 1, max_depth);
  nodes[static_cast<std::size_t>(id)].left = left;
  nodes[static_cast<std::size_t>(id)].right = right;
  return id;
}

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace

std::vector<std::uint8_t> save(const GbmModel& model) {
  if (model.n_features < 1 || model.n_features >= kLeafTag) {
    throw InvalidArgument("save: n_features out of range");
  }
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.uint<std::uint16_t>(kModelFormatVersion);
  w.uint<std::uint32_t>(0);  // total size, patched below
  w.uint<std::uint16_t>(static_cast<std::uint16_t>(model.n_features));
  w.uint<std::uint16_t>(static_cast<std::uint16_t>(model.max_depth));
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(model.n_estimators));
  w.f64(model.learning_rate);
  w.f64(model.base_score);
  w.f64(model.threshold);
  w.uint<std::uint32_t>(static_cast<std::uint32_t>(model.trees.size()));
  for (const RegressionTree& tree : model.trees) {
    const auto& nodes = tree.nodes();
    if (nodes.empty()) {
      w.uint<std::uint16_t>(1);
      w.uint<std::uint8_t>(kLeafTag);
      w.f64(0.0);
      continue;
    }
    w.uint<std::uint16_t>(static_cast<std::uint16_t>(count_reachable(nodes, 0)));
    write_preorder(w, nodes, 0);
  }
  auto& out = w.buffer();
  const auto total = static_cast<std::uint32_t>(out.size() + kChecksumSize);
  for (std::size_t i = 0; i < 4; ++i) out[6 + i] = static_cast<std::uint8_t>(total >> (8 * i));
  w.uint<std::uint32_t>(crc_of(out));
  return std::move(out);
}

GbmModel load(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 10) throw ModelFormatError(Kind::kTruncated, "model file: truncated header");
  if (std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw ModelFormatError(Kind::kBadMagic, "model file: bad magic (expected EYDS)");
  }
  Reader header(bytes.subspan(4, 6));
  const auto version = header.uint<std::uint16_t>();
  if (version != kModelFormatVersion) {
    throw ModelFormatError(Kind::kVersionMismatch, "model file: format version " + std::to_string(version) +
                                                       " is not supported (expected " +
                                                       std::to_string(kModelFormatVersion) + ")");
  }
  const auto declared = header.uint<std::uint32_t>();
  if (bytes.size() < declared || bytes.size() < kHeaderSize + kChecksumSize) {
    throw ModelFormatError(Kind::kTruncated, "model file: truncated payload (" + std::to_string(bytes.size()) +
                                                 " of " + std::to_string(declared) + " bytes)");
  }
  if (bytes.size() > declared) {
    throw ModelFormatError(Kind::kMalformed, "model file: trailing bytes after checksum");
  }
  const auto body = bytes.first(bytes.size() - kChecksumSize);
  Reader tail(bytes.last(kChecksumSize));
  if (tail.uint<std::uint32_t>() != crc_of(body)) {
    throw ModelFormatError(Kind::kChecksum, "model file: checksum mismatch");
  }

  Reader r(body);
  r.uint<std::uint32_t>();  // magic
  r.uint<std::uint16_t>();  // version
  r.uint<std::uint32_t>();  // size
  GbmModel model;
  model.n_features = r.uint<std::uint16_t>();
  model.max_depth = r.uint<std::uint16_t>();
  model.n_estimators = static_cast<int>(r.uint<std::uint32_t>());
  model.learning_rate = r.f64();
  model.base_score = r.f64();
  model.threshold = r.f64();
  const auto tree_count = r.uint<std::uint32_t>();
  if (model.n_features < 1 || model.n_features >= kLeafTag) {
    throw ModelFormatError(Kind::kMalformed, "model file: n_features out of range");
  }
  if (tree_count != static_cast<std::uint32_t>(model.n_estimators)) {
    throw ModelFormatError(Kind::kMalformed, "model file: tree count differs from n_estimators");
  }
  model.trees.reserve(tree_count);
  for (std::uint32_t t = 0; t < tree_count; ++t) {
    const auto node_count = r.uint<std::uint16_t>();
    std::vector<TreeNode> nodes;
    nodes.reserve(node_count);
    read_preorder(r, nodes, node_count, model.n_features, 0, model.max_depth);
    if (nodes.size() != node_count) throw ModelFormatError(Kind::kMalformed, "model file: node count mismatch");
    model.trees.emplace_back(std::move(nodes));
  }
  if (r.position() != body.size()) throw ModelFormatError(Kind::kMalformed, "model file: unparsed bytes");
  return model;
}

void save_file(const GbmModel& model, const std::filesystem::path& path) {
  const auto bytes = save(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

GbmModel load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load(bytes);
}

}  // namespace eyedas::gbm
