#include "segadv/model/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "segadv/error.hpp"

namespace segadv {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'S', 'E', 'G', 'A', 'D', 'V', 'C', 'K'};

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    out.insert(out.end(), p, p + sizeof(T));
  }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : buf(b) {}

  template <typename T>
  T get(const std::string& what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
  }
  void bytes(void* dst, std::size_t n, const std::string& what) {
    need(n, what);
    std::memcpy(dst, buf.data() + pos, n);
    pos += n;
  }
  void need(std::size_t n, const std::string& what) const {
    if (buf.size() - pos < n) throw ParseError("checkpoint truncated while reading " + what, pos);
  }
  std::size_t pos = 0;
  const std::vector<std::uint8_t>& buf;
};

}  // namespace

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<std::uint8_t> encode_checkpoint(const SegModel& model, const TrainingMetadata& meta) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kCheckpointVersion);
  const auto& arch = model.architecture();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(arch.in_channels));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(arch.layers.size()));
  for (const auto& l : arch.layers) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(l.out_channels));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(l.kernel));
  }
  for (double m : model.normalization().mean) w.put<float>(static_cast<float>(m));
  for (double s : model.normalization().stddev) w.put<float>(static_cast<float>(s));
  w.put<std::uint32_t>(meta.epochs);
  w.put<float>(meta.final_loss);
  w.put<std::uint64_t>(meta.seed);

  const auto& params = model.parameters();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto name = model.parameter_name(i);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(params[i].rank()));
    for (auto d : params[i].shape()) w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
    w.bytes(params[i].data().data(), params[i].numel() * sizeof(float));
  }
  return std::move(w.out);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  char magic[8];
  r.bytes(magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ParseError("checkpoint: bad magic", 0);
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion)
    throw ParseError("checkpoint: unsupported version " + std::to_string(version), 8);

  Architecture arch;
  arch.in_channels = r.get<std::uint32_t>("architecture");
  const auto layers = r.get<std::uint32_t>("architecture");
  if (layers == 0 || layers > 1024) throw ParseError("checkpoint: implausible layer count", r.pos - 4);
  for (std::uint32_t l = 0; l < layers; ++l) {
    ConvLayerSpec s;
    s.out_channels = r.get<std::uint32_t>("architecture");
    s.kernel = r.get<std::uint32_t>("architecture");
    arch.layers.push_back(s);
  }
  try {
    arch.validate();
  } catch (const Error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), r.pos);
  }

  ChannelStats norm;
  for (auto& m : norm.mean) m = r.get<float>("normalization");
  for (auto& s : norm.stddev) s = r.get<float>("normalization");

  TrainingMetadata meta;
  meta.epochs = r.get<std::uint32_t>("metadata");
  meta.final_loss = r.get<float>("metadata");
  meta.seed = r.get<std::uint64_t>("metadata");

  SegModel model(arch, norm);
  auto& params = model.parameters();
  const auto count = r.get<std::uint32_t>("tensor count");
  if (count != params.size())
    throw ParseError("checkpoint: expected " + std::to_string(params.size()) + " tensors, found " +
                         std::to_string(count),
                     r.pos - 4);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto expected = model.parameter_name(i);
    const std::string what = "tensor " + expected;
    const auto len = r.get<std::uint32_t>(what);
    std::string name(len, '\0');
    r.bytes(name.data(), len, what);
    if (name != expected) throw ParseError("checkpoint: expected tensor " + expected + ", found " + name, r.pos);
    const auto rank = r.get<std::uint32_t>(what);
    Shape shape;
    for (std::uint32_t k = 0; k < rank; ++k) shape.push_back(r.get<std::uint32_t>(what));
    if (shape != params[i].shape())
      throw ParseError("checkpoint: tensor " + name + " has shape " + shape_str(shape) + ", architecture needs " +
                           shape_str(params[i].shape()),
                       r.pos);
    r.bytes(params[i].data().data(), params[i].numel() * sizeof(float), what);
  }
  if (r.pos != bytes.size()) throw ParseError("checkpoint: trailing bytes", r.pos);
  return Checkpoint{std::move(model), meta};
}

void save_checkpoint(const std::filesystem::path& path, const SegModel& model, const TrainingMetadata& meta) {
  const auto bytes = encode_checkpoint(model, meta);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

static std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_bytes(path));
}

std::string checkpoint_hash(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes.data(), bytes.size())));
  return buf;
}

}  // namespace segadv
