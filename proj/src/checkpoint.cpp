#include "kbdial/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace kbdial {

namespace {

constexpr char kMagic[8] = {'K', 'B', 'D', 'I', 'A', 'L', 'C', 'K'};

template <typename U>
void put_le(std::ostream& out, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

template <typename U>
U get_le(std::istream& in, const std::string& what) {
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U)))
    throw std::runtime_error("checkpoint truncated while reading " + what);
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
  return v;
}

std::string get_bytes(std::istream& in, std::size_t n, const std::string& what) {
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n)))
    throw std::runtime_error("checkpoint truncated while reading " + what);
  return s;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kCheckpointVersion);
  const std::string manifest = ckpt.manifest.dump();
  put_le<std::uint64_t>(out, manifest.size());
  out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  put_le<std::uint64_t>(out, ckpt.records.size());
  for (const auto& [name, t] : ckpt.records) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_le<std::uint64_t>(out, d);
    for (double v : t.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw std::runtime_error("error writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw std::runtime_error(path.string() + " is not a checkpoint file");
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  const auto mlen = get_le<std::uint64_t>(in, "manifest length");
  ckpt.manifest = nlohmann::json::parse(get_bytes(in, mlen, "manifest"));
  const auto count = get_le<std::uint64_t>(in, "record count");
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto nlen = get_le<std::uint32_t>(in, "record name length");
    std::string name = get_bytes(in, nlen, "record name");
    const auto rank = get_le<std::uint32_t>(in, name + " rank");
    Shape shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(get_le<std::uint64_t>(in, name + " shape"));
    Tensor t(shape);
    for (auto& v : t.values()) v = std::bit_cast<double>(get_le<std::uint64_t>(in, name + " payload"));
    ckpt.records.emplace_back(std::move(name), std::move(t));
  }
  return ckpt;
}

Checkpoint snapshot(const ParameterSet& params, nlohmann::json manifest) {
  Checkpoint ckpt;
  ckpt.manifest = std::move(manifest);
  for (std::size_t i = 0; i < params.size(); ++i)
    ckpt.records.emplace_back(params[i].name, params[i].value);
  return ckpt;
}

void restore(const Checkpoint& ckpt, ParameterSet& params) {
  if (ckpt.records.size() != params.size())
    throw std::runtime_error("checkpoint holds " + std::to_string(ckpt.records.size()) +
                             " arrays, model expects " + std::to_string(params.size()));
  for (const auto& [name, t] : ckpt.records) {
    Parameter* p = params.find(name);
    if (!p) throw std::runtime_error("checkpoint array " + name + " unknown to the model");
    if (p->value.shape() != t.shape())
      throw std::runtime_error("checkpoint array " + name + " has shape " + shape_string(t.shape()) +
                               ", model expects " + shape_string(p->value.shape()));
    p->value = t;
  }
}

}  // namespace kbdial
