#include "crpt/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "crpt/error.hpp"

namespace crpt::nd {

namespace {
void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

void put_f32(std::ostream& os, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) raise(Errc::BadMagic, "truncated checkpoint");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) raise(Errc::BadMagic, "truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
}  // namespace

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, Tensor>>& entries, bool as_f32) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) raise(Errc::IoError, "cannot open '" + path + "' for writing");
  os.write(kCheckpointMagic, 8);
  put_u32(os, kCheckpointVersion);
  put_u64(os, entries.size());
  for (const auto& [name, t] : entries) {
    t.require_finite("checkpoint entry '" + name + "'");
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, as_f32 ? 1u : 0u);
    put_u32(os, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t e : t.shape) put_u64(os, e);
    if (as_f32)
      for (double v : t.data) put_f32(os, static_cast<float>(v));
    else
      for (double v : t.data) put_f64(os, v);
  }
  if (!os) raise(Errc::IoError, "write failure on '" + path + "'");
}

std::map<std::string, Tensor> load_tensors(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(Errc::IoError, "cannot open '" + path + "' for reading");
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    raise(Errc::BadMagic, "'" + path + "' is not a checkpoint file");
  const std::uint32_t version = get_u32(is);
  if (version != kCheckpointVersion)
    raise(Errc::VersionMismatch, "checkpoint version " + std::to_string(version));
  const std::uint64_t count = get_u64(is);

  std::map<std::string, Tensor> out;
  for (std::uint64_t e = 0; e < count; ++e) {
    const std::uint32_t name_len = get_u32(is);
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) raise(Errc::BadMagic, "truncated checkpoint");
    const std::uint32_t dtype = get_u32(is);
    if (dtype > 1) raise(Errc::VersionMismatch, "unknown dtype " + std::to_string(dtype));
    const std::uint32_t ndim = get_u32(is);
    std::vector<std::size_t> shape(ndim);
    for (std::uint32_t i = 0; i < ndim; ++i) shape[i] = static_cast<std::size_t>(get_u64(is));
    Tensor t(shape);
    if (dtype == 0) {
      for (double& v : t.data) {
        const std::uint64_t bits = get_u64(is);
        std::memcpy(&v, &bits, 8);
      }
    } else {
      for (double& v : t.data) {
        const std::uint32_t bits = get_u32(is);
        float f;
        std::memcpy(&f, &bits, 4);
        v = static_cast<double>(f);
      }
    }
    if (out.count(name)) raise(Errc::BadMagic, "duplicate checkpoint entry '" + name + "'");
    out.emplace(std::move(name), std::move(t));
  }
  return out;
}

}  // namespace crpt::nd
