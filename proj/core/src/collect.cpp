#include "crpt/collect.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include "crpt/error.hpp"
#include "crpt/rng.hpp"

namespace crpt::collect {

bool DomainBuffer::is_episode_start(std::size_t i) const {
  return std::binary_search(episode_starts.begin(), episode_starts.end(),
                            static_cast<std::uint64_t>(i));
}

std::size_t DomainBuffer::episode_start_of(std::size_t i) const {
  auto it = std::upper_bound(episode_starts.begin(), episode_starts.end(),
                             static_cast<std::uint64_t>(i));
  if (it == episode_starts.begin()) return 0;
  return static_cast<std::size_t>(*std::prev(it));
}

std::vector<std::size_t> DomainBuffer::valid_pair_indices() const {
  std::vector<std::size_t> out;
  const std::size_t n = count();
  if (n < 2) return out;
  out.reserve(n - 1);
  for (std::size_t t = 0; t + 1 < n; ++t)
    if (!is_episode_start(t + 1)) out.push_back(t);
  return out;
}

bool DomainBuffer::same_content(const DomainBuffer& o) const {
  return domain == o.domain && frame_h == o.frame_h && frame_w == o.frame_w &&
         frame_c == o.frame_c && frames == o.frames && episode_starts == o.episode_starts;
}

DomainBuffer collect_random(const std::string& domain, const envs::EnvOptions& options,
                            std::uint64_t steps, std::uint64_t capacity, std::uint64_t seed) {
  if (steps > capacity)
    raise(Errc::CapacityExceeded,
          std::to_string(steps) + " steps exceed buffer capacity " + std::to_string(capacity));
  auto env = envs::make_env(domain, options);

  DomainBuffer buf;
  buf.domain = domain;
  buf.capacity = capacity;
  buf.frame_h = options.render_size;
  buf.frame_w = options.render_size;
  buf.frame_c = options.channels;
  buf.collect_seed = seed;
  buf.frames.reserve(static_cast<std::size_t>(steps) * buf.frame_bytes());

  Rng action_rng(derive_seed(seed, "actions"));
  std::uint64_t episode = 0;
  bool need_reset = true;
  for (std::uint64_t step = 0; step < steps; ++step) {
    if (need_reset) {
      env->reset(derive_seed(seed, "episode", episode++));
      buf.episode_starts.push_back(buf.count());
      need_reset = false;
    }
    std::vector<double> action(env->spec().action_dim);
    for (double& a : action) a = action_rng.uniform(-1.0, 1.0);
    envs::Transition tr = env->step(action);
    const envs::Frame& f = tr.next_state.frames.back();
    buf.frames.insert(buf.frames.end(), f.px.begin(), f.px.end());
    buf.states.push_back(env->ground_truth_state());
    need_reset = tr.terminal;
  }
  return buf;
}

nd::Tensor stack_at(const DomainBuffer& buffer, std::size_t i, std::size_t stack_k) {
  if (i >= buffer.count()) raise(Errc::InsufficientData, "frame index out of range");
  const std::size_t start = buffer.episode_start_of(i);
  nd::Tensor out({stack_k * buffer.frame_c, buffer.frame_h, buffer.frame_w});
  double* dst = out.data.data();
  const std::size_t hw = static_cast<std::size_t>(buffer.frame_h) * buffer.frame_w;
  for (std::size_t k = 0; k < stack_k; ++k) {
    // Oldest first; history clamps at the episode start.
    const std::size_t back = stack_k - 1 - k;
    const std::size_t idx = (i >= start + back) ? i - back : start;
    const std::uint8_t* src = buffer.frame(idx);
    for (std::uint32_t c = 0; c < buffer.frame_c; ++c)
      for (std::size_t p = 0; p < hw; ++p) dst[(k * buffer.frame_c + c) * hw + p] =
          src[p * buffer.frame_c + c] / 255.0;
  }
  return out;
}

PairBatch sample_pairs(const DomainBuffer& buffer, std::size_t count, std::size_t stack_k,
                       std::uint64_t seed) {
  const std::vector<std::size_t> valid = buffer.valid_pair_indices();
  if (valid.empty())
    raise(Errc::InsufficientData, "buffer holds no valid temporal pair");
  Rng rng(seed);
  PairBatch out;
  out.indices.reserve(count);
  const std::size_t chw =
      stack_k * buffer.frame_c * static_cast<std::size_t>(buffer.frame_h) * buffer.frame_w;
  out.current = nd::Tensor({count, stack_k * buffer.frame_c, buffer.frame_h, buffer.frame_w});
  out.next = nd::Tensor(out.current.shape);
  for (std::size_t m = 0; m < count; ++m) {
    const std::size_t t = valid[rng.uniform_index(valid.size())];
    out.indices.push_back(t);
    nd::Tensor cur = stack_at(buffer, t, stack_k);
    nd::Tensor nxt = stack_at(buffer, t + 1, stack_k);
    std::copy(cur.data.begin(), cur.data.end(), out.current.data.begin() + m * chw);
    std::copy(nxt.data.begin(), nxt.data.end(), out.next.data.begin() + m * chw);
  }
  return out;
}

namespace {
void put_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

struct Cursor {
  const unsigned char* p;
  std::size_t left;
  void take(void* dst, std::size_t n) {
    if (left < n) raise(Errc::BadMagic, "truncated buffer file");
    std::memcpy(dst, p, n);
    p += n;
    left -= n;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    take(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    take(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
};
}  // namespace

void save_buffer(const DomainBuffer& buffer, const std::string& path) {
  std::string blob;
  blob.reserve(64 + buffer.frames.size());
  blob.append(kBufferMagic, sizeof(kBufferMagic));
  put_u32(blob, kBufferVersion);
  put_u32(blob, static_cast<std::uint32_t>(buffer.domain.size()));
  blob.append(buffer.domain);
  put_u32(blob, buffer.frame_h);
  put_u32(blob, buffer.frame_w);
  put_u32(blob, buffer.frame_c);
  put_u64(blob, buffer.count());
  put_u64(blob, buffer.episode_starts.size());
  for (std::uint64_t b : buffer.episode_starts) put_u64(blob, b);
  blob.append(reinterpret_cast<const char*>(buffer.frames.data()), buffer.frames.size());

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) raise(Errc::IoError, "cannot open '" + path + "' for writing");
  os.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!os) raise(Errc::IoError, "write failure on '" + path + "'");
}

DomainBuffer load_buffer(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(Errc::IoError, "cannot open '" + path + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  Cursor c{reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()};

  char magic[sizeof(kBufferMagic)];
  c.take(magic, sizeof(magic));
  if (std::memcmp(magic, kBufferMagic, sizeof(magic)) != 0)
    raise(Errc::BadMagic, "'" + path + "' is not a buffer file");
  const std::uint32_t version = c.u32();
  if (version != kBufferVersion)
    raise(Errc::VersionMismatch, "buffer version " + std::to_string(version));

  DomainBuffer buf;
  const std::uint32_t name_len = c.u32();
  buf.domain.resize(name_len);
  c.take(buf.domain.data(), name_len);
  buf.frame_h = c.u32();
  buf.frame_w = c.u32();
  buf.frame_c = c.u32();
  const std::uint64_t count = c.u64();
  const std::uint64_t n_eps = c.u64();
  buf.episode_starts.resize(n_eps);
  for (std::uint64_t i = 0; i < n_eps; ++i) buf.episode_starts[i] = c.u64();
  const std::size_t payload = static_cast<std::size_t>(count) * buf.frame_bytes();
  buf.frames.resize(payload);
  c.take(buf.frames.data(), payload);
  if (c.left != 0) raise(Errc::BadMagic, "trailing bytes in buffer file");
  buf.capacity = count;
  return buf;
}

}  // namespace crpt::collect
