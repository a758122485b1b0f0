#include "cwm/data/replay.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "cwm/core/error.hpp"

namespace cwm::data {

void validate(const EpisodeRecord& ep) {
  const index_t l = ep.length();
  if (l < 1) throw_data("episode has no transitions");
  if (index_t(ep.observations.size()) != l + 1) throw_data("episode needs one more observation than rewards");
  if (ep.action_dim < 1 || index_t(ep.actions.size()) != l * ep.action_dim)
    throw_data("episode actions do not match its length");
  if (index_t(ep.intrinsic.size()) != l) throw_data("episode intrinsic rewards do not match its length");
  for (float r : ep.rewards)
    if (!std::isfinite(r)) throw_data("episode contains a non-finite reward");
  for (float r : ep.intrinsic)
    if (!std::isfinite(r)) throw_data("episode contains a non-finite intrinsic reward");
  const index_t side = ep.observations[0].size;
  for (const auto& f : ep.observations)
    if (f.size != side || f.pixels.size() != size_t(3 * side * side)) throw_data("episode frames differ in size");
}

namespace {
constexpr char kMagic[4] = {'C', 'W', 'E', 'P'};
constexpr std::uint8_t kEpisodeVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw_data("truncated episode file");
  return v;
}
void put_floats(std::ofstream& out, const std::vector<float>& v) {
  out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * sizeof(float)));
}
std::vector<float> get_floats(std::ifstream& in, size_t n) {
  std::vector<float> v(n);
  in.read(reinterpret_cast<char*>(v.data()), std::streamsize(n * sizeof(float)));
  if (!in) throw_data("truncated episode file");
  return v;
}
}  // namespace

void save_episode(const EpisodeRecord& ep, const std::filesystem::path& path) {
  validate(ep);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_runtime("cannot open " + path.string() + " for writing");
  out.write(kMagic, 4);
  put<std::uint8_t>(out, kEpisodeVersion);
  put<std::uint32_t>(out, std::uint32_t(ep.observations[0].size));
  put<std::uint32_t>(out, std::uint32_t(ep.length()));
  put<std::uint32_t>(out, std::uint32_t(ep.action_dim));
  for (const auto& f : ep.observations)
    out.write(reinterpret_cast<const char*>(f.pixels.data()), std::streamsize(f.pixels.size()));
  put_floats(out, ep.actions);
  put_floats(out, ep.rewards);
  put_floats(out, ep.intrinsic);
  if (!out) throw_runtime("failed writing " + path.string());
}

EpisodeRecord load_episode(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open episode file " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw_data(path.string() + " is not an episode file");
  const auto version = get<std::uint8_t>(in);
  if (version != kEpisodeVersion)
    throw_data("episode file version " + std::to_string(version) + " is not supported");
  const index_t side = get<std::uint32_t>(in), len = get<std::uint32_t>(in), adim = get<std::uint32_t>(in);
  EpisodeRecord ep;
  ep.action_dim = adim;
  for (index_t i = 0; i <= len; ++i) {
    vision::Frame f(side);
    in.read(reinterpret_cast<char*>(f.pixels.data()), std::streamsize(f.pixels.size()));
    if (!in) throw_data("truncated episode file");
    ep.observations.push_back(std::move(f));
  }
  ep.actions = get_floats(in, size_t(len * adim));
  ep.rewards = get_floats(in, size_t(len));
  ep.intrinsic = get_floats(in, size_t(len));
  validate(ep);
  return ep;
}

void ReplayBuffer::add(EpisodeRecord ep) {
  validate(ep);
  if (!episodes_.empty() && (ep.action_dim != episodes_.front().action_dim ||
                             ep.observations[0].size != episodes_.front().observations[0].size))
    throw_data("episode does not match the replay buffer's action or frame size");
  transitions_ += size_t(ep.length());
  episodes_.push_back(std::move(ep));
  while (transitions_ > capacity_ && episodes_.size() > 1) {
    transitions_ -= size_t(episodes_.front().length());
    episodes_.pop_front();
  }
}

SegmentBatch ReplayBuffer::sample(index_t batch, index_t length, Rng& rng, std::vector<ReplayOrigin>* origins) const {
  if (batch < 1 || length < 1) throw_data("replay sample needs B >= 1 and T >= 1");
  std::vector<std::uint64_t> cum;
  std::uint64_t acc = 0;
  for (const auto& ep : episodes_) {
    const index_t frames = ep.length() + 1;
    if (frames >= length) acc += std::uint64_t(frames - length + 1);
    cum.push_back(acc);
  }
  if (acc == 0) throw_data("replay buffer has no episode with " + std::to_string(length) + " observations");

  const index_t side = episodes_.front().observations[0].size;
  const index_t adim = episodes_.front().action_dim;
  const size_t per = size_t(3 * side * side);
  SegmentBatch out;
  out.obs = Tensor(Shape{batch, length, 3, side, side});
  out.actions = Tensor(Shape{batch, length, adim});
  out.rewards = Tensor(Shape{batch, length});
  out.intrinsic = Tensor(Shape{batch, length});
  if (origins) origins->clear();
  for (index_t b = 0; b < batch; ++b) {
    const std::uint64_t pick = rng.uniform_int(acc);
    const size_t ei = size_t(std::upper_bound(cum.begin(), cum.end(), pick) - cum.begin());
    const index_t offset = index_t(pick - (ei ? cum[ei - 1] : 0));
    const EpisodeRecord& ep = episodes_[ei];
    for (index_t t = 0; t < length; ++t) {
      const index_t i = offset + t;
      vision::preprocess_into(ep.observations[size_t(i)], out.obs.values().subspan(size_t(b * length + t) * per, per));
      if (i > 0) {
        for (index_t a = 0; a < adim; ++a) out.actions[(b * length + t) * adim + a] = ep.actions[size_t((i - 1) * adim + a)];
        out.rewards[b * length + t] = ep.rewards[size_t(i - 1)];
        out.intrinsic[b * length + t] = ep.intrinsic[size_t(i - 1)];
      }
    }
    if (origins) origins->push_back({index_t(ei), offset});
  }
  return out;
}

}  // namespace cwm::data
