#include "cwm/harness/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "cwm/core/error.hpp"

namespace cwm::harness {

namespace {

constexpr char kMagic[8] = {'C', 'W', 'M', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  template <class T>
  void pod(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    bytes.insert(bytes.end(), s.begin(), s.end());
  }
  void tensor(const TensorBlob& t) {
    str(t.name);
    pod<std::uint32_t>(std::uint32_t(t.shape.size()));
    for (index_t d : t.shape) pod<std::int64_t>(d);
    pod<std::uint64_t>(t.data.size());
    const auto* p = reinterpret_cast<const std::uint8_t*>(t.data.data());
    bytes.insert(bytes.end(), p, p + t.data.size() * sizeof(double));
  }
  void tensors(const std::vector<TensorBlob>& ts) {
    pod<std::uint32_t>(std::uint32_t(ts.size()));
    for (const auto& t : ts) tensor(t);
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}
  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), size_t(n));
    pos_ += size_t(n);
    return s;
  }
  TensorBlob tensor() {
    TensorBlob t;
    t.name = str();
    const auto rank = pod<std::uint32_t>();
    if (rank > 8) throw_data("corrupt checkpoint: tensor rank " + std::to_string(rank));
    index_t numel = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      t.shape.push_back(pod<std::int64_t>());
      if (t.shape.back() < 0) throw_data("corrupt checkpoint: negative dimension");
      numel *= t.shape.back();
    }
    const auto n = pod<std::uint64_t>();
    if (n != std::uint64_t(numel)) throw_data("corrupt checkpoint: tensor " + t.name + " size mismatch");
    need(n * sizeof(double));
    t.data.resize(size_t(n));
    std::memcpy(t.data.data(), bytes_.data() + pos_, size_t(n) * sizeof(double));
    pos_ += size_t(n) * sizeof(double);
    return t;
  }
  std::vector<TensorBlob> tensors() {
    std::vector<TensorBlob> ts(pod<std::uint32_t>());
    for (auto& t : ts) t = tensor();
    return ts;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) throw_data("checkpoint is truncated");
  }
  const std::vector<std::uint8_t>& bytes_;
  size_t pos_ = 0;
};

TensorBlob blob_of(const std::string& name, const Tensor& t) {
  TensorBlob b{name, t.shape(), {}};
  b.data.assign(t.values().begin(), t.values().end());
  return b;
}

void load_into(const TensorBlob& b, Tensor& t, const std::string& expect, const std::string& group) {
  if (b.name != expect || b.shape != t.shape())
    throw_data("checkpoint group " + group + ": expected " + expect + " " + shape_str(t.shape()) + ", found " +
               b.name + " " + shape_str(b.shape));
  auto dst = t.values();
  for (size_t i = 0; i < b.data.size(); ++i) dst[i] = static_cast<real>(b.data[i]);
}

}  // namespace

std::vector<std::uint8_t> serialize(const Checkpoint& ck) {
  Writer w;
  w.bytes.insert(w.bytes.end(), kMagic, kMagic + 8);
  w.pod<std::uint32_t>(ck.version);
  w.str(ck.kind);
  w.str(ck.config);
  w.pod<std::uint32_t>(std::uint32_t(ck.counters.size()));
  for (const auto& [k, v] : ck.counters) {
    w.str(k);
    w.pod<std::int64_t>(v);
  }
  w.pod<std::uint32_t>(std::uint32_t(ck.rng.size()));
  for (const auto& [k, v] : ck.rng) {
    w.str(k);
    w.str(v);
  }
  w.pod<std::uint32_t>(std::uint32_t(ck.groups.size()));
  for (const auto& [k, v] : ck.groups) {
    w.str(k);
    w.tensors(v);
  }
  w.pod<std::uint32_t>(std::uint32_t(ck.optimizers.size()));
  for (const auto& [k, v] : ck.optimizers) {
    w.str(k);
    w.pod<std::int64_t>(v.steps);
    w.tensors(v.first);
    w.tensors(v.second);
  }
  return std::move(w.bytes);
}

Checkpoint deserialize(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 8) != 0) throw_data("not a checkpoint file");
  std::vector<std::uint8_t> body(bytes.begin() + 8, bytes.end());
  Reader r(body);
  Checkpoint ck;
  ck.version = r.pod<std::uint32_t>();
  if (ck.version != kCheckpointVersion)
    throw_data("checkpoint version " + std::to_string(ck.version) + " is not supported (expected " +
               std::to_string(kCheckpointVersion) + ")");
  ck.kind = r.str();
  ck.config = r.str();
  for (auto n = r.pod<std::uint32_t>(); n > 0; --n) {
    std::string k = r.str();
    ck.counters[k] = r.pod<std::int64_t>();
  }
  for (auto n = r.pod<std::uint32_t>(); n > 0; --n) {
    std::string k = r.str();
    ck.rng[k] = r.str();
  }
  for (auto n = r.pod<std::uint32_t>(); n > 0; --n) {
    std::string k = r.str();
    ck.groups[k] = r.tensors();
  }
  for (auto n = r.pod<std::uint32_t>(); n > 0; --n) {
    std::string k = r.str();
    OptimizerBlob o;
    o.steps = r.pod<std::int64_t>();
    o.first = r.tensors();
    o.second = r.tensors();
    ck.optimizers[k] = std::move(o);
  }
  if (!r.done()) throw_data("trailing bytes after checkpoint");
  return ck;
}

void write_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto bytes = serialize(ck);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
    if (!out) throw_runtime("cannot write checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

std::vector<TensorBlob> export_params(const nn::ParamList& params) {
  std::vector<TensorBlob> out;
  for (const auto& p : params.params()) out.push_back(blob_of(p.name, p.var.value()));
  for (const auto& b : params.buffers()) out.push_back(blob_of(b.name, *b.tensor));
  return out;
}

void import_params(const std::vector<TensorBlob>& blobs, nn::ParamList& params, const std::string& group) {
  const size_t np = params.params().size(), nb = params.buffers().size();
  if (blobs.size() != np + nb)
    throw_data("checkpoint group " + group + " holds " + std::to_string(blobs.size()) + " tensors, model expects " +
               std::to_string(np + nb));
  for (size_t i = 0; i < np; ++i) load_into(blobs[i], params.params()[i].var.value_mut(), params.params()[i].name, group);
  for (size_t i = 0; i < nb; ++i) load_into(blobs[np + i], *params.buffers()[i].tensor, params.buffers()[i].name, group);
}

OptimizerBlob export_optimizer(const Adam& opt) {
  OptimizerBlob o;
  o.steps = opt.steps();
  const auto& ps = opt.params().params();
  for (size_t i = 0; i < opt.first_moments().size(); ++i) {
    o.first.push_back(blob_of(ps[i].name, opt.first_moments()[i]));
    o.second.push_back(blob_of(ps[i].name, opt.second_moments()[i]));
  }
  return o;
}

void import_optimizer(const OptimizerBlob& blob, Adam& opt, const std::string& group) {
  auto& m = opt.first_moments();
  auto& v = opt.second_moments();
  if (blob.first.size() != m.size() || blob.second.size() != v.size())
    throw_data("optimizer state " + group + " does not match the model");
  const auto& ps = opt.params().params();
  for (size_t i = 0; i < m.size(); ++i) {
    load_into(blob.first[i], m[i], ps[i].name, group);
    load_into(blob.second[i], v[i], ps[i].name, group);
  }
  opt.set_steps(blob.steps);
}

}  // namespace cwm::harness
