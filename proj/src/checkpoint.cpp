#include "convkb/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "convkb/errors.hpp"

namespace convkb {

namespace {

constexpr char kMagic[4] = {'K', 'B', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_u8(std::ostream& out, std::uint8_t x) { put_bytes(out, &x, 1); }

void put_u32(std::ostream& out, std::uint32_t x) {
  std::uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(x >> (8 * i));
  put_bytes(out, b, 4);
}

void put_u64(std::ostream& out, std::uint64_t x) {
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(x >> (8 * i));
  put_bytes(out, b, 8);
}

void put_i32(std::ostream& out, std::int32_t x) { put_u32(out, static_cast<std::uint32_t>(x)); }
void put_i64(std::ostream& out, std::int64_t x) { put_u64(out, static_cast<std::uint64_t>(x)); }
void put_f64(std::ostream& out, double x) { put_u64(out, std::bit_cast<std::uint64_t>(x)); }

void put_f64_array(std::ostream& out, const std::vector<double>& v) {
  put_u64(out, v.size());
  for (double x : v) put_f64(out, x);
}

void put_vocab(std::ostream& out, const Vocabulary& vocab) {
  put_u64(out, static_cast<std::uint64_t>(vocab.size()));
  for (std::int32_t i = 0; i < vocab.size(); ++i) {
    const std::string& s = vocab.label(i);
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    put_bytes(out, s.data(), s.size());
  }
  put_u64(out, vocab.order_hash());
}

struct Reader {
  std::ifstream in;

  explicit Reader(const std::filesystem::path& path) : in(path, std::ios::binary) {
    if (!in) throw DataError("cannot open checkpoint " + path.string());
  }

  void bytes(void* p, std::size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) throw DataError("truncated checkpoint");
  }

  std::uint8_t u8() {
    std::uint8_t x;
    bytes(&x, 1);
    return x;
  }

  std::uint32_t u32() {
    std::uint8_t b[4];
    bytes(b, 4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return x;
  }

  std::uint64_t u64() {
    std::uint8_t b[8];
    bytes(b, 8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return x;
  }

  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }

  std::vector<double> f64_array() {
    const std::uint64_t n = u64();
    if (n > (1ULL << 32)) throw DataError("corrupt checkpoint: implausible array length");
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }

  Vocabulary vocab() {
    Vocabulary v;
    const std::uint64_t n = u64();
    std::string s;
    for (std::uint64_t i = 0; i < n; ++i) {
      const std::uint32_t len = u32();
      s.resize(len);
      bytes(s.data(), len);
      v.add(s);
    }
    if (u64() != v.order_hash()) throw DataError("corrupt checkpoint: vocabulary hash mismatch");
    return v;
  }
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");

  const ModelState& m = ckpt.state;
  const TrainConfig& c = m.config;

  put_bytes(out, kMagic, 4);
  put_u32(out, kVersion);
  put_u8(out, static_cast<std::uint8_t>(c.model));

  put_i32(out, c.k);
  put_i32(out, c.tau);
  put_u8(out, static_cast<std::uint8_t>(c.p));
  put_f64(out, c.gamma);
  put_f64(out, c.lambda);
  put_f64(out, c.lr);
  put_i32(out, c.batch_size);
  put_i32(out, c.epochs);
  put_i32(out, c.neg_ratio);
  put_u64(out, c.seed);
  put_u8(out, static_cast<std::uint8_t>(c.filter_init));
  put_u8(out, static_cast<std::uint8_t>(c.activation));
  put_u8(out, c.convkb_entity_norm ? 1 : 0);

  put_vocab(out, ckpt.entities);
  put_vocab(out, ckpt.relations);

  put_f64_array(out, m.emb.entity_data());
  put_f64_array(out, m.emb.relation_data());

  if (c.model == ModelKind::kConvKB) {
    const ConvKBParams& p = *m.conv;
    put_f64_array(out, p.filters);
    put_f64_array(out, p.biases);
    put_f64_array(out, p.weight);
  }

  put_u8(out, m.adam.has_value() ? 1 : 0);
  if (m.adam.has_value()) {
    const AdamState& a = *m.adam;
    put_f64(out, a.beta1);
    put_f64(out, a.beta2);
    put_f64(out, a.eps);
    put_i64(out, a.step);
    put_f64_array(out, a.ent_m);
    put_f64_array(out, a.ent_v);
    put_f64_array(out, a.rel_m);
    put_f64_array(out, a.rel_v);
    put_f64_array(out, a.filt_m);
    put_f64_array(out, a.filt_v);
    put_f64_array(out, a.bias_m);
    put_f64_array(out, a.bias_v);
    put_f64_array(out, a.w_m);
    put_f64_array(out, a.w_v);
  }

  if (!out) throw DataError("I/O error writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);

  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw DataError("not a checkpoint: " + path.string());
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }

  Checkpoint ckpt;
  TrainConfig& c = ckpt.state.config;
  c.model = static_cast<ModelKind>(r.u8());
  c.k = r.i32();
  c.tau = r.i32();
  c.p = r.u8();
  c.gamma = r.f64();
  c.lambda = r.f64();
  c.lr = r.f64();
  c.batch_size = r.i32();
  c.epochs = r.i32();
  c.neg_ratio = r.i32();
  c.seed = r.u64();
  c.filter_init = static_cast<FilterInit>(r.u8());
  c.activation = static_cast<Activation>(r.u8());
  c.convkb_entity_norm = r.u8() != 0;

  ckpt.entities = r.vocab();
  ckpt.relations = r.vocab();

  EmbeddingStore emb(ckpt.entities.size(), ckpt.relations.size(), c.k);
  emb.entity_data() = r.f64_array();
  emb.relation_data() = r.f64_array();
  if (emb.entity_data().size() != static_cast<std::size_t>(ckpt.entities.size()) * c.k ||
      emb.relation_data().size() != static_cast<std::size_t>(ckpt.relations.size()) * c.k) {
    throw DataError("corrupt checkpoint: embedding shape mismatch");
  }
  ckpt.state.emb = std::move(emb);

  if (c.model == ModelKind::kConvKB) {
    ConvKBParams p;
    p.num_filters = c.tau;
    p.activation = c.activation;
    p.filters = r.f64_array();
    p.biases = r.f64_array();
    p.weight = r.f64_array();
    check_shapes(p, ckpt.state.emb);
    ckpt.state.conv = std::move(p);
  }

  if (r.u8() != 0) {
    AdamState a;
    a.beta1 = r.f64();
    a.beta2 = r.f64();
    a.eps = r.f64();
    a.step = r.i64();
    a.ent_m = r.f64_array();
    a.ent_v = r.f64_array();
    a.rel_m = r.f64_array();
    a.rel_v = r.f64_array();
    a.filt_m = r.f64_array();
    a.filt_v = r.f64_array();
    a.bias_m = r.f64_array();
    a.bias_v = r.f64_array();
    a.w_m = r.f64_array();
    a.w_v = r.f64_array();
    ckpt.state.adam = std::move(a);
  }
  return ckpt;
}

void check_vocab_match(const Checkpoint& ckpt, const KnowledgeBase& kb) {
  if (ckpt.entities.size() != kb.entities.size() ||
      ckpt.relations.size() != kb.relations.size() ||
      ckpt.entities.order_hash() != kb.entities.order_hash() ||
      ckpt.relations.order_hash() != kb.relations.order_hash()) {
    throw DataError("checkpoint vocabulary does not match the dataset");
  }
}

}  // namespace convkb
