#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "flowspike/network.hpp"

namespace flowspike {

namespace {

constexpr char kMagic[4] = {'S', 'N', 'U', 'C'};
constexpr std::uint32_t kVersion = 1;

struct Writer {
  std::ostream& os;
  std::int64_t off = 0;
  void bytes(const void* p, std::size_t n) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!os) throw io_error("checkpoint write failed", off);
    off += static_cast<std::int64_t>(n);
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u16(std::uint16_t v) {
    std::uint8_t b[2] = {std::uint8_t(v), std::uint8_t(v >> 8)};
    bytes(b, 2);
  }
  void u32(std::uint32_t v) {
    std::uint8_t b[4] = {std::uint8_t(v), std::uint8_t(v >> 8), std::uint8_t(v >> 16),
                         std::uint8_t(v >> 24)};
    bytes(b, 4);
  }
  void f32(float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    u32(u);
  }
};

struct Reader {
  std::istream& is;
  std::int64_t off = 0;
  void bytes(void* p, std::size_t n, const char* what) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
      throw io_error(std::string("truncated checkpoint while reading ") + what, off);
    off += static_cast<std::int64_t>(n);
  }
  std::uint8_t u8(const char* what) {
    std::uint8_t v;
    bytes(&v, 1, what);
    return v;
  }
  std::uint16_t u16(const char* what) {
    std::uint8_t b[2];
    bytes(b, 2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32(const char* what) {
    std::uint8_t b[4];
    bytes(b, 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  float f32(const char* what) {
    std::uint32_t u = u32(what);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }
};

nlohmann::json arch_to_json(const ArchConfig& a) {
  return {{"n_in", a.n_in},
          {"base_channels", a.base_channels},
          {"n_stages", a.n_stages},
          {"recurrency", to_string(a.recurrency)},
          {"neuron", to_string(a.neuron_kind)},
          {"multi_res_loss", a.multi_res_loss},
          {"max_flow", a.max_flow}};
}

ArchConfig arch_from_json(const nlohmann::json& j) {
  ArchConfig a;
  a.n_in = j.at("n_in").get<int>();
  a.base_channels = j.at("base_channels").get<int>();
  a.n_stages = j.at("n_stages").get<int>();
  a.recurrency = recurrency_from(j.at("recurrency").get<std::string>());
  a.neuron_kind = neuron_kind_from(j.at("neuron").get<std::string>());
  a.multi_res_loss = j.at("multi_res_loss").get<bool>();
  a.max_flow = j.at("max_flow").get<float>();
  return a;
}

}  // namespace

void save_checkpoint(Model& model, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error("cannot open '" + path + "' for writing");
  Writer w{f};
  w.bytes(kMagic, 4);
  w.u32(kVersion);

  nlohmann::json j = {{"arch", arch_to_json(model.config)},
                      {"height", model.height},
                      {"width", model.width}};
  std::string js = j.dump();
  w.u32(static_cast<std::uint32_t>(js.size()));
  w.bytes(js.data(), js.size());

  auto params = model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (auto& p : params) {
    w.u16(static_cast<std::uint16_t>(p.name.size()));
    w.bytes(p.name.data(), p.name.size());
    const Shape& sh = p.tensor.shape();
    w.u8(static_cast<std::uint8_t>(sh.rank()));
    for (int i = 0; i < sh.rank(); ++i) w.u32(static_cast<std::uint32_t>(sh[i]));
    for (float v : p.tensor.value()) w.f32(v);
  }
  f.flush();
  if (!f) throw io_error("checkpoint write failed while flushing '" + path + "'");
}

Model load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open '" + path + "' for reading");
  Reader r{f};

  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw io_error("bad checkpoint magic", 0);
  std::uint32_t version = r.u32("version");
  if (version != kVersion)
    throw io_error("unsupported checkpoint version " + std::to_string(version), 4);

  std::uint32_t jlen = r.u32("config length");
  if (jlen > (1u << 20)) throw io_error("implausible config block length", r.off - 4);
  std::string js(jlen, '\0');
  r.bytes(js.data(), jlen, "config block");

  ArchConfig arch;
  int height = 0, width = 0;
  try {
    nlohmann::json j = nlohmann::json::parse(js);
    arch = arch_from_json(j.at("arch"));
    height = j.at("height").get<int>();
    width = j.at("width").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("invalid checkpoint config block: ") + e.what(), 12);
  } catch (const validation_error& e) {
    throw io_error(std::string("invalid checkpoint config block: ") + e.what(), 12);
  }

  Model m;
  try {
    m = build<float>(arch, height, width, /*seed=*/0);
  } catch (const std::runtime_error& e) {
    throw io_error(std::string("checkpoint config does not describe a valid model: ") + e.what(),
                   12);
  }
  auto params = m.parameters();

  std::uint32_t count = r.u32("tensor count");
  if (count != params.size())
    throw io_error("tensor count mismatch: file has " + std::to_string(count) +
                       ", model expects " + std::to_string(params.size()),
                   r.off - 4);

  for (auto& p : params) {
    std::int64_t rec_off = r.off;
    std::uint16_t nlen = r.u16("tensor name length");
    std::string name(nlen, '\0');
    r.bytes(name.data(), nlen, "tensor name");
    if (name != p.name)
      throw io_error("tensor name mismatch: file has '" + name + "', model expects '" + p.name +
                         "'",
                     rec_off);
    std::uint8_t rank = r.u8("tensor rank");
    if (rank > Shape::kMaxRank) throw io_error("tensor rank " + std::to_string(rank) + " > 4", rec_off);
    if (rank != p.tensor.shape().rank())
      throw io_error("tensor rank mismatch for '" + name + "'", rec_off);
    std::int64_t numel = 1;
    for (int i = 0; i < rank; ++i) {
      std::uint32_t d = r.u32("tensor dim");
      if (d != static_cast<std::uint32_t>(p.tensor.shape()[i]))
        throw io_error("tensor shape mismatch for '" + name + "'", rec_off);
      numel *= d;
    }
    auto dst = p.tensor.value_mut();
    for (std::int64_t i = 0; i < numel; ++i) dst[i] = r.f32("tensor payload");
  }
  return m;
}

}  // namespace flowspike
