#include "sigspp/model_io.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace sigspp {

namespace {

constexpr char kMagic[6] = {'S', 'I', 'G', 'S', 'P', 'P'};
constexpr std::uint32_t kVersion = 1;
constexpr char kOptTag[4] = {'O', 'P', 'T', '0'};

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char bytes[4] = {static_cast<unsigned char>(v & 0xff),
                            static_cast<unsigned char>((v >> 8) & 0xff),
                            static_cast<unsigned char>((v >> 16) & 0xff),
                            static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t read_u32(std::istream& in, const std::string& what) {
  unsigned char bytes[4];
  if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
    throw DataError("truncated model file while reading " + what);
  }
  return static_cast<std::uint32_t>(bytes[0]) | (static_cast<std::uint32_t>(bytes[1]) << 8) |
         (static_cast<std::uint32_t>(bytes[2]) << 16) |
         (static_cast<std::uint32_t>(bytes[3]) << 24);
}

void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

double read_f64(std::istream& in, const std::string& what) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
    throw DataError("truncated model file while reading " + what);
  }
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, const std::string& what) {
  const std::uint32_t len = read_u32(in, what);
  if (len > (1u << 20)) throw DataError("implausible string length in model file");
  std::string s(len, '\0');
  if (!in.read(s.data(), len)) {
    throw DataError("truncated model file while reading " + what);
  }
  return s;
}

void write_floats(std::ostream& out, const float* data, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, &data[i], 4);
    write_u32(out, bits);
  }
}

void read_floats(std::istream& in, float* data, std::size_t count, const std::string& what) {
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits = read_u32(in, what);
    std::memcpy(&data[i], &bits, 4);
  }
}

void write_block(std::ostream& out, const std::string& name,
                 const std::vector<std::uint32_t>& dims, const float* data) {
  write_string(out, name);
  write_u32(out, static_cast<std::uint32_t>(dims.size()));
  std::size_t count = 1;
  for (std::uint32_t d : dims) {
    write_u32(out, d);
    count *= d;
  }
  write_floats(out, data, count);
}

void read_block_into(std::istream& in, const std::string& expected_name,
                     const std::vector<std::uint32_t>& expected_dims, float* data) {
  const std::string name = read_string(in, "block name");
  if (name != expected_name) {
    throw DataError("model file block order mismatch: expected '" + expected_name +
                    "', found '" + name + "'");
  }
  const std::uint32_t ndims = read_u32(in, name + " rank");
  if (ndims != expected_dims.size()) {
    throw DataError("model file shape inconsistency in block '" + name + "'");
  }
  std::size_t count = 1;
  for (std::size_t i = 0; i < expected_dims.size(); ++i) {
    const std::uint32_t d = read_u32(in, name + " dims");
    if (d != expected_dims[i]) {
      throw DataError("model file shape inconsistency in block '" + name + "'");
    }
    count *= d;
  }
  read_floats(in, data, count, name + " data");
}

// Blocks in a fixed order so files are byte-stable.
template <typename Fn>
void visit_model_blocks(Model<float>& model, Fn&& fn) {
  for (std::size_t i = 0; i < model.conv.size(); ++i) {
    const std::string prefix = "conv" + std::to_string(i + 1);
    auto& conv = model.conv[i];
    fn(prefix + ".w",
       std::vector<std::uint32_t>{static_cast<std::uint32_t>(conv.weights.batch()),
                                  static_cast<std::uint32_t>(conv.weights.channels()),
                                  static_cast<std::uint32_t>(conv.weights.height()),
                                  static_cast<std::uint32_t>(conv.weights.width())},
       conv.weights.data());
    const auto ch = static_cast<std::uint32_t>(conv.bias.size());
    fn(prefix + ".b", std::vector<std::uint32_t>{ch}, conv.bias.data());
    auto& bn = model.conv_bn[i];
    fn(prefix + ".bn.gamma", std::vector<std::uint32_t>{ch}, bn.gamma.data());
    fn(prefix + ".bn.beta", std::vector<std::uint32_t>{ch}, bn.beta.data());
    fn(prefix + ".bn.mean", std::vector<std::uint32_t>{ch}, bn.running_mean.data());
    fn(prefix + ".bn.var", std::vector<std::uint32_t>{ch}, bn.running_var.data());
  }
  for (std::size_t i = 0; i < model.fc.size(); ++i) {
    const std::string prefix = "fc" + std::to_string(i + 1);
    auto& fc = model.fc[i];
    fn(prefix + ".w",
       std::vector<std::uint32_t>{static_cast<std::uint32_t>(fc.in_dim),
                                  static_cast<std::uint32_t>(fc.out_dim)},
       fc.weights.data());
    const auto units = static_cast<std::uint32_t>(fc.out_dim);
    fn(prefix + ".b", std::vector<std::uint32_t>{units}, fc.bias.data());
    auto& bn = model.fc_bn[i];
    fn(prefix + ".bn.gamma", std::vector<std::uint32_t>{units}, bn.gamma.data());
    fn(prefix + ".bn.beta", std::vector<std::uint32_t>{units}, bn.beta.data());
    fn(prefix + ".bn.mean", std::vector<std::uint32_t>{units}, bn.running_mean.data());
    fn(prefix + ".bn.var", std::vector<std::uint32_t>{units}, bn.running_var.data());
  }
  fn("user_head.w",
     std::vector<std::uint32_t>{static_cast<std::uint32_t>(model.user_head.in_dim),
                                static_cast<std::uint32_t>(model.user_head.out_dim)},
     model.user_head.weights.data());
  fn("user_head.b",
     std::vector<std::uint32_t>{static_cast<std::uint32_t>(model.user_head.out_dim)},
     model.user_head.bias.data());
  if (model.has_forgery_head()) {
    fn("forgery_head.w",
       std::vector<std::uint32_t>{static_cast<std::uint32_t>(model.forgery_head.in_dim), 1u},
       model.forgery_head.weights.data());
    fn("forgery_head.b", std::vector<std::uint32_t>{1u}, model.forgery_head.bias.data());
  }
}

template <typename Fn>
void visit_velocity_blocks(Model<float>& model, Gradients<float>& velocity, Fn&& fn) {
  for_each_param(model, velocity,
                 [&](float* param, float* vel, std::size_t size, bool, const std::string& name) {
                   (void)param;
                   fn("vel." + name, std::vector<std::uint32_t>{static_cast<std::uint32_t>(size)},
                      vel);
                 });
}

}  // namespace

void save_model(const std::string& path, const Model<float>& model,
                const OptimizerState<float>* optimizer, const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot create model file: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  write_string(out, model.spec.to_string());
  write_u32(out, static_cast<std::uint32_t>(model.spec.user_classes));
  out.put(model.spec.forgery_head ? 1 : 0);
  write_u32(out, static_cast<std::uint32_t>(model.spec.input_channels));
  write_u32(out, static_cast<std::uint32_t>(model.spec.input_height));
  write_u32(out, static_cast<std::uint32_t>(model.spec.input_width));
  write_string(out, config_hash);

  auto& mutable_model = const_cast<Model<float>&>(model);
  std::uint32_t n_blocks = 0;
  visit_model_blocks(mutable_model,
                     [&](const std::string&, const std::vector<std::uint32_t>&, float*) {
                       ++n_blocks;
                     });
  write_u32(out, n_blocks);
  visit_model_blocks(mutable_model, [&](const std::string& name,
                                        const std::vector<std::uint32_t>& dims, float* data) {
    write_block(out, name, dims, data);
  });

  if (optimizer) {
    out.write(kOptTag, sizeof(kOptTag));
    write_f64(out, optimizer->learning_rate);
    write_f64(out, optimizer->momentum);
    write_f64(out, optimizer->weight_decay);
    write_u32(out, static_cast<std::uint32_t>(optimizer->epoch));
    out.put(optimizer->velocity_ready ? 1 : 0);
    if (optimizer->velocity_ready) {
      auto& velocity = const_cast<Gradients<float>&>(optimizer->velocity);
      visit_velocity_blocks(mutable_model, velocity,
                            [&](const std::string& name,
                                const std::vector<std::uint32_t>& dims, float* data) {
                              write_block(out, name, dims, data);
                            });
    }
  }
  if (!out) throw DataError("write failed for model file: " + path);
}

Model<float> load_model(const std::string& path, OptimizerState<float>* optimizer,
                        std::string* config_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file: " + path);

  char magic[6];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("bad container: '" + path + "' is not a model file");
  }
  const std::uint32_t version = read_u32(in, "version");
  if (version != kVersion) {
    throw DataError("unsupported model format version " + std::to_string(version) +
                    " (expected " + std::to_string(kVersion) + ")");
  }
  NetworkSpec spec = NetworkSpec::from_string(read_string(in, "spec"));
  spec.user_classes = static_cast<int>(read_u32(in, "user classes"));
  spec.forgery_head = in.get() == 1;
  spec.input_channels = static_cast<int>(read_u32(in, "input channels"));
  spec.input_height = static_cast<int>(read_u32(in, "input height"));
  spec.input_width = static_cast<int>(read_u32(in, "input width"));
  const std::string hash = read_string(in, "config hash");
  if (config_hash) *config_hash = hash;

  Model<float> model = build_model_shell<float>(spec);
  std::uint32_t expected_blocks = 0;
  visit_model_blocks(model, [&](const std::string&, const std::vector<std::uint32_t>&, float*) {
    ++expected_blocks;
  });
  const std::uint32_t n_blocks = read_u32(in, "block count");
  if (n_blocks != expected_blocks) {
    throw DataError("model file shape inconsistency: block count " +
                    std::to_string(n_blocks) + " does not match the spec");
  }
  visit_model_blocks(model, [&](const std::string& name,
                                const std::vector<std::uint32_t>& dims, float* data) {
    read_block_into(in, name, dims, data);
  });

  // optional optimizer section
  char tag[4];
  if (in.read(tag, sizeof(tag))) {
    if (std::memcmp(tag, kOptTag, sizeof(kOptTag)) != 0) {
      throw DataError("bad container: unknown trailing section in " + path);
    }
    OptimizerState<float> state;
    state.learning_rate = read_f64(in, "learning rate");
    state.momentum = read_f64(in, "momentum");
    state.weight_decay = read_f64(in, "weight decay");
    state.epoch = static_cast<int>(read_u32(in, "epoch"));
    state.velocity_ready = in.get() == 1;
    if (state.velocity_ready) {
      state.velocity = Gradients<float>::zeros_like(model);
      visit_velocity_blocks(model, state.velocity,
                            [&](const std::string& name,
                                const std::vector<std::uint32_t>& dims, float* data) {
                              read_block_into(in, name, dims, data);
                            });
    }
    if (optimizer) *optimizer = std::move(state);
  }
  return model;
}

}  // namespace sigspp
