#include "sigspp/model.hpp"

#include <cmath>

#include "sigspp/rng.hpp"

namespace sigspp {

std::vector<ActivationShape> propagate_shapes(const NetworkSpec& spec, int height,
                                              int width) {
  if (spec.layers.empty()) throw ConfigError("empty network spec");
  std::vector<ActivationShape> shapes;
  ActivationShape cur{spec.input_channels, height, width};
  for (const LayerSpec& layer : spec.layers) {
    switch (layer.kind) {
      case LayerKind::kConv:
        cur.height = conv_out_dim(cur.height, layer.kernel, layer.stride, layer.padding);
        cur.width = conv_out_dim(cur.width, layer.kernel, layer.stride, layer.padding);
        cur.channels = layer.filters;
        break;
      case LayerKind::kMaxPool:
        cur.height = conv_out_dim(cur.height, layer.kernel, layer.stride, layer.padding);
        cur.width = conv_out_dim(cur.width, layer.kernel, layer.stride, layer.padding);
        break;
      case LayerKind::kSpp: {
        PyramidSpec pyramid{layer.pyramid_levels};
        cur.channels = cur.channels * pyramid.outputs_per_channel();
        cur.height = 1;
        cur.width = 1;
        break;
      }
      case LayerKind::kFc:
        cur.channels = layer.units;
        cur.height = 1;
        cur.width = 1;
        break;
      default:
        throw ConfigError("unexpected layer kind in catalog spec");
    }
    if (cur.height < 1 || cur.width < 1) {
      throw ShapeError("layer '" + layer_token(layer) + "' collapses a " +
                       std::to_string(height) + "x" + std::to_string(width) +
                       " input to a non-positive spatial size");
    }
    shapes.push_back(cur);
  }
  return shapes;
}

namespace {

template <typename T>
void fill_glorot(T* data, std::size_t count, int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = static_cast<T>(rng.uniform(-bound, bound));
  }
}

template <typename T>
FcParams<T> glorot_fc(int in_dim, int out_dim, Rng& rng) {
  FcParams<T> fc;
  fc.in_dim = in_dim;
  fc.out_dim = out_dim;
  fc.weights.assign(static_cast<std::size_t>(in_dim) * out_dim, T(0));
  fc.bias.assign(static_cast<std::size_t>(out_dim), T(0));
  fill_glorot(fc.weights.data(), fc.weights.size(), in_dim, out_dim, rng);
  return fc;
}

}  // namespace

template <typename T>
Model<T> build_model_shell(const NetworkSpec& spec) {
  if (spec.user_classes < 1) {
    throw ConfigError("model shell: spec must set user_classes (M) >= 1");
  }
  if (!spec.has_spp() && (spec.input_height < 1 || spec.input_width < 1)) {
    throw ConfigError("model shell: non-spp spec needs a nominal input size");
  }
  // spp specs accept any input; a probe size keeps the fc fan-in
  // computation well defined (the spp output length is size independent).
  int h = spec.has_spp() ? 64 : spec.input_height;
  int w = spec.has_spp() ? 64 : spec.input_width;
  if (spec.has_spp()) {
    // the probe must survive the conv stack; grow it if needed
    for (;;) {
      try {
        propagate_shapes(spec, h, w);
        break;
      } catch (const ShapeError&) {
        h *= 2;
        w *= 2;
        if (h > 1 << 14) throw;
      }
    }
  }
  const auto shapes = propagate_shapes(spec, h, w);

  Model<T> model;
  model.spec = spec;
  int in_channels = spec.input_channels;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    if (layer.kind == LayerKind::kConv) {
      ConvParams<T> conv;
      conv.stride = layer.stride;
      conv.padding = layer.padding;
      conv.weights = Tensor4<T>(layer.filters, in_channels, layer.kernel, layer.kernel);
      conv.bias.assign(static_cast<std::size_t>(layer.filters), T(0));
      model.conv.push_back(std::move(conv));
      model.conv_bn.emplace_back(layer.filters);
      in_channels = layer.filters;
    } else if (layer.kind == LayerKind::kFc) {
      const int in_dim = i == 0 ? spec.input_channels * h * w : shapes[i - 1].flat();
      FcParams<T> fc;
      fc.in_dim = in_dim;
      fc.out_dim = layer.units;
      fc.weights.assign(static_cast<std::size_t>(in_dim) * layer.units, T(0));
      fc.bias.assign(static_cast<std::size_t>(layer.units), T(0));
      model.fc.push_back(std::move(fc));
      model.fc_bn.emplace_back(layer.units);
    }
  }
  if (model.fc.empty()) {
    throw ConfigError("model shell: spec has no fc rows to feed the heads");
  }
  auto shell_fc = [](int in_dim, int out_dim) {
    FcParams<T> fc;
    fc.in_dim = in_dim;
    fc.out_dim = out_dim;
    fc.weights.assign(static_cast<std::size_t>(in_dim) * out_dim, T(0));
    fc.bias.assign(static_cast<std::size_t>(out_dim), T(0));
    return fc;
  };
  model.user_head = shell_fc(model.feature_dim(), spec.user_classes);
  if (spec.forgery_head) {
    model.forgery_head = shell_fc(model.feature_dim(), 1);
  }
  return model;
}

template <typename T>
Model<T> glorot_init(const NetworkSpec& spec, std::uint64_t seed) {
  Model<T> model = build_model_shell<T>(spec);
  Rng rng(seed);
  for (auto& conv : model.conv) {
    const int receptive = conv.weights.height() * conv.weights.width();
    fill_glorot(conv.weights.data(), conv.weights.size(),
                conv.weights.channels() * receptive, conv.weights.batch() * receptive,
                rng);
  }
  for (auto& fc : model.fc) {
    fill_glorot(fc.weights.data(), fc.weights.size(), fc.in_dim, fc.out_dim, rng);
  }
  fill_glorot(model.user_head.weights.data(), model.user_head.weights.size(),
              model.user_head.in_dim, model.user_head.out_dim, rng);
  if (model.has_forgery_head()) {
    fill_glorot(model.forgery_head.weights.data(), model.forgery_head.weights.size(),
                model.forgery_head.in_dim, model.forgery_head.out_dim, rng);
  }
  return model;
}

template <typename T>
void replace_user_head(Model<T>& model, int new_user_classes, std::uint64_t seed,
                       bool keep_forgery_head) {
  if (new_user_classes < 2) {
    throw ConfigError("replace_user_head: need at least 2 user classes");
  }
  Rng rng(seed);
  model.user_head = glorot_fc<T>(model.feature_dim(), new_user_classes, rng);
  model.spec.user_classes = new_user_classes;
  if (!keep_forgery_head) {
    model.forgery_head = FcParams<T>{};
    model.spec.forgery_head = false;
  } else if (!model.has_forgery_head()) {
    throw ConfigError("replace_user_head: source model has no forgery head to keep");
  }
}

template <typename T>
Gradients<T> Gradients<T>::zeros_like(const Model<T>& model) {
  Gradients<T> g;
  for (const auto& conv : model.conv) {
    g.conv_w.emplace_back(conv.weights.batch(), conv.weights.channels(),
                          conv.weights.height(), conv.weights.width());
    g.conv_b.emplace_back(conv.bias.size(), T(0));
  }
  for (const auto& bn : model.conv_bn) {
    g.conv_bn_gamma.emplace_back(bn.gamma.size(), T(0));
    g.conv_bn_beta.emplace_back(bn.beta.size(), T(0));
  }
  for (const auto& fc : model.fc) {
    g.fc_w.emplace_back(fc.weights.size(), T(0));
    g.fc_b.emplace_back(fc.bias.size(), T(0));
  }
  for (const auto& bn : model.fc_bn) {
    g.fc_bn_gamma.emplace_back(bn.gamma.size(), T(0));
    g.fc_bn_beta.emplace_back(bn.beta.size(), T(0));
  }
  g.user_head_w.assign(model.user_head.weights.size(), T(0));
  g.user_head_b.assign(model.user_head.bias.size(), T(0));
  if (model.has_forgery_head()) {
    g.forgery_head_w.assign(model.forgery_head.weights.size(), T(0));
    g.forgery_head_b.assign(model.forgery_head.bias.size(), T(0));
  }
  return g;
}

template Model<float> build_model_shell<float>(const NetworkSpec&);
template Model<double> build_model_shell<double>(const NetworkSpec&);
template Model<float> glorot_init<float>(const NetworkSpec&, std::uint64_t);
template Model<double> glorot_init<double>(const NetworkSpec&, std::uint64_t);
template void replace_user_head<float>(Model<float>&, int, std::uint64_t, bool);
template void replace_user_head<double>(Model<double>&, int, std::uint64_t, bool);
template struct Gradients<float>;
template struct Gradients<double>;

}  // namespace sigspp
