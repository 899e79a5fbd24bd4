#include "sigspp/spp.hpp"

#include <limits>

namespace sigspp {

std::vector<PoolRegion> spp_regions(int h, int w, int n) {
  if (h < 1 || w < 1 || n < 1) {
    throw ShapeError("spp_regions: h, w, n must all be >= 1");
  }
  std::vector<PoolRegion> regions;
  regions.reserve(static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    // floor(j*h/n) .. ceil((j+1)*h/n), all in exact integer arithmetic
    const int r0 = (j * h) / n;
    const int r1 = ((j + 1) * h + n - 1) / n;
    for (int i = 0; i < n; ++i) {
      const int c0 = (i * w) / n;
      const int c1 = ((i + 1) * w + n - 1) / n;
      regions.push_back(PoolRegion{j, i, r0, r1, c0, c1});
    }
  }
  return regions;
}

template <typename T>
SppResult<T> spp_forward(const Tensor4<T>& maps, const PyramidSpec& spec) {
  if (maps.height() < 1 || maps.width() < 1) {
    throw ShapeError("spp_forward: spatial dims must be >= 1, got " + maps.shape_string());
  }
  const int per_channel = spec.outputs_per_channel();
  const int out_len = maps.channels() * per_channel;

  SppResult<T> result;
  result.output = Tensor4<T>(maps.batch(), out_len, 1, 1);
  result.argmax.assign(result.output.size(), 0);
  result.input_dims = maps.dims();

  std::vector<std::vector<PoolRegion>> level_regions;
  level_regions.reserve(spec.levels.size());
  for (int n : spec.levels) {
    level_regions.push_back(spp_regions(maps.height(), maps.width(), n));
  }

  std::size_t out_i = 0;
  for (int b = 0; b < maps.batch(); ++b) {
    for (int c = 0; c < maps.channels(); ++c) {
      for (const auto& regions : level_regions) {
        for (const PoolRegion& region : regions) {
          T best = -std::numeric_limits<T>::infinity();
          std::size_t best_idx = maps.index(b, c, region.row_begin, region.col_begin);
          for (int h = region.row_begin; h < region.row_end; ++h) {
            for (int w = region.col_begin; w < region.col_end; ++w) {
              const T v = maps(b, c, h, w);
              if (v > best) {
                best = v;
                best_idx = maps.index(b, c, h, w);
              }
            }
          }
          result.output.flat(out_i) = best;
          result.argmax[out_i] = best_idx;
          ++out_i;
        }
      }
    }
  }
  return result;
}

template <typename T>
Tensor4<T> spp_backward(const Tensor4<T>& grad_output,
                        const std::vector<std::size_t>& argmax,
                        const std::array<int, 4>& input_dims) {
  if (argmax.size() != grad_output.size()) {
    throw StateError("spp_backward: argmax does not match the gradient shape");
  }
  Tensor4<T> grad(input_dims[0], input_dims[1], input_dims[2], input_dims[3]);
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    if (argmax[i] >= grad.size()) {
      throw StateError("spp_backward: stale argmax indices for the given input dims");
    }
    grad.flat(argmax[i]) += grad_output.flat(i);
  }
  return grad;
}

template SppResult<float> spp_forward<float>(const Tensor4<float>&, const PyramidSpec&);
template SppResult<double> spp_forward<double>(const Tensor4<double>&, const PyramidSpec&);
template Tensor4<float> spp_backward<float>(const Tensor4<float>&,
                                            const std::vector<std::size_t>&,
                                            const std::array<int, 4>&);
template Tensor4<double> spp_backward<double>(const Tensor4<double>&,
                                              const std::vector<std::size_t>&,
                                              const std::array<int, 4>&);

}  // namespace sigspp
