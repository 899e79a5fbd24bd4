#ifndef SIGSPP_SPP_HPP_
#define SIGSPP_SPP_HPP_

#include <array>
#include <numeric>
#include <vector>

#include "sigspp/tensor.hpp"

namespace sigspp {

// Pyramid of square max-pooling grids. With the default levels [4, 2, 1]
// each channel contributes 16 + 4 + 1 = 21 outputs, no matter the spatial
// size of the incoming maps.
struct PyramidSpec {
  std::vector<int> levels{4, 2, 1};

  int outputs_per_channel() const {
    int total = 0;
    for (int n : levels) total += n * n;
    return total;
  }
};

// Half-open pooling window of unit (j, i) in an n x n grid, 0-based.
struct PoolRegion {
  int j = 0, i = 0;
  int row_begin = 0, row_end = 0;
  int col_begin = 0, col_end = 0;

  bool operator==(const PoolRegion&) const = default;
};

// Windows of the n x n grid over an h x w map:
//   rows [floor(j*h/n), ceil((j+1)*h/n)), columns analogous.
// Every region is non-empty for h, w, n >= 1, regions at a level cover the
// whole map, and neighbouring regions may overlap (the ceil rounds up).
std::vector<PoolRegion> spp_regions(int h, int w, int n);

template <typename T>
struct SppResult {
  // (N, C * outputs_per_channel, 1, 1): per batch element, channels
  // outermost, then levels in spec order, row-major units within a level.
  Tensor4<T> output;
  // Flat index into the input tensor per output element; ties resolve to
  // the first maximum in row-major scan order.
  std::vector<std::size_t> argmax;
  std::array<int, 4> input_dims{};
};

template <typename T>
SppResult<T> spp_forward(const Tensor4<T>& maps, const PyramidSpec& spec);

// Routes each upstream component to its argmax position; overlapping
// regions accumulate.
template <typename T>
Tensor4<T> spp_backward(const Tensor4<T>& grad_output,
                        const std::vector<std::size_t>& argmax,
                        const std::array<int, 4>& input_dims);

}  // namespace sigspp

#endif  // SIGSPP_SPP_HPP_
