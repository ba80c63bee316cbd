#pragma once

#include <cstddef>

#include "isfm/tensor.hpp"

namespace isfm {

/// Single-level orthonormal Haar sub-bands of a [C,H,W] map. Each band is [C,H/2,W/2].
/// source_h/source_w record the extent before any even-size padding.
struct WaveletBands {
    Tensor ll;
    Tensor lh;
    Tensor hl;
    Tensor hh;
    std::size_t source_h = 0;
    std::size_t source_w = 0;
};

/// For each 2x2 block [a b; c d]:
///   LL = (a+b+c+d)/2, LH = (a+b-c-d)/2, HL = (a-b+c-d)/2, HH = (a-b-c+d)/2.
/// H and W must be even.
WaveletBands dwt2(const Tensor& x);

/// Inverse of dwt2. Output is [C, 2h, 2w] cropped to source_h x source_w when those are set.
Tensor idwt2(const WaveletBands& bands);

/// Replicates the last row/column so both extents become even, then applies dwt2.
WaveletBands dwt2_padded(const Tensor& x);

/// Edge-replicating pad on the bottom/right to an even size (no-op when already even).
Tensor pad_to_even(const Tensor& x);

/// Top-left crop to h x w.
Tensor crop(const Tensor& x, std::size_t h, std::size_t w);

}  // namespace isfm
