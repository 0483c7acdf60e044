#pragma once

// Dot-product kernels for the distance engine.
//
// Every dot product, whether computed alone or inside a tile, uses the same
// arithmetic: 8 float64 lanes, lane l accumulating elements d with
// d % 8 == l in ascending order (tail zero-padded), then a fixed pairwise
// reduction. This file is compiled with floating-point contraction disabled,
// so a pair's result does not depend on which code path produced it.

#include <cstddef>

namespace proxsafe::detail {

inline constexpr std::size_t kTileRows = 4;
inline constexpr std::size_t kTileCols = 4;

double dot(const float* a, const float* b, std::size_t dim) noexcept;

// out[i][j] = dot(a[i], b[j]) for a kTileRows x kTileCols tile.
void dot_tile(const float* const* a, const float* const* b, std::size_t dim,
              double out[kTileRows][kTileCols]) noexcept;

}  // namespace proxsafe::detail
