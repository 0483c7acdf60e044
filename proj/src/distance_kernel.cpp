#include "distance_kernel.hpp"

#include <cstring>

namespace proxsafe::detail {

namespace {

typedef float v8f __attribute__((vector_size(32)));
typedef double v8d __attribute__((vector_size(64)));

constexpr std::size_t kLanes = 8;

inline v8d load(const float* p) noexcept {
    v8f f;
    std::memcpy(&f, p, sizeof f);
    return __builtin_convertvector(f, v8d);
}

inline v8d load_tail(const float* p, std::size_t n) noexcept {
    float tmp[kLanes] = {};
    std::memcpy(tmp, p, n * sizeof(float));
    return load(tmp);
}

inline double reduce(v8d v) noexcept {
    return ((v[0] + v[1]) + (v[2] + v[3])) + ((v[4] + v[5]) + (v[6] + v[7]));
}

}  // namespace

double dot(const float* a, const float* b, std::size_t dim) noexcept {
    v8d acc = {};
    const std::size_t body = dim - dim % kLanes;
    for (std::size_t d = 0; d < body; d += kLanes) {
        acc = acc + load(a + d) * load(b + d);
    }
    if (body < dim) {
        acc = acc + load_tail(a + body, dim - body) * load_tail(b + body, dim - body);
    }
    return reduce(acc);
}

void dot_tile(const float* const* a, const float* const* b, std::size_t dim,
              double out[kTileRows][kTileCols]) noexcept {
    static_assert(kTileRows == 4 && kTileCols == 4);
    v8d c00 = {}, c01 = {}, c02 = {}, c03 = {};
    v8d c10 = {}, c11 = {}, c12 = {}, c13 = {};
    v8d c20 = {}, c21 = {}, c22 = {}, c23 = {};
    v8d c30 = {}, c31 = {}, c32 = {}, c33 = {};

    auto step = [&](v8d a0, v8d a1, v8d a2, v8d a3, v8d b0, v8d b1, v8d b2, v8d b3) {
        c00 = c00 + a0 * b0; c01 = c01 + a0 * b1; c02 = c02 + a0 * b2; c03 = c03 + a0 * b3;
        c10 = c10 + a1 * b0; c11 = c11 + a1 * b1; c12 = c12 + a1 * b2; c13 = c13 + a1 * b3;
        c20 = c20 + a2 * b0; c21 = c21 + a2 * b1; c22 = c22 + a2 * b2; c23 = c23 + a2 * b3;
        c30 = c30 + a3 * b0; c31 = c31 + a3 * b1; c32 = c32 + a3 * b2; c33 = c33 + a3 * b3;
    };

    const std::size_t body = dim - dim % kLanes;
    for (std::size_t d = 0; d < body; d += kLanes) {
        step(load(a[0] + d), load(a[1] + d), load(a[2] + d), load(a[3] + d),
             load(b[0] + d), load(b[1] + d), load(b[2] + d), load(b[3] + d));
    }
    if (body < dim) {
        const std::size_t n = dim - body;
        step(load_tail(a[0] + body, n), load_tail(a[1] + body, n), load_tail(a[2] + body, n),
             load_tail(a[3] + body, n), load_tail(b[0] + body, n), load_tail(b[1] + body, n),
             load_tail(b[2] + body, n), load_tail(b[3] + body, n));
    }

    out[0][0] = reduce(c00); out[0][1] = reduce(c01); out[0][2] = reduce(c02); out[0][3] = reduce(c03);
    out[1][0] = reduce(c10); out[1][1] = reduce(c11); out[1][2] = reduce(c12); out[1][3] = reduce(c13);
    out[2][0] = reduce(c20); out[2][1] = reduce(c21); out[2][2] = reduce(c22); out[2][3] = reduce(c23);
    out[3][0] = reduce(c30); out[3][1] = reduce(c31); out[3][2] = reduce(c32); out[3][3] = reduce(c33);
}

}  // namespace proxsafe::detail
