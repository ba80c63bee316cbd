#pragma once

#include <array>
#include <cstddef>

#include "isfm/kernels.hpp"
#include "isfm/tensor.hpp"

namespace isfm {

/// Selective state-space parameters for one scan direction over D channels
/// with an N-dimensional state per channel.
///
/// a_log   [D, N]   A = -exp(a_log)
/// dt_down [R, D]   no bias
/// dt_up   [D, R]   bias; delta = softplus(dt_up(dt_down(u)))
/// b_proj  [N, D]   no bias
/// c_proj  [N, D]   no bias
/// d_skip  [D]
struct SsmParams {
    Tensor a_log;
    LinearParams dt_down;
    LinearParams dt_up;
    LinearParams b_proj;
    LinearParams c_proj;
    Tensor d_skip;

    std::size_t channels() const { return a_log.extent(0); }
    std::size_t state_size() const { return a_log.extent(1); }
};

enum class ScanDirection { RowForward, RowBackward, ColForward, ColBackward };

inline constexpr std::array<ScanDirection, 4> kScanDirections = {
    ScanDirection::RowForward, ScanDirection::RowBackward, ScanDirection::ColForward, ScanDirection::ColBackward};

const char* to_string(ScanDirection d);

/// Input-dependent scan coefficients for a sequence u [L, D].
struct ScanInputs {
    Tensor delta;  // [L, D], strictly positive
    Tensor b;      // [L, N]
    Tensor c;      // [L, N]
};

ScanInputs scan_inputs(const Tensor& u, const SsmParams& p);

/// Per channel d with h_0 = 0:
///   h_t = exp(delta_t,d * A_d) * h_{t-1} + delta_t,d * B_t * u_t,d
///   y_t,d = C_t . h_t + D_d * u_t,d
/// u, delta: [L, D]; b, c: [L, N]. Throws on length mismatch or delta <= 0.
Tensor selective_scan(const Tensor& u, const Tensor& delta, const Tensor& b, const Tensor& c, const SsmParams& p);

/// scan_inputs followed by selective_scan.
Tensor selective_scan(const Tensor& u, const SsmParams& p);

/// [D,H,W] -> [H*W, D] in the traversal order of `dir`.
Tensor grid_to_sequence(const Tensor& x, ScanDirection dir);

/// [H*W, D] -> [D,H,W], inverse of grid_to_sequence.
Tensor sequence_to_grid(const Tensor& y, ScanDirection dir, std::size_t h, std::size_t w);

/// Grid position (row-major index) visited at step t.
std::size_t scan_position(ScanDirection dir, std::size_t t, std::size_t h, std::size_t w);

using DirectionalSsm = std::array<SsmParams, 4>;

/// Sum over the four directions, accumulated in the order RowForward,
/// RowBackward, ColForward, ColBackward.
Tensor ssm_2d(const Tensor& x, const DirectionalSsm& p);

/// Weights of one vision state-space block on C channels with inner width eta*C.
struct VssmParams {
    NormParams ln_in;        // [C]
    LinearParams in_proj;    // [2*inner, C], first half X, second half Z
    ConvParams dwconv;       // [inner, 1, 3, 3]
    DirectionalSsm ssm;      // over inner channels
    NormParams ln_out;       // [inner]
    LinearParams out_proj;   // [C, inner]
};

/// ssm_2d(SiLU(DWConv(x))), the shared core of the VSSM block and the FGM streams.
Tensor ssm_branch(const Tensor& x, const ConvParams& dwconv, const DirectionalSsm& ssm);

/// out = x + OutProj(LN(ssm_2d(SiLU(DWConv(X)))) * SiLU(Z)), [X; Z] = InProj(LN(x)).
Tensor vssm_block(const Tensor& x, const VssmParams& p);

}  // namespace isfm
