#pragma once

#include <functional>
#include <string_view>
#include <vector>

#include "isfm/config.hpp"
#include "isfm/kernels.hpp"
#include "isfm/ssm.hpp"
#include "isfm/tensor.hpp"
#include "isfm/wavelet.hpp"

namespace isfm {

class WeightArchive;

/// Infrared image and visible YCbCr planes, each [1,H,W] in [0,1].
struct ModalityPair {
    Tensor ir;
    Tensor vi_y;
    Tensor vi_cb;
    Tensor vi_cr;
};

enum class Branch { Ir, Vi };

/// Fused wavelet bands (each [C, ceil(H/2), ceil(W/2)]) and their spatial reprojection [C,H,W].
struct FrequencyContext {
    WaveletBands bands;
    Tensor spatial;

    /// All-zero context used when the frequency path is disabled.
    static FrequencyContext zeros(std::size_t channels, std::size_t h, std::size_t w);
};

/// Receives named intermediate tensors during a forward pass.
using Probe = std::function<void(std::string_view, const Tensor&)>;

struct MseParams {
    ConvParams conv1;  // [C,1,3,3]
    ConvParams conv2;  // [C,C,3,3]
    std::vector<VssmParams> blocks;
};

struct LffbParams {
    ConvParams reduce;  // 1x1
    ConvParams attn;    // [1,2,3,3]
    ConvParams dw3;
    ConvParams pw3;
    ConvParams dw5;
    ConvParams pw5;
    ConvParams fuse;
};

/// One set shared by the LH, HL and HH bands.
struct HffbParams {
    ConvParams reduce;
    ConvParams s1;
    ConvParams s2;
    ConvParams fuse;
};

struct MffParams {
    LffbParams lffb;
    HffbParams hffb;
    ConvParams reproject;  // 3x3, C -> C
};

struct FgmStreamParams {
    NormParams ln;          // [C]
    LinearParams in_proj;   // [2*inner, C]; X then Z
    ConvParams dwconv;      // [inner,1,3,3]
    DirectionalSsm ssm;
    NormParams ln_h;        // [inner]
};

struct FggParams {
    LinearParams global;      // [2*inner, 2*inner]
    NormParams global_ln;     // [2*inner]
    LinearParams fc;          // [2*inner, 2C]
    LinearParams gate_ir;     // [inner, inner]
    NormParams gate_ir_ln;
    LinearParams gate_vi;
    NormParams gate_vi_ln;
};

struct FgmParams {
    FgmStreamParams ir;
    FgmStreamParams vi;
    LinearParams out_proj;  // [C, inner]
    float s1 = 1.0f;
    float s2 = 1.0f;
};

struct HeadParams {
    ConvParams conv1;  // [C,2C,3,3]
    ConvParams conv2;  // [1,C,3,3]
};

struct IsfmWeights {
    IsfmConfig cfg;
    MseParams mse_ir;
    MseParams mse_vi;
    MffParams mff;
    FggParams fgg;
    FgmParams fgm;
    HeadParams head;
};

/// Builds typed parameters from an archive. Throws ConfigError naming the first
/// missing or mis-shaped tensor.
IsfmWeights bind_weights(const WeightArchive& archive, const IsfmConfig& cfg);

Tensor mse_forward(const Tensor& img, const MseParams& p, const Probe& probe = {});
Tensor mse_forward(const Tensor& img, Branch branch, const IsfmWeights& w, const Probe& probe = {});

Tensor lffb(const Tensor& ll_ir, const Tensor& ll_vi, const LffbParams& p, const Probe& probe = {});
Tensor hffb(const Tensor& hf_ir, const Tensor& hf_vi, const HffbParams& p, const Probe& probe = {});

FrequencyContext mff(const Tensor& f_ir, const Tensor& f_vi, const MffParams& p, const Probe& probe = {});

struct Gates {
    Tensor ir;
    Tensor vi;
};

Gates fgg(const Tensor& z_ir, const Tensor& z_vi, const FrequencyContext& ctx, const FggParams& p,
          const Probe& probe = {});

/// Frequency-guided fusion of two [C,H,W] maps. With use_gate false both gates are ones.
Tensor fgm(const Tensor& f_ir, const Tensor& f_vi, const FrequencyContext& ctx, const FgmParams& p,
           const FggParams& gate, bool use_gate, const Probe& probe = {});

/// Full fusion of the luma planes. Returns [1,H,W] in [0,1].
Tensor isfm_forward(const ModalityPair& pair, const IsfmWeights& w, const IsfmConfig& cfg,
                    const Probe& probe = {});

}  // namespace isfm
