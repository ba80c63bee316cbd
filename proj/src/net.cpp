#include "isfm/net.hpp"

#include <algorithm>
#include <string>

#include "isfm/weights.hpp"

namespace isfm {

namespace {

void emit(const Probe& probe, std::string_view name, const Tensor& t) {
    if (probe) probe(name, t);
}

class Binder {
public:
    Binder(const WeightArchive& a, const IsfmConfig& cfg) : a_(a) {
        for (const auto& e : parameter_manifest(cfg)) {
            const Tensor& t = a_.at(e.name);
            if (t.shape() != e.shape) {
                throw ConfigError("weights: '" + e.name + "' has shape " + to_string(t.shape()) + ", expected " +
                                  to_string(e.shape));
            }
        }
    }

    Tensor get(const std::string& name) const { return a_.at(name); }

    ConvParams conv(const std::string& name) const {
        return ConvParams::same(get(name + ".weight"), get(name + ".bias"));
    }
    LinearParams linear(const std::string& name, bool bias = true) const {
        LinearParams p{get(name + ".weight"), std::nullopt};
        if (bias) p.bias = get(name + ".bias");
        return p;
    }
    NormParams norm(const std::string& name) const { return {get(name + ".gain"), get(name + ".shift")}; }

    DirectionalSsm ssm(const std::string& prefix) const {
        static const char* dirs[] = {"row_fwd", "row_bwd", "col_fwd", "col_bwd"};
        DirectionalSsm out;
        for (std::size_t k = 0; k < 4; ++k) {
            const std::string p = prefix + "." + dirs[k];
            out[k] = SsmParams{get(p + ".a_log"),          linear(p + ".dt_down", false), linear(p + ".dt_up"),
                               linear(p + ".b_proj", false), linear(p + ".c_proj", false),  get(p + ".d_skip")};
        }
        return out;
    }

    VssmParams vssm(const std::string& p) const {
        return {norm(p + ".ln_in"), linear(p + ".in_proj"), conv(p + ".dwconv"),
                ssm(p + ".ssm"),    norm(p + ".ln_out"),    linear(p + ".out_proj")};
    }

    MseParams mse(const std::string& p, std::size_t blocks) const {
        MseParams m{conv(p + ".conv1"), conv(p + ".conv2"), {}};
        for (std::size_t k = 0; k < blocks; ++k) m.blocks.push_back(vssm(p + ".vssm" + std::to_string(k)));
        return m;
    }

    FgmStreamParams stream(const std::string& p) const {
        return {norm(p + ".ln"), linear(p + ".in_proj"), conv(p + ".dwconv"), ssm(p + ".ssm"), norm(p + ".ln_h")};
    }

private:
    const WeightArchive& a_;
};

}  // namespace

IsfmWeights bind_weights(const WeightArchive& archive, const IsfmConfig& cfg) {
    const Binder b(archive, cfg);
    IsfmWeights w;
    w.cfg = cfg;
    w.mse_ir = b.mse("mse.ir", cfg.num_vssm);
    w.mse_vi = b.mse("mse.vi", cfg.num_vssm);
    w.mff.lffb = {b.conv("mff.lffb.reduce"), b.conv("mff.lffb.attn"), b.conv("mff.lffb.dw3"),
                  b.conv("mff.lffb.pw3"),    b.conv("mff.lffb.dw5"),  b.conv("mff.lffb.pw5"),
                  b.conv("mff.lffb.fuse")};
    w.mff.hffb = {b.conv("mff.hffb.reduce"), b.conv("mff.hffb.s1"), b.conv("mff.hffb.s2"), b.conv("mff.hffb.fuse")};
    w.mff.reproject = b.conv("mff.reproject");
    w.fgm.ir = b.stream("fgm.ir");
    w.fgm.vi = b.stream("fgm.vi");
    w.fgm.out_proj = b.linear("fgm.out_proj");
    w.fgm.s1 = b.get("fgm.s1")[0];
    w.fgm.s2 = b.get("fgm.s2")[0];
    w.fgg = {b.linear("fgg.global"),  b.norm("fgg.global_ln"), b.linear("fgg.fc"),
             b.linear("fgg.gate_ir"), b.norm("fgg.gate_ir_ln"), b.linear("fgg.gate_vi"),
             b.norm("fgg.gate_vi_ln")};
    w.head = {b.conv("head.conv1"), b.conv("head.conv2")};
    return w;
}

FrequencyContext FrequencyContext::zeros(std::size_t channels, std::size_t h, std::size_t w) {
    const Shape band{channels, (h + 1) / 2, (w + 1) / 2};
    return {WaveletBands{Tensor(band), Tensor(band), Tensor(band), Tensor(band), h, w}, Tensor({channels, h, w})};
}

Tensor mse_forward(const Tensor& img, const MseParams& p, const Probe& probe) {
    require_chw(img, "mse_forward");
    if (img.channels() != 1) {
        throw DimensionError("mse_forward: expects a single-channel image, got " + to_string(img.shape()));
    }
    Tensor f = silu(conv2d(silu(conv2d(img, p.conv1)), p.conv2));
    emit(probe, "mse.shallow", f);
    for (const auto& block : p.blocks) {
        f = vssm_block(f, block);
        emit(probe, "mse.vssm", f);
    }
    return f;
}

Tensor mse_forward(const Tensor& img, Branch branch, const IsfmWeights& w, const Probe& probe) {
    return mse_forward(img, branch == Branch::Ir ? w.mse_ir : w.mse_vi, probe);
}

Tensor lffb(const Tensor& ll_ir, const Tensor& ll_vi, const LffbParams& p, const Probe& probe) {
    const Tensor x = silu(conv2d(add(ll_ir, ll_vi), p.reduce));
    const Tensor pooled = concat_channels(channel_pool(x, PoolKind::Max), channel_pool(x, PoolKind::Avg));
    const Tensor attn = sigmoid(conv2d(pooled, p.attn));
    emit(probe, "lffb.attention", attn);
    const Tensor u1 = silu(conv2d(depthwise_conv2d(x, p.dw3), p.pw3));
    const Tensor u2 = silu(conv2d(depthwise_conv2d(x, p.dw5), p.pw5));
    Tensor u = add(u1, u2);
    const std::size_t n = u.plane_size();
    for (std::size_t c = 0; c < u.channels(); ++c) {
        auto uc = u.channel(c);
        auto xc = x.channel(c);
        for (std::size_t i = 0; i < n; ++i) uc[i] = uc[i] * attn[i] + xc[i];
    }
    return silu(conv2d(u, p.fuse));
}

Tensor hffb(const Tensor& hf_ir, const Tensor& hf_vi, const HffbParams& p, const Probe& probe) {
    const Tensor x = silu(conv2d(add(hf_ir, hf_vi), p.reduce));
    const Tensor s1 = silu(conv2d(sub(x, pool2d(x, PoolKind::Avg, 3)), p.s1));
    const Tensor s2 = silu(conv2d(sub(x, pool2d(x, PoolKind::Avg, 5)), p.s2));
    emit(probe, "hffb.s1", s1);
    emit(probe, "hffb.s2", s2);
    return silu(conv2d(add(add(s1, s2), x), p.fuse));
}

FrequencyContext mff(const Tensor& f_ir, const Tensor& f_vi, const MffParams& p, const Probe& probe) {
    require_same_shape(f_ir, f_vi, "mff");
    const WaveletBands a = dwt2_padded(f_ir);
    const WaveletBands b = dwt2_padded(f_vi);
    FrequencyContext ctx;
    ctx.bands.source_h = a.source_h;
    ctx.bands.source_w = a.source_w;
    ctx.bands.ll = lffb(a.ll, b.ll, p.lffb, probe);
    ctx.bands.lh = hffb(a.lh, b.lh, p.hffb, probe);
    ctx.bands.hl = hffb(a.hl, b.hl, p.hffb, probe);
    ctx.bands.hh = hffb(a.hh, b.hh, p.hffb, probe);
    emit(probe, "mff.ll", ctx.bands.ll);
    emit(probe, "mff.lh", ctx.bands.lh);
    emit(probe, "mff.hl", ctx.bands.hl);
    emit(probe, "mff.hh", ctx.bands.hh);
    ctx.spatial = conv2d(idwt2(ctx.bands), p.reproject);
    emit(probe, "mff.spatial", ctx.spatial);
    return ctx;
}

Gates fgg(const Tensor& z_ir, const Tensor& z_vi, const FrequencyContext& ctx, const FggParams& p,
          const Probe& probe) {
    require_same_shape(z_ir, z_vi, "fgg");
    const std::size_t inner = z_ir.channels();
    Tensor zg = layer_norm(linear(concat_channels(z_ir, z_vi), p.global), p.global_ln);
    emit(probe, "fgg.z_global", zg);

    const WaveletBands& b = ctx.bands;
    const Tensor ff = concat_channels(b.ll, add(add(b.lh, b.hl), b.hh));
    const Tensor zf = global_avg_pool(linear(ff, p.fc));
    if (zf.size() != zg.channels()) {
        throw DimensionError("fgg: frequency statistics width " + std::to_string(zf.size()) + " vs " +
                             std::to_string(zg.channels()) + " gate channels");
    }
    emit(probe, "fgg.z_f", zf);
    for (std::size_t c = 0; c < zg.channels(); ++c) {
        const float s = zf[c];
        for (float& v : zg.channel(c)) v = s * v + v;
    }
    emit(probe, "fgg.z_g", zg);

    Gates g;
    g.ir = silu(layer_norm(linear(slice_channels(zg, 0, inner), p.gate_ir), p.gate_ir_ln));
    g.vi = silu(layer_norm(linear(slice_channels(zg, inner, inner), p.gate_vi), p.gate_vi_ln));
    emit(probe, "fgg.g_ir", g.ir);
    emit(probe, "fgg.g_vi", g.vi);
    return g;
}

Tensor fgm(const Tensor& f_ir, const Tensor& f_vi, const FrequencyContext& ctx, const FgmParams& p,
           const FggParams& gate, bool use_gate, const Probe& probe) {
    require_same_shape(f_ir, f_vi, "fgm");
    auto stream = [](const Tensor& f, const FgmStreamParams& s, Tensor& z) {
        const Tensor xz = linear(layer_norm(f, s.ln), s.in_proj);
        const std::size_t inner = xz.channels() / 2;
        z = slice_channels(xz, inner, inner);
        return layer_norm(ssm_branch(slice_channels(xz, 0, inner), s.dwconv, s.ssm), s.ln_h);
    };
    Tensor z_ir;
    Tensor z_vi;
    const Tensor h_ir = stream(f_ir, p.ir, z_ir);
    const Tensor h_vi = stream(f_vi, p.vi, z_vi);
    emit(probe, "fgm.h_ir", h_ir);
    emit(probe, "fgm.h_vi", h_vi);

    Tensor fh;
    if (use_gate) {
        const Gates g = fgg(z_ir, z_vi, ctx, gate, probe);
        fh = add(mul(h_ir, g.ir), mul(h_vi, g.vi));
    } else {
        fh = add(h_ir, h_vi);
    }
    Tensor out = linear(fh, p.out_proj);
    auto o = out.data();
    auto a = f_ir.data();
    auto b = f_vi.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = o[i] + p.s1 * a[i] + p.s2 * b[i];
    emit(probe, "fgm.out", out);
    return out;
}

Tensor isfm_forward(const ModalityPair& pair, const IsfmWeights& w, const IsfmConfig& cfg, const Probe& probe) {
    cfg.validate();
    if (!cfg.same_architecture(w.cfg)) {
        throw ConfigError("isfm_forward: weights were bound for " + w.cfg.describe() + ", not " + cfg.describe());
    }
    require_chw(pair.ir, "isfm_forward");
    require_chw(pair.vi_y, "isfm_forward");
    if (pair.ir.shape() != pair.vi_y.shape() || pair.ir.channels() != 1) {
        throw DimensionError("isfm_forward: infrared " + to_string(pair.ir.shape()) + " and visible " +
                             to_string(pair.vi_y.shape()) + " must both be [1,H,W] of equal size");
    }
    const std::size_t H = pair.ir.height();
    const std::size_t W = pair.ir.width();

    const Tensor f_ir = mse_forward(pair.ir, w.mse_ir, probe);
    emit(probe, "mse.ir", f_ir);
    const Tensor f_vi = mse_forward(pair.vi_y, w.mse_vi, probe);
    emit(probe, "mse.vi", f_vi);

    const FrequencyContext ctx =
        cfg.enable_mff ? mff(f_ir, f_vi, w.mff, probe) : FrequencyContext::zeros(cfg.channels, H, W);

    const Tensor spa = cfg.enable_fgm ? fgm(f_ir, f_vi, ctx, w.fgm, w.fgg, cfg.enable_fgg, probe) : add(f_ir, f_vi);
    emit(probe, "fuse.spatial", spa);

    const Tensor hidden = silu(conv2d(concat_channels(spa, ctx.spatial), w.head.conv1));
    emit(probe, "head.hidden", hidden);
    Tensor out = sigmoid(conv2d(hidden, w.head.conv2));
    emit(probe, "output", out);
    return out;
}

}  // namespace isfm
