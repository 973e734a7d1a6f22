#pragma once

#include <memory>
#include <sstream>

#include "decseg/net/cfa.hpp"
#include "decseg/net/dcf.hpp"
#include "decseg/net/decoder.hpp"
#include "decseg/net/encoder.hpp"
#include "decseg/net/generator.hpp"
#include "decseg/nn/checkpoint.hpp"

namespace decseg {

// Structural configuration. Ablation flags that change which modules exist
// live here; pure loss-term switches live with the training config.
struct ModelConfig {
  EncoderConfig encoder;
  bool use_cfa = true;
  bool use_fusion = true;  // cross-scale fusion bank + fused decoder
  bool use_gen = true;     // cross-scale generators (needs use_fusion's decoder)
  FusionKind fusion = FusionKind::dual_cross;
  std::vector<int> gen_channels{32, 64, 128};
  std::uint64_t seed = 1;

  void validate() const {
    DECSEG_CHECK(!use_gen || use_fusion,
                 "generators consume fused-decoder logits; enable the fused decoder "
                 "or disable the generators");
    DECSEG_CHECK(encoder.cfa_out_channels % encoder.reduction_ratio == 0,
                 "aggregation width " << encoder.cfa_out_channels
                                      << " must be divisible by reduction ratio "
                                      << encoder.reduction_ratio);
  }
};

// Dual-scale segmentation network: a shared encoder consumed at the original
// and half scales, cross-level aggregation on the skips, one decoder per
// scale, a cross-scale fusion bank feeding a fused decoder, and two generators
// that map fused logits back to images for the cross-generative objective.
template <class T>
class DecSegModel : public Module<T> {
 public:
  explicit DecSegModel(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const auto& sc = cfg_.encoder.stage_channels;

    // Every submodule draws from its own seed stream, so the presence of one
    // module never shifts another's initialization (ablations stay bit-
    // comparable to the full model).
    {
      Rng rng(seed_stream(cfg_.seed, rng_tag("encoder")));
      encoder_ = make_encoder<T>(cfg_.encoder, rng);
      this->register_module("encoder", encoder_.get());
    }
    if (cfg_.use_cfa) {
      Rng rng(seed_stream(cfg_.seed, rng_tag("cfa")));
      for (int i = 0; i < 4; ++i) {
        cfa_[i] = std::make_unique<CfaFuse<T>>(sc[i], sc[i + 1], cfg_.encoder.cfa_out_channels,
                                               cfg_.encoder.reduction_ratio, rng);
        this->register_module("cfa.level" + std::to_string(i + 1), cfa_[i].get());
      }
    }
    std::array<int, 4> skip_ch;
    for (int i = 0; i < 4; ++i) {
      skip_ch[i] = cfg_.use_cfa ? cfg_.encoder.cfa_out_channels : sc[i];
    }
    {
      Rng rng(seed_stream(cfg_.seed, rng_tag("d1")));
      d1_ = std::make_unique<ScaleDecoder<T>>(sc, skip_ch, rng);
      this->register_module("d1", d1_.get());
    }
    {
      Rng rng(seed_stream(cfg_.seed, rng_tag("d2")));
      d2_ = std::make_unique<ScaleDecoder<T>>(sc, skip_ch, rng);
      this->register_module("d2", d2_.get());
    }
    if (cfg_.use_fusion) {
      Rng rng(seed_stream(cfg_.seed, rng_tag("dcf")));
      for (int i = 0; i < 5; ++i) {
        fusion_[i] = make_fusion<T>(cfg_.fusion, sc[i], rng);
        this->register_module("dcf.level" + std::to_string(i + 1), fusion_[i].get());
      }
      Rng rng_df(seed_stream(cfg_.seed, rng_tag("df")));
      df_ = std::make_unique<FusedDecoder<T>>(sc, rng_df);
      this->register_module("df", df_.get());
    }
    if (cfg_.use_gen) {
      Rng rng1(seed_stream(cfg_.seed, rng_tag("g1")));
      g1_ = std::make_unique<Generator<T>>(2, cfg_.gen_channels, 3, rng1);
      this->register_module("g1", g1_.get());
      Rng rng2(seed_stream(cfg_.seed, rng_tag("g2")));
      g2_ = std::make_unique<Generator<T>>(2, cfg_.gen_channels, 3, rng2);
      this->register_module("g2", g2_.get());
    }
  }

  const ModelConfig& config() const { return cfg_; }
  bool has_fused_decoder() const { return df_ != nullptr; }
  bool has_generators() const { return g1_ != nullptr; }

  // Run the encoder and produce the four skip features (aggregated when the
  // cross-level module is enabled, raw otherwise).
  std::pair<FeaturePyramid<T>, std::array<Var<T>, 4>> encode(const Var<T>& x) {
    auto pyr = encoder_->encode(x);
    std::array<Var<T>, 4> skips;
    for (int i = 0; i < 4; ++i) {
      skips[i] = cfg_.use_cfa ? cfa_[i]->forward(pyr.f[i], pyr.f[i + 1]) : pyr.f[i];
    }
    return {std::move(pyr), std::move(skips)};
  }

  // Full pass of one scale stream: encoder + that scale's decoder.
  std::pair<SegOutput<T>, DecoderState<T>> forward_scale(const Var<T>& x, Scale scale) {
    DECSEG_CHECK(scale != Scale::fused, "forward_scale handles the original/half streams");
    auto [pyr, skips] = encode(x);
    auto& dec = scale == Scale::original ? *d1_ : *d2_;
    return dec.forward(pyr, skips, scale);
  }

  // Cross-scale fusion of the two streams' decoder states + fused decoder.
  SegOutput<T> forward_fused(const DecoderState<T>& s1, const DecoderState<T>& s2, int out_h,
                             int out_w) {
    DECSEG_CHECK(df_ != nullptr, "fused decoder is disabled in this configuration");
    std::array<Var<T>, 5> fused;
    for (int i = 0; i < 5; ++i) fused[i] = fusion_[i]->fuse(s1.h[i], s2.h[i]);
    return df_->forward(fused, out_h, out_w);
  }

  Var<T> reconstruct(const Var<T>& logits, int which) {
    DECSEG_CHECK(g1_ != nullptr, "generators are disabled in this configuration");
    DECSEG_CHECK(which == 1 || which == 2, "generator index must be 1 or 2, got " << which);
    return which == 1 ? g1_->forward(logits) : g2_->forward(logits);
  }

  // Inference path: fused head when present, original-scale head otherwise.
  // Caller is responsible for eval mode / NoGradGuard.
  SegOutput<T> infer(const Var<T>& x) {
    if (!df_) {
      return forward_scale(x, Scale::original).first;
    }
    const Tensor<T> half = downsample_half_nchw(x->value);
    auto [s1, st1] = forward_scale(x, Scale::original);
    auto [s2, st2] = forward_scale(constant(half), Scale::half);
    (void)s1;
    (void)s2;
    return forward_fused(st1, st2, x->value.size(2), x->value.size(3));
  }

  FusionModule<T>& fusion_at(int level) {
    DECSEG_CHECK(fusion_[level - 1] != nullptr, "fusion bank is disabled");
    return *fusion_[level - 1];
  }
  CfaFuse<T>& cfa_at(int level) {
    DECSEG_CHECK(cfa_[level - 1] != nullptr, "cross-level aggregation is disabled");
    return *cfa_[level - 1];
  }
  Generator<T>& generator(int which) {
    DECSEG_CHECK(g1_ != nullptr, "generators are disabled");
    return which == 1 ? *g1_ : *g2_;
  }

  // Structural metadata stored in checkpoints so inference can rebuild the
  // exact architecture without the original config file.
  std::map<std::string, std::string> meta() const {
    std::map<std::string, std::string> m;
    m["backbone"] = backbone_name(cfg_.encoder.backbone);
    std::ostringstream sc;
    for (int i = 0; i < 5; ++i) sc << (i ? "," : "") << cfg_.encoder.stage_channels[i];
    m["stage_channels"] = sc.str();
    m["cfa_out_channels"] = std::to_string(cfg_.encoder.cfa_out_channels);
    m["reduction_ratio"] = std::to_string(cfg_.encoder.reduction_ratio);
    m["use_cfa"] = cfg_.use_cfa ? "true" : "false";
    m["use_fusion"] = cfg_.use_fusion ? "true" : "false";
    m["use_gen"] = cfg_.use_gen ? "true" : "false";
    m["fusion"] = fusion_name(cfg_.fusion);
    std::ostringstream gc;
    for (size_t i = 0; i < cfg_.gen_channels.size(); ++i) {
      gc << (i ? "," : "") << cfg_.gen_channels[i];
    }
    m["gen_channels"] = gc.str();
    return m;
  }

  static ModelConfig config_from_meta(const std::map<std::string, std::string>& meta) {
    auto get = [&](const std::string& k) -> const std::string& {
      auto it = meta.find(k);
      DECSEG_CHECK(it != meta.end(), "checkpoint metadata is missing '" << k << "'");
      return it->second;
    };
    ModelConfig cfg;
    cfg.encoder.backbone = backbone_from_name(get("backbone"));
    {
      std::istringstream ss(get("stage_channels"));
      std::string tok;
      for (int i = 0; i < 5; ++i) {
        DECSEG_CHECK(std::getline(ss, tok, ','), "bad stage_channels in checkpoint metadata");
        cfg.encoder.stage_channels[i] = std::stoi(tok);
      }
    }
    cfg.encoder.cfa_out_channels = std::stoi(get("cfa_out_channels"));
    cfg.encoder.reduction_ratio = std::stoi(get("reduction_ratio"));
    cfg.use_cfa = get("use_cfa") == "true";
    cfg.use_fusion = get("use_fusion") == "true";
    cfg.use_gen = get("use_gen") == "true";
    cfg.fusion = fusion_from_name(get("fusion"));
    cfg.gen_channels.clear();
    {
      std::istringstream ss(get("gen_channels"));
      std::string tok;
      while (std::getline(ss, tok, ',')) cfg.gen_channels.push_back(std::stoi(tok));
    }
    return cfg;
  }

 private:
  ModelConfig cfg_;
  std::unique_ptr<EncoderBase<T>> encoder_;
  std::array<std::unique_ptr<CfaFuse<T>>, 4> cfa_;
  std::unique_ptr<ScaleDecoder<T>> d1_, d2_;
  std::array<std::unique_ptr<FusionModule<T>>, 5> fusion_;
  std::unique_ptr<FusedDecoder<T>> df_;
  std::unique_ptr<Generator<T>> g1_, g2_;
};

}  // namespace decseg
