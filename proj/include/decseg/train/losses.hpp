#pragma once

#include <optional>

#include "decseg/autograd/loss_ops.hpp"
#include "decseg/autograd/resample.hpp"
#include "decseg/net/decoder.hpp"

namespace decseg {

// Per-step loss breakdown. Disabled terms stay exactly zero; `total` is the
// unit-weight sum of the enabled terms (scaled by any configured weights).
// The scale-consistency objective is reported per stream (labeled, unlabeled,
// perturbed).
struct LossReport {
  double supervised = 0.0;
  double sc_labeled = 0.0;
  double sc_unlabeled = 0.0;
  double sc_perturbed = 0.0;
  double perturbation_consistency = 0.0;
  double cross_generative = 0.0;
  double total = 0.0;
};

// Loss-term weights. The published recipe sums terms with unit weights; these
// stay configurable for sensitivity experiments.
struct LossWeights {
  double supervised = 1.0;
  double scale_consistency = 1.0;
  double perturbation_consistency = 1.0;
  double cross_generative = 1.0;
};

// Supervised objective: (CE + Dice)/2 per labeled head, summed over heads.
// Full-scale heads score against Y; the half-scale head scores against the
// nearest-neighbor half of Y. Pass the fused head only when it exists.
template <class T>
Var<T> supervised_loss(const SegOutput<T>& s1, const SegOutput<T>& s2,
                       const std::optional<SegOutput<T>>& sf, const Tensor<int>& y) {
  DECSEG_CHECK(y.dim() == 3, "supervised_loss: labels must be [B,H,W], got "
                                 << shape_str(y.shape()));
  const Tensor<int> y_half =
      resize_nearest(y, s2.logits->value.size(2), s2.logits->value.size(3));
  auto head = [](const SegOutput<T>& s, const Tensor<int>& labels) {
    return scale(add(cross_entropy_logits(s.logits, labels), dice_loss_fg(s.probs, labels)),
                 T(0.5));
  };
  auto loss = add(head(s1, y), head(s2, y_half));
  if (sf) loss = add(loss, head(*sf, y));
  return loss;
}

// Scale-enhanced consistency: each scale stream is supervised by the other
// stream's hard prediction (argmax pseudo-label, resampled to its grid with
// nearest neighbor). Labels are detached by construction: argmax is a value-
// level op, so no gradient flows through the pseudo-label side.
template <class T>
Var<T> scale_consistency_loss(const SegOutput<T>& s1, const SegOutput<T>& s2) {
  const int h1 = s1.logits->value.size(2), w1 = s1.logits->value.size(3);
  const int h2 = s2.logits->value.size(2), w2 = s2.logits->value.size(3);
  const Tensor<int> y1 = argmax_channels(s1.probs->value);  // [B,h1,w1]
  const Tensor<int> y2 = argmax_channels(s2.probs->value);  // [B,h2,w2]
  auto up_y2 = resize_nearest(y2, h1, w1);
  auto down_y1 = resize_nearest(y1, h2, w2);
  return add(cross_entropy_logits(s1.logits, up_y2), cross_entropy_logits(s2.logits, down_y1));
}

// Scale-aware perturbation consistency: the perturbed streams' probability
// maps must match the clean unlabeled streams', per scale and for the fused
// head when present.
template <class T>
Var<T> perturbation_consistency_loss(const SegOutput<T>& u1, const SegOutput<T>& p1,
                                     const SegOutput<T>& u2, const SegOutput<T>& p2,
                                     const std::optional<SegOutput<T>>& uf,
                                     const std::optional<SegOutput<T>>& pf) {
  auto loss = add(mse_loss(p1.probs, u1.probs), mse_loss(p2.probs, u2.probs));
  DECSEG_CHECK(uf.has_value() == pf.has_value(),
               "perturbation consistency: fused heads must be passed for both streams");
  if (uf) loss = add(loss, mse_loss(pf->probs, uf->probs));
  return loss;
}

// Cross-generative consistency: generator 1 maps the perturbed stream's fused
// logits back to the clean image, generator 2 maps the clean stream's fused
// logits to the perturbed image. Targets are constants (input images).
template <class T>
Var<T> cross_generative_loss(const Var<T>& recon_from_perturbed, const Tensor<T>& x_unlabeled,
                             const Var<T>& recon_from_clean, const Tensor<T>& x_perturbed) {
  auto t_u = constant(x_unlabeled);
  auto t_p = constant(x_perturbed);
  return add(mse_loss(recon_from_perturbed, t_u), mse_loss(recon_from_clean, t_p));
}

// Graph nodes for the step's enabled loss components. Absent members simply
// do not contribute.
template <class T>
struct LossTerms {
  std::optional<Var<T>> supervised;
  std::optional<Var<T>> sc_labeled;
  std::optional<Var<T>> sc_unlabeled;
  std::optional<Var<T>> sc_perturbed;
  std::optional<Var<T>> perturbation;
  std::optional<Var<T>> cross_generative;
};

// Weighted total; fills the report from the component scalars.
template <class T>
Var<T> total_loss(const LossTerms<T>& terms, const LossWeights& w, LossReport& report) {
  std::optional<Var<T>> total;
  auto accum = [&](const std::optional<Var<T>>& term, double weight, double& slot) {
    if (!term) return;
    slot = (double)(*term)->value[0];
    auto scaled = weight == 1.0 ? *term : scale(*term, (T)weight);
    total = total ? add(*total, scaled) : scaled;
  };
  report = LossReport{};
  accum(terms.supervised, w.supervised, report.supervised);
  accum(terms.sc_labeled, w.scale_consistency, report.sc_labeled);
  accum(terms.sc_unlabeled, w.scale_consistency, report.sc_unlabeled);
  accum(terms.sc_perturbed, w.scale_consistency, report.sc_perturbed);
  accum(terms.perturbation, w.perturbation_consistency, report.perturbation_consistency);
  accum(terms.cross_generative, w.cross_generative, report.cross_generative);
  DECSEG_CHECK(total.has_value(), "total_loss: no loss terms enabled");
  report.total = (double)(*total)->value[0];
  return *total;
}

}  // namespace decseg
