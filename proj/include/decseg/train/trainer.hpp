#pragma once

#include <cmath>
#include <fstream>
#include <optional>

#include "decseg/data/jitter.hpp"
#include "decseg/data/loader.hpp"
#include "decseg/data/synthetic.hpp"
#include "decseg/eval/evaluator.hpp"
#include "decseg/net/model.hpp"
#include "decseg/nn/checkpoint.hpp"
#include "decseg/nn/optim.hpp"
#include "decseg/train/config.hpp"
#include "decseg/train/losses.hpp"

namespace decseg {

namespace detail {

template <class T>
Tensor<T> to_scalar(const Tensor<float>& x) {
  if constexpr (std::is_same_v<T, float>) return x;
  Tensor<T> out(x.shape());
  for (i64 i = 0; i < x.numel(); ++i) out[i] = (T)x[i];
  return out;
}

}  // namespace detail

// The semi-supervised training loop: per step, a labeled dual-scale pass and
// (when unlabeled data exists) clean + perturbed dual-scale passes, loss
// assembly per the enabled switches, one SGD update over every parameter.
// Fully deterministic in (config, dataset): batches, jitter, and init all
// derive from the config seed, so reruns and resumes reproduce losses bit
// for bit.
template <class T = float>
class Trainer {
 public:
  explicit Trainer(TrainConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    spec_ = cfg_.dataset();
    validate_spec(spec_);
    model_ = std::make_unique<DecSegModel<T>>(cfg_.model());
    optim_.emplace(model_->named_parameters(), cfg_.momentum, cfg_.weight_decay);
    labeled_.emplace(spec_, Split::labeled, cfg_.batch_labeled,
                     seed_stream(cfg_.seed, rng_tag("labeled-loader")));
    if (std::filesystem::exists(spec_.unlabeled_list)) {
      unlabeled_.emplace(spec_, Split::unlabeled, cfg_.batch_unlabeled,
                         seed_stream(cfg_.seed, rng_tag("unlabeled-loader")));
    }
    if (!cfg_.resume.empty()) restore(cfg_.resume);
  }

  DecSegModel<T>& model() { return *model_; }
  const TrainConfig& config() const { return cfg_; }
  const DatasetSpec& dataset() const { return spec_; }
  i64 start_step() const { return start_step_; }
  bool semi_supervised() const { return unlabeled_.has_value(); }

  // One optimization step. `step` indexes from 0; the caller owns the loop so
  // tests can drive and compare individual steps.
  LossReport train_step(i64 step) {
    DECSEG_CHECK(step >= 0 && step < cfg_.max_iters,
                 "train_step: step " << step << " outside [0," << cfg_.max_iters << ")");
    model_->set_training(true);
    const int S = cfg_.image_size;
    LossTerms<T> terms;

    // Labeled trio: original scale, half scale, fused head when present.
    auto lb = labeled_->batch_at(step);
    auto x_l = constant(detail::to_scalar<T>(lb.images));
    auto x_l_half = constant(downsample_half_nchw(x_l->value));
    auto [s1_l, st1_l] = model_->forward_scale(x_l, Scale::original);
    auto [s2_l, st2_l] = model_->forward_scale(x_l_half, Scale::half);
    std::optional<SegOutput<T>> sf_l;
    if (model_->has_fused_decoder()) sf_l = model_->forward_fused(st1_l, st2_l, S, S);
    terms.supervised = supervised_loss(s1_l, s2_l, sf_l, lb.masks);
    if (cfg_.use_sc) terms.sc_labeled = scale_consistency_loss(s1_l, s2_l);

    if (unlabeled_) {
      // Unlabeled trios on the clean batch and on its photometric
      // perturbation; the half-scale input is Down(P(x)), i.e. perturb first.
      auto ub = unlabeled_->batch_at(step);
      const Tensor<float> x_p_f =
          perturb(ub.images, cfg_.jitter(), seed_stream(cfg_.seed, rng_tag("jitter"), step));
      const Tensor<T> x_u = detail::to_scalar<T>(ub.images);
      const Tensor<T> x_p = detail::to_scalar<T>(x_p_f);

      auto [su1, stu1] = model_->forward_scale(constant(x_u), Scale::original);
      auto [su2, stu2] =
          model_->forward_scale(constant(downsample_half_nchw(x_u)), Scale::half);
      auto [sp1, stp1] = model_->forward_scale(constant(x_p), Scale::original);
      auto [sp2, stp2] =
          model_->forward_scale(constant(downsample_half_nchw(x_p)), Scale::half);
      std::optional<SegOutput<T>> suf, spf;
      if (model_->has_fused_decoder()) {
        suf = model_->forward_fused(stu1, stu2, S, S);
        spf = model_->forward_fused(stp1, stp2, S, S);
      }
      if (cfg_.use_sc) {
        terms.sc_unlabeled = scale_consistency_loss(su1, su2);
        terms.sc_perturbed = scale_consistency_loss(sp1, sp2);
      }
      terms.perturbation = perturbation_consistency_loss(su1, sp1, su2, sp2, suf, spf);
      if (cfg_.use_cc) {
        // Crossed reconstructions: G1 maps the perturbed stream's fused
        // logits to the clean image, G2 maps clean logits to the perturbed
        // image. Gradients flow through the logits into the network.
        auto rec_from_p = model_->reconstruct(spf->logits, 1);
        auto rec_from_u = model_->reconstruct(suf->logits, 2);
        terms.cross_generative = cross_generative_loss(rec_from_p, x_u, rec_from_u, x_p);
      }
    }

    LossReport report;
    auto total = total_loss(terms, cfg_.weights(), report);
    check_finite(report, step);

    optim_->zero_grad();
    backward(total);
    optim_->step(poly_lr(step, cfg_.lr0, cfg_.max_iters, cfg_.poly_power));
    return report;
  }

  // Full run: cycles both splits for max_iters steps (continuing from a
  // resumed step when configured), logs per-step losses, checkpoints
  // periodically, evaluates the test split at the end. Returns the final
  // checkpoint path.
  std::filesystem::path fit() {
    namespace fs = std::filesystem;
    const fs::path out_dir = cfg_.out_dir;
    fs::create_directories(out_dir);
    const fs::path log_path = out_dir / "train_log.csv";
    const bool append = start_step_ > 0 && fs::exists(log_path);
    std::ofstream log(log_path, append ? std::ios::binary | std::ios::app : std::ios::binary);
    DECSEG_CHECK(log.good(), "cannot write training log: " << log_path.string());
    log.precision(17);
    if (!append) {
      log << "step,supervised,sc_labeled,sc_unlabeled,sc_perturbed,perturbation_consistency,"
             "cross_generative,total,lr\n";
    }

    fs::path last_ckpt;
    for (i64 step = start_step_; step < cfg_.max_iters; ++step) {
      const auto r = train_step(step);
      log << step << ',' << r.supervised << ',' << r.sc_labeled << ',' << r.sc_unlabeled
          << ',' << r.sc_perturbed << ',' << r.perturbation_consistency << ','
          << r.cross_generative << ',' << r.total << ','
          << poly_lr(step, cfg_.lr0, cfg_.max_iters, cfg_.poly_power) << "\n";
      const i64 done = step + 1;
      if (done % cfg_.checkpoint_every == 0 || done == cfg_.max_iters) {
        std::ostringstream name;
        name << "ckpt_" << std::setw(6) << std::setfill('0') << done << ".ckpt";
        last_ckpt = out_dir / name.str();
        save(last_ckpt, done);
        log.flush();
      }
    }
    eval_dataset(*model_, spec_, out_dir / "metrics.csv");
    return last_ckpt;
  }

  // Persist model parameters/buffers, optimizer velocities, and run metadata.
  void save(const std::filesystem::path& path, i64 completed_steps) const {
    CheckpointData<T> data;
    data.meta = model_->meta();
    data.meta["step"] = std::to_string(completed_steps);
    data.meta["image_size"] = std::to_string(cfg_.image_size);
    data.meta["config"] = serialize_config(cfg_);
    collect_state(*model_, data);
    for (const auto& [name, v] : optim_->velocities()) {
      data.tensors.emplace("optim." + name, v);
    }
    save_checkpoint(path, data);
  }

 private:
  void restore(const std::filesystem::path& path) {
    auto data = read_checkpoint<T>(path);
    load_state(*model_, data);
    for (auto& [name, v] : optim_->velocities()) {
      auto it = data.tensors.find("optim." + name);
      DECSEG_CHECK(it != data.tensors.end(),
                   "checkpoint '" << path.string() << "' has no optimizer state for '" << name
                                  << "'; cannot resume");
      DECSEG_CHECK(it->second.shape() == v.shape(),
                   "optimizer state '" << name << "' has shape "
                                       << shape_str(it->second.shape()) << ", expected "
                                       << shape_str(v.shape()));
      std::memcpy(v.data(), it->second.data(), sizeof(T) * v.numel());
    }
    auto it = data.meta.find("step");
    DECSEG_CHECK(it != data.meta.end(), "checkpoint '" << path.string() << "' has no step");
    start_step_ = std::stoll(it->second);
    DECSEG_CHECK(start_step_ >= 0 && start_step_ <= cfg_.max_iters,
                 "checkpoint step " << start_step_ << " outside this run's [0,"
                                    << cfg_.max_iters << "]");
  }

  static void check_finite(const LossReport& r, i64 step) {
    const std::pair<const char*, double> parts[] = {
        {"supervised", r.supervised},
        {"scale consistency (labeled)", r.sc_labeled},
        {"scale consistency (unlabeled)", r.sc_unlabeled},
        {"scale consistency (perturbed)", r.sc_perturbed},
        {"perturbation consistency", r.perturbation_consistency},
        {"cross-generative consistency", r.cross_generative},
        {"total", r.total}};
    for (const auto& [name, value] : parts) {
      DECSEG_CHECK(std::isfinite(value),
                   "non-finite loss at step " << step << ": " << name << " = " << value);
    }
  }

  TrainConfig cfg_;
  DatasetSpec spec_;
  std::unique_ptr<DecSegModel<T>> model_;
  std::optional<SgdOptimizer<T>> optim_;
  std::optional<BatchLoader> labeled_;
  std::optional<BatchLoader> unlabeled_;
  i64 start_step_ = 0;
};

}  // namespace decseg
