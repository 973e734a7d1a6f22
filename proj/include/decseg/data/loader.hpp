#pragma once

#include "decseg/core/rng.hpp"
#include "decseg/data/dataset.hpp"

namespace decseg {

// A loaded batch. Masks are defined for labeled and test splits.
struct ImageBatch {
  Tensor<float> images;  // [B,3,S,S] in [0,1]
  Tensor<int> masks;     // [B,S,S] in {0,1}; undefined for unlabeled batches
  bool is_labeled = false;
  std::vector<std::string> stems;
};

// Cyclic, seeded batch source. Purely functional in the step index: batch k
// is fully determined by (spec, split, batch size, seed, k), so training can
// resume mid-epoch by arithmetic alone. Samples are drawn from per-epoch
// Fisher-Yates shuffles of the split.
class BatchLoader {
 public:
  BatchLoader(DatasetSpec spec, Split split, int batch_size, std::uint64_t seed)
      : spec_(std::move(spec)),
        split_(split),
        batch_size_(batch_size),
        seed_(seed),
        stems_(read_split(split_list(spec_, split))) {
    DECSEG_CHECK(batch_size_ >= 1, "batch_size must be >= 1, got " << batch_size_);
    // Fail on unresolvable stems up front, not at some arbitrary step.
    const bool want_mask = split_ != Split::unlabeled;
    for (const auto& stem : stems_) {
      detail::resolve_image(spec_, stem);
      if (want_mask) detail::resolve_mask(spec_, stem);
    }
  }

  i64 size() const { return (i64)stems_.size(); }
  const std::vector<std::string>& stems() const { return stems_; }

  ImageBatch batch_at(i64 step) const {
    DECSEG_CHECK(step >= 0, "batch step must be non-negative, got " << step);
    const bool want_mask = split_ != Split::unlabeled;
    const int S = spec_.image_size;
    ImageBatch out;
    out.is_labeled = split_ == Split::labeled;
    out.images = Tensor<float>({batch_size_, 3, S, S});
    if (want_mask) out.masks = Tensor<int>({batch_size_, S, S});

    const i64 n = (i64)stems_.size();
    i64 cached_epoch = -1;
    std::vector<i64> perm;
    for (int i = 0; i < batch_size_; ++i) {
      const i64 pos = step * batch_size_ + i;
      const i64 epoch = pos / n;
      if (epoch != cached_epoch) {
        perm = epoch_permutation(epoch);
        cached_epoch = epoch;
      }
      const auto& stem = stems_[(size_t)perm[(size_t)(pos % n)]];
      out.stems.push_back(stem);
      auto sample = load_sample(spec_, stem, want_mask);
      std::copy(sample.image.data(), sample.image.data() + sample.image.numel(),
                out.images.data() + (i64)i * 3 * S * S);
      if (want_mask) {
        std::copy(sample.mask->data(), sample.mask->data() + sample.mask->numel(),
                  out.masks.data() + (i64)i * S * S);
      }
    }
    return out;
  }

 private:
  std::vector<i64> epoch_permutation(i64 epoch) const {
    std::vector<i64> perm(stems_.size());
    for (size_t i = 0; i < perm.size(); ++i) perm[i] = (i64)i;
    Rng rng(seed_stream(seed_, rng_tag("loader-epoch"), (std::uint64_t)epoch));
    rng.shuffle(perm);
    return perm;
  }

  DatasetSpec spec_;
  Split split_;
  int batch_size_;
  std::uint64_t seed_;
  std::vector<std::string> stems_;
};

}  // namespace decseg
