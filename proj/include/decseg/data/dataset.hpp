#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "decseg/autograd/resample.hpp"
#include "decseg/core/common.hpp"
#include "decseg/data/image_io.hpp"

namespace decseg {

// On-disk dataset: `images/<stem>.{png,jpg,jpeg}` plus `masks/<stem>.png` for
// labeled/test stems, and one text file of stems per split.
struct DatasetSpec {
  std::filesystem::path root;
  std::filesystem::path labeled_list;
  std::filesystem::path unlabeled_list;
  std::filesystem::path test_list;
  int image_size = 352;

  // The conventional layout: split files directly under the root.
  static DatasetSpec standard(std::filesystem::path root_dir, int image_size) {
    DatasetSpec s;
    s.root = root_dir;
    s.labeled_list = root_dir / "labeled.txt";
    s.unlabeled_list = root_dir / "unlabeled.txt";
    s.test_list = root_dir / "test.txt";
    s.image_size = image_size;
    return s;
  }
};

enum class Split { labeled, unlabeled, test };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::labeled: return "labeled";
    case Split::unlabeled: return "unlabeled";
    default: return "test";
  }
}

// One stem per LF-terminated line; blank lines ignored, CR stripped.
inline std::vector<std::string> read_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  DECSEG_CHECK(in.good(), "cannot open split file: " << path.string());
  std::vector<std::string> stems;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) stems.push_back(line);
  }
  DECSEG_CHECK(!stems.empty(), "split file is empty: " << path.string());
  return stems;
}

inline const std::filesystem::path& split_list(const DatasetSpec& spec, Split split) {
  switch (split) {
    case Split::labeled: return spec.labeled_list;
    case Split::unlabeled: return spec.unlabeled_list;
    default: return spec.test_list;
  }
}

namespace detail {

inline std::filesystem::path resolve_image(const DatasetSpec& spec, const std::string& stem) {
  for (const char* ext : {".png", ".jpg", ".jpeg"}) {
    auto p = spec.root / "images" / (stem + ext);
    if (std::filesystem::exists(p)) return p;
  }
  DECSEG_CHECK(false, "no image found for stem '" << stem << "' under "
                                                  << (spec.root / "images").string());
  return {};
}

inline std::filesystem::path resolve_mask(const DatasetSpec& spec, const std::string& stem) {
  auto p = spec.root / "masks" / (stem + ".png");
  DECSEG_CHECK(std::filesystem::exists(p),
               "no mask found for stem '" << stem << "' under "
                                          << (spec.root / "masks").string());
  return p;
}

}  // namespace detail

// One sample at the configured square size: image resampled bilinearly, mask
// (when requested) with nearest neighbor to keep labels in {0,1}.
struct Sample {
  Tensor<float> image;        // [3,S,S]
  std::optional<Tensor<int>> mask;  // [S,S]
};

inline Sample load_sample(const DatasetSpec& spec, const std::string& stem, bool want_mask) {
  Sample out;
  const int S = spec.image_size;
  auto img = load_image_rgb(detail::resolve_image(spec, stem));
  out.image = (img.size(1) == S && img.size(2) == S) ? img : resize_bilinear_chw(img, S, S);
  if (want_mask) {
    auto mask = load_mask(detail::resolve_mask(spec, stem));
    out.mask = (mask.size(0) == S && mask.size(1) == S) ? mask : resize_nearest(mask, S, S);
  }
  return out;
}

// Eager validation of the spec's structural invariants: list files readable,
// stems resolvable, labeled and unlabeled splits disjoint.
inline void validate_spec(const DatasetSpec& spec) {
  DECSEG_CHECK(spec.image_size > 0 && spec.image_size % 32 == 0,
               "image_size must be a positive multiple of 32, got " << spec.image_size);
  const auto labeled = read_split(spec.labeled_list);
  const auto unlabeled = std::filesystem::exists(spec.unlabeled_list)
                             ? read_split(spec.unlabeled_list)
                             : std::vector<std::string>{};
  const auto test = read_split(spec.test_list);
  std::set<std::string> labeled_set(labeled.begin(), labeled.end());
  for (const auto& stem : unlabeled) {
    DECSEG_CHECK(!labeled_set.count(stem),
                 "stem '" << stem << "' appears in both labeled and unlabeled splits");
  }
  for (const auto& stem : labeled) {
    detail::resolve_image(spec, stem);
    detail::resolve_mask(spec, stem);
  }
  for (const auto& stem : unlabeled) detail::resolve_image(spec, stem);
  for (const auto& stem : test) {
    detail::resolve_image(spec, stem);
    detail::resolve_mask(spec, stem);
  }
}

}  // namespace decseg
