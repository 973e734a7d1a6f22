#pragma once

#include <fstream>
#include <iomanip>

#include "decseg/data/loader.hpp"
#include "decseg/eval/metrics.hpp"
#include "decseg/net/model.hpp"

namespace decseg {

// Score the model on the spec's test split at the spec's image size. The
// fused head drives predictions when the model has one, the original-scale
// head otherwise (ablated configurations). When csv_path is non-empty a
// per-image row plus one aggregate row are written there.
template <class T>
MetricsReport eval_dataset(DecSegModel<T>& model, const DatasetSpec& spec,
                           const std::filesystem::path& csv_path = {}) {
  const auto stems = read_split(spec.test_list);
  const int S = spec.image_size;
  model.set_training(false);
  NoGradGuard guard;

  MetricsReport report;
  std::ostringstream csv;
  csv.precision(17);
  csv << "stem,dice,iou,mae,wfb,smeasure\n";
  for (const auto& stem : stems) {
    auto sample = load_sample(spec, stem, true);
    Tensor<T> x({1, 3, S, S});
    for (i64 i = 0; i < x.numel(); ++i) x[i] = (T)sample.image[i];
    auto out = model.infer(constant(x));

    // Foreground probability plane -> double map for the metric battery.
    Tensor<double> pred({S, S});
    const T* fg = out.probs->value.data() + (i64)S * S;  // [1,2,S,S], channel 1
    for (i64 i = 0; i < pred.numel(); ++i) pred[i] = (double)fg[i];
    auto scores = eval_pair(pred, *sample.mask);
    report.add(scores);
    csv << stem << ',' << scores.dice << ',' << scores.iou << ',' << scores.mae << ','
        << scores.wfb << ',' << scores.smeasure << "\n";
  }
  csv << "mean," << report.dice << ',' << report.iou << ',' << report.mae << ','
      << report.wfb << ',' << report.smeasure << "\n";

  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::binary);
    DECSEG_CHECK(out.good(), "cannot write metrics CSV: " << csv_path.string());
    out << csv.str();
  }
  return report;
}

}  // namespace decseg
