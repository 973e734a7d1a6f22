#pragma once

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "decseg/data/dataset.hpp"
#include "decseg/data/jitter.hpp"
#include "decseg/net/model.hpp"
#include "decseg/train/losses.hpp"

namespace decseg {

// Everything a training run needs, as one flat record. Serialized to and
// parsed from a plain `key = value` text file ('#' comments, blank lines
// allowed); the field list below is the authoritative key list.
struct TrainConfig {
  // Data.
  std::string data_root;
  int image_size = 352;
  std::string normalize = "unit";  // images stay in [0,1]; the only mode

  // Model structure. Zero / empty mean "backbone default".
  std::string backbone = "res2net50";
  std::string stage_channels;  // comma list of 5, e.g. "16,32,64,128,256"
  int cfa_out_channels = 0;
  int reduction_ratio = 0;
  std::string gen_channels = "32,64,128";
  std::string fusion = "dcf";  // dcf | basic

  // Ablation switches (graph-level: disabled parts contribute no parameters).
  bool use_sc = true;   // scale-enhanced consistency term
  bool use_dcf = true;  // cross-scale fusion bank + fused decoder
  bool use_cc = true;   // cross-generative consistency (needs use_dcf)
  bool use_cfa = true;  // cross-level feature aggregation on skips

  // Optimization.
  int max_iters = 10000;
  int batch_labeled = 3;
  int batch_unlabeled = 3;
  double lr0 = 0.01;
  double poly_power = 0.9;
  double momentum = 0.9;
  double weight_decay = 0.0001;

  // Loss weights.
  double loss_supervised = 1.0;
  double loss_scale_consistency = 1.0;
  double loss_perturbation_consistency = 1.0;
  double loss_cross_generative = 1.0;

  // Photometric perturbation strengths.
  double jitter_brightness = 0.4;
  double jitter_contrast = 0.4;
  double jitter_saturation = 0.4;
  double jitter_hue = 0.1;

  // Bookkeeping.
  std::uint64_t seed = 1;
  int checkpoint_every = 1000;
  std::string out_dir = "runs/decseg";
  std::string resume;  // checkpoint to continue from; empty = fresh run

  void validate() const {
    DECSEG_CHECK(!data_root.empty(), "config: data_root is required");
    DECSEG_CHECK(image_size > 0 && image_size % 32 == 0,
                 "config: image_size must be a positive multiple of 32, got " << image_size);
    DECSEG_CHECK(normalize == "unit",
                 "config: normalize only supports 'unit', got '" << normalize << "'");
    backbone_from_name(backbone);  // throws on unknown names
    fusion_from_name(fusion);
    DECSEG_CHECK(max_iters >= 1, "config: max_iters must be >= 1, got " << max_iters);
    DECSEG_CHECK(batch_labeled >= 1 && batch_unlabeled >= 1,
                 "config: batch sizes must be >= 1, got " << batch_labeled << "+"
                                                          << batch_unlabeled);
    DECSEG_CHECK(lr0 > 0.0, "config: lr0 must be positive, got " << lr0);
    DECSEG_CHECK(poly_power > 0.0, "config: poly_power must be positive");
    DECSEG_CHECK(momentum >= 0.0 && momentum < 1.0,
                 "config: momentum must lie in [0,1), got " << momentum);
    DECSEG_CHECK(weight_decay >= 0.0, "config: weight_decay must be non-negative");
    DECSEG_CHECK(!use_cc || use_dcf,
                 "config: use_cc needs the fused decoder; enable use_dcf");
    DECSEG_CHECK(loss_supervised >= 0.0 && loss_scale_consistency >= 0.0 &&
                     loss_perturbation_consistency >= 0.0 && loss_cross_generative >= 0.0,
                 "config: loss weights must be non-negative");
    DECSEG_CHECK(jitter_brightness >= 0.0 && jitter_contrast >= 0.0 &&
                     jitter_saturation >= 0.0,
                 "config: jitter strengths must be non-negative");
    DECSEG_CHECK(jitter_hue >= 0.0 && jitter_hue <= 0.5,
                 "config: jitter_hue must lie in [0, 0.5], got " << jitter_hue);
    DECSEG_CHECK(checkpoint_every >= 1, "config: checkpoint_every must be >= 1");
    DECSEG_CHECK(!out_dir.empty(), "config: out_dir is required");
  }

  DatasetSpec dataset() const { return DatasetSpec::standard(data_root, image_size); }

  JitterConfig jitter() const {
    return {jitter_brightness, jitter_contrast, jitter_saturation, jitter_hue};
  }

  LossWeights weights() const {
    LossWeights w;
    w.supervised = loss_supervised;
    w.scale_consistency = loss_scale_consistency;
    w.perturbation_consistency = loss_perturbation_consistency;
    w.cross_generative = loss_cross_generative;
    return w;
  }

  ModelConfig model() const {
    ModelConfig m;
    m.encoder = backbone_from_name(backbone) == Backbone::res2net50 ? EncoderConfig::res2net()
                                                                    : EncoderConfig::tiny();
    if (!stage_channels.empty()) {
      std::istringstream ss(stage_channels);
      std::string tok;
      for (int i = 0; i < 5; ++i) {
        DECSEG_CHECK(std::getline(ss, tok, ','),
                     "config: stage_channels needs 5 comma-separated values");
        m.encoder.stage_channels[i] = std::stoi(tok);
      }
      DECSEG_CHECK(!std::getline(ss, tok, ','),
                   "config: stage_channels needs 5 comma-separated values");
    }
    if (cfa_out_channels > 0) m.encoder.cfa_out_channels = cfa_out_channels;
    if (reduction_ratio > 0) m.encoder.reduction_ratio = reduction_ratio;
    m.use_cfa = use_cfa;
    m.use_fusion = use_dcf;
    m.use_gen = use_cc;
    m.fusion = fusion_from_name(fusion);
    m.gen_channels.clear();
    std::istringstream ss(gen_channels);
    std::string tok;
    while (std::getline(ss, tok, ',')) m.gen_channels.push_back(std::stoi(tok));
    DECSEG_CHECK(!m.gen_channels.empty(), "config: gen_channels must not be empty");
    m.seed = seed;
    m.validate();
    return m;
  }

  // Full-scale recipe presets.
  static TrainConfig fullscale_polyp() { return {}; }
  static TrainConfig fullscale_brain() {
    TrainConfig c;
    c.image_size = 256;
    return c;
  }
  // Desk-scale presets against the synthetic generator. The iteration budgets
  // were pinned by timed calibration runs (see tests/acceptance).
  static TrainConfig toy_supervised() {
    TrainConfig c;
    c.image_size = 96;
    c.backbone = "tiny_cnn";
    c.max_iters = 300;
    c.use_sc = false;
    c.use_cc = false;
    c.checkpoint_every = 300;
    c.seed = 1;
    return c;
  }
  static TrainConfig toy_semisup() {
    TrainConfig c;
    c.image_size = 96;
    c.backbone = "tiny_cnn";
    c.max_iters = 300;
    c.checkpoint_every = 300;
    c.seed = 1;
    return c;
  }
};

namespace detail {

// Shortest decimal form that parses back to the same double, so config
// round-trips are lossless and golden files stay human-readable.
inline std::string real_str(double v) {
  for (int prec = 6; prec <= 17; ++prec) {
    std::ostringstream ss;
    ss.precision(prec);
    ss << v;
    if (std::strtod(ss.str().c_str(), nullptr) == v) return ss.str();
  }
  return std::to_string(v);
}

inline bool bool_from(const std::string& key, const std::string& value) {
  DECSEG_CHECK(value == "true" || value == "false",
               "config: " << key << " expects true/false, got '" << value << "'");
  return value == "true";
}

inline i64 int_from(const std::string& key, const std::string& value) {
  size_t used = 0;
  i64 parsed = 0;
  try {
    parsed = std::stoll(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  DECSEG_CHECK(used == value.size() && !value.empty(),
               "config: " << key << " expects an integer, got '" << value << "'");
  return parsed;
}

inline std::uint64_t uint_from(const std::string& key, const std::string& value) {
  size_t used = 0;
  std::uint64_t parsed = 0;
  try {
    parsed = std::stoull(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  DECSEG_CHECK(used == value.size() && !value.empty() && value[0] != '-',
               "config: " << key << " expects a non-negative integer, got '" << value << "'");
  return parsed;
}

inline double real_from(const std::string& key, const std::string& value) {
  size_t used = 0;
  double parsed = 0.0;
  try {
    parsed = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  DECSEG_CHECK(used == value.size() && !value.empty(),
               "config: " << key << " expects a number, got '" << value << "'");
  return parsed;
}

}  // namespace detail

// Assign one key. Shared by the file parser and --override handling.
inline void set_config_key(TrainConfig& cfg, const std::string& key, const std::string& value) {
  using detail::bool_from;
  using detail::int_from;
  using detail::real_from;
  if (key == "data_root") cfg.data_root = value;
  else if (key == "image_size") cfg.image_size = (int)int_from(key, value);
  else if (key == "normalize") cfg.normalize = value;
  else if (key == "backbone") cfg.backbone = value;
  else if (key == "stage_channels") cfg.stage_channels = value;
  else if (key == "cfa_out_channels") cfg.cfa_out_channels = (int)int_from(key, value);
  else if (key == "reduction_ratio") cfg.reduction_ratio = (int)int_from(key, value);
  else if (key == "gen_channels") cfg.gen_channels = value;
  else if (key == "fusion") cfg.fusion = value;
  else if (key == "use_sc") cfg.use_sc = bool_from(key, value);
  else if (key == "use_dcf") cfg.use_dcf = bool_from(key, value);
  else if (key == "use_cc") cfg.use_cc = bool_from(key, value);
  else if (key == "use_cfa") cfg.use_cfa = bool_from(key, value);
  else if (key == "max_iters") cfg.max_iters = (int)int_from(key, value);
  else if (key == "batch_labeled") cfg.batch_labeled = (int)int_from(key, value);
  else if (key == "batch_unlabeled") cfg.batch_unlabeled = (int)int_from(key, value);
  else if (key == "lr0") cfg.lr0 = real_from(key, value);
  else if (key == "poly_power") cfg.poly_power = real_from(key, value);
  else if (key == "momentum") cfg.momentum = real_from(key, value);
  else if (key == "weight_decay") cfg.weight_decay = real_from(key, value);
  else if (key == "loss_supervised") cfg.loss_supervised = real_from(key, value);
  else if (key == "loss_scale_consistency") cfg.loss_scale_consistency = real_from(key, value);
  else if (key == "loss_perturbation_consistency")
    cfg.loss_perturbation_consistency = real_from(key, value);
  else if (key == "loss_cross_generative") cfg.loss_cross_generative = real_from(key, value);
  else if (key == "jitter_brightness") cfg.jitter_brightness = real_from(key, value);
  else if (key == "jitter_contrast") cfg.jitter_contrast = real_from(key, value);
  else if (key == "jitter_saturation") cfg.jitter_saturation = real_from(key, value);
  else if (key == "jitter_hue") cfg.jitter_hue = real_from(key, value);
  else if (key == "seed") cfg.seed = detail::uint_from(key, value);
  else if (key == "checkpoint_every") cfg.checkpoint_every = (int)int_from(key, value);
  else if (key == "out_dir") cfg.out_dir = value;
  else if (key == "resume") cfg.resume = value;
  else DECSEG_CHECK(false, "config: unknown key '" << key << "'");
}

// Apply a `key=value` override (the CLI's --override argument).
inline void apply_override(TrainConfig& cfg, const std::string& spec) {
  const auto eq = spec.find('=');
  DECSEG_CHECK(eq != std::string::npos && eq > 0,
               "override must look like key=value, got '" << spec << "'");
  auto trim = [](std::string s) {
    const auto a = s.find_first_not_of(" \t");
    const auto b = s.find_last_not_of(" \t");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
  };
  set_config_key(cfg, trim(spec.substr(0, eq)), trim(spec.substr(eq + 1)));
}

inline TrainConfig parse_config_text(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    DECSEG_CHECK(eq != std::string::npos,
                 "config line " << lineno << ": expected key = value, got '" << line << "'");
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const auto key = trim(line.substr(0, eq));
    DECSEG_CHECK(seen.insert(key).second, "config line " << lineno << ": duplicate key '"
                                                         << key << "'");
    set_config_key(cfg, key, trim(line.substr(eq + 1)));
  }
  return cfg;
}

inline TrainConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  DECSEG_CHECK(in.good(), "cannot open config file: " << path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

// Canonical text form: every key, grouped, in a fixed order. Golden config
// files are byte-identical to this output.
inline std::string serialize_config(const TrainConfig& c) {
  using detail::real_str;
  std::ostringstream out;
  // Empty values get no trailing space, so golden files survive editors that
  // strip end-of-line whitespace.
  auto kv = [&out](const char* key, const std::string& value) {
    out << key << " =";
    if (!value.empty()) out << ' ' << value;
    out << '\n';
  };
  auto kb = [&kv](const char* key, bool v) { kv(key, v ? "true" : "false"); };
  out << "# data\n";
  kv("data_root", c.data_root);
  kv("image_size", std::to_string(c.image_size));
  kv("normalize", c.normalize);
  out << "\n# model\n";
  kv("backbone", c.backbone);
  kv("stage_channels", c.stage_channels);
  kv("cfa_out_channels", std::to_string(c.cfa_out_channels));
  kv("reduction_ratio", std::to_string(c.reduction_ratio));
  kv("gen_channels", c.gen_channels);
  kv("fusion", c.fusion);
  out << "\n# ablation switches\n";
  kb("use_sc", c.use_sc);
  kb("use_dcf", c.use_dcf);
  kb("use_cc", c.use_cc);
  kb("use_cfa", c.use_cfa);
  out << "\n# optimization\n";
  kv("max_iters", std::to_string(c.max_iters));
  kv("batch_labeled", std::to_string(c.batch_labeled));
  kv("batch_unlabeled", std::to_string(c.batch_unlabeled));
  kv("lr0", real_str(c.lr0));
  kv("poly_power", real_str(c.poly_power));
  kv("momentum", real_str(c.momentum));
  kv("weight_decay", real_str(c.weight_decay));
  out << "\n# loss weights\n";
  kv("loss_supervised", real_str(c.loss_supervised));
  kv("loss_scale_consistency", real_str(c.loss_scale_consistency));
  kv("loss_perturbation_consistency", real_str(c.loss_perturbation_consistency));
  kv("loss_cross_generative", real_str(c.loss_cross_generative));
  out << "\n# perturbation\n";
  kv("jitter_brightness", real_str(c.jitter_brightness));
  kv("jitter_contrast", real_str(c.jitter_contrast));
  kv("jitter_saturation", real_str(c.jitter_saturation));
  kv("jitter_hue", real_str(c.jitter_hue));
  out << "\n# run\n";
  kv("seed", std::to_string(c.seed));
  kv("checkpoint_every", std::to_string(c.checkpoint_every));
  kv("out_dir", c.out_dir);
  kv("resume", c.resume);
  return out.str();
}

}  // namespace decseg
