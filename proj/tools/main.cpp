// Command-line surface: train / eval / predict / make-synthetic.
#include <boost/program_options.hpp>
#include <cstdlib>
#include <iostream>

#include "decseg/data/synthetic.hpp"
#include "decseg/eval/evaluator.hpp"
#include "decseg/train/predict.hpp"
#include "decseg/train/trainer.hpp"

namespace po = boost::program_options;
using namespace decseg;

namespace {

constexpr const char* kUsage =
    "usage: decseg <command> [options]\n"
    "\n"
    "commands:\n"
    "  train           run a training loop from a config file\n"
    "  eval            score a checkpoint on a dataset's test split\n"
    "  predict         write binary masks for an image or a directory\n"
    "  make-synthetic  generate a synthetic desk-scale dataset\n"
    "\n"
    "run `decseg <command> --help` for the command's options.\n";

// This build computes on the CPU; reject requests for anything else early
// instead of silently ignoring the variable.
void check_device() {
  const char* dev = std::getenv("DECSEG_DEVICE");
  if (dev == nullptr) return;
  const std::string d(dev);
  DECSEG_CHECK(d.empty() || d == "cpu",
               "DECSEG_DEVICE='" << d << "' is not available in this CPU-only build");
}

// Parse with positional arguments rejected, so stray tokens fail loudly.
po::variables_map parse(const po::options_description& desc, int argc, char** argv) {
  po::variables_map vm;
  po::store(po::command_line_parser(argc - 1, argv + 1).options(desc).run(), vm);
  po::notify(vm);
  return vm;
}

bool want_help(const po::variables_map& vm, const po::options_description& desc,
               const char* command) {
  if (!vm.count("help")) return false;
  std::cout << "usage: decseg " << command << " [options]\n" << desc;
  return true;
}

int cmd_train(int argc, char** argv) {
  po::options_description desc("options");
  desc.add_options()                                                     //
      ("help,h", "show this help")                                       //
      ("config", po::value<std::string>()->required(), "config file")    //
      ("override", po::value<std::vector<std::string>>()->composing(),  //
       "key=value config override (repeatable)");
  po::variables_map vm;
  po::store(po::command_line_parser(argc - 1, argv + 1).options(desc).run(), vm);
  if (want_help(vm, desc, "train")) return 0;
  po::notify(vm);

  TrainConfig cfg = parse_config_file(vm["config"].as<std::string>());
  if (vm.count("override")) {
    for (const auto& ov : vm["override"].as<std::vector<std::string>>()) {
      apply_override(cfg, ov);
    }
  }
  Trainer<float> trainer(cfg);
  std::cout << "training: " << cfg.max_iters << " iterations, batch " << cfg.batch_labeled
            << "+" << (trainer.semi_supervised() ? cfg.batch_unlabeled : 0) << ", "
            << cfg.backbone << " @ " << cfg.image_size << "px\n";
  const auto ckpt = trainer.fit();
  std::cout << "final checkpoint: " << ckpt.string() << "\n";
  std::cout << "logs: " << (std::filesystem::path(cfg.out_dir) / "train_log.csv").string()
            << ", " << (std::filesystem::path(cfg.out_dir) / "metrics.csv").string() << "\n";
  return 0;
}

int cmd_eval(int argc, char** argv) {
  po::options_description desc("options");
  desc.add_options()                                                         //
      ("help,h", "show this help")                                           //
      ("checkpoint", po::value<std::string>()->required(), "model checkpoint")  //
      ("data", po::value<std::string>()->required(), "dataset root")         //
      ("out", po::value<std::string>()->default_value("."),                  //
       "directory for metrics.csv");
  po::variables_map vm;
  po::store(po::command_line_parser(argc - 1, argv + 1).options(desc).run(), vm);
  if (want_help(vm, desc, "eval")) return 0;
  po::notify(vm);

  const auto ckpt_path = vm["checkpoint"].as<std::string>();
  auto data = read_checkpoint<float>(ckpt_path);
  auto model_cfg = DecSegModel<float>::config_from_meta(data.meta);
  DecSegModel<float> model(model_cfg);
  load_state(model, data);
  auto it = data.meta.find("image_size");
  DECSEG_CHECK(it != data.meta.end(), "checkpoint '" << ckpt_path << "' has no image_size");

  const auto spec =
      DatasetSpec::standard(vm["data"].as<std::string>(), std::stoi(it->second));
  const std::filesystem::path out_dir = vm["out"].as<std::string>();
  std::filesystem::create_directories(out_dir);
  const auto csv = out_dir / "metrics.csv";
  const auto report = eval_dataset(model, spec, csv);
  std::cout.precision(4);
  std::cout << "images: " << report.count << "\n"
            << "mDice:  " << report.dice << "\n"
            << "mIoU:   " << report.iou << "\n"
            << "Fbw:    " << report.wfb << "\n"
            << "Sa:     " << report.smeasure << "\n"
            << "MAE:    " << report.mae << "\n"
            << "per-image rows: " << csv.string() << "\n";
  return 0;
}

int cmd_predict(int argc, char** argv) {
  po::options_description desc("options");
  desc.add_options()                                                         //
      ("help,h", "show this help")                                           //
      ("checkpoint", po::value<std::string>()->required(), "model checkpoint")  //
      ("input", po::value<std::string>()->required(), "image file or directory")  //
      ("output", po::value<std::string>()->required(), "output directory");
  po::variables_map vm;
  po::store(po::command_line_parser(argc - 1, argv + 1).options(desc).run(), vm);
  if (want_help(vm, desc, "predict")) return 0;
  po::notify(vm);

  namespace fs = std::filesystem;
  const fs::path input = vm["input"].as<std::string>();
  const fs::path out_dir = vm["output"].as<std::string>();
  fs::create_directories(out_dir);

  std::vector<fs::path> inputs;
  if (fs::is_directory(input)) {
    for (const auto& e : fs::directory_iterator(input)) {
      const auto ext = e.path().extension().string();
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") inputs.push_back(e.path());
    }
    std::sort(inputs.begin(), inputs.end());
    DECSEG_CHECK(!inputs.empty(), "no .png/.jpg/.jpeg images under " << input.string());
  } else {
    DECSEG_CHECK(fs::exists(input), "input does not exist: " << input.string());
    inputs.push_back(input);
  }

  Predictor<float> predictor(vm["checkpoint"].as<std::string>());
  for (const auto& in : inputs) {
    const auto out = out_dir / (in.stem().string() + ".png");
    predictor.predict_file(in, out);
    std::cout << in.string() << " -> " << out.string() << "\n";
  }
  return 0;
}

int cmd_make_synthetic(int argc, char** argv) {
  po::options_description desc("options");
  desc.add_options()                                                      //
      ("help,h", "show this help")                                        //
      ("out", po::value<std::string>()->required(), "output directory")   //
      ("labeled", po::value<int>()->default_value(10), "labeled count")   //
      ("unlabeled", po::value<int>()->default_value(80), "unlabeled count")  //
      ("test", po::value<int>()->default_value(20), "test count")         //
      ("image-size", po::value<int>()->default_value(96), "square size in pixels")  //
      ("seed", po::value<std::uint64_t>()->default_value(1), "generator seed");
  po::variables_map vm;
  po::store(po::command_line_parser(argc - 1, argv + 1).options(desc).run(), vm);
  if (want_help(vm, desc, "make-synthetic")) return 0;
  po::notify(vm);

  const auto spec = make_synthetic_dataset(
      vm["out"].as<std::string>(), vm["labeled"].as<int>(), vm["unlabeled"].as<int>(),
      vm["test"].as<int>(), vm["image-size"].as<int>(), vm["seed"].as<std::uint64_t>());
  std::cout << "dataset at " << spec.root.string() << " (" << vm["labeled"].as<int>()
            << " labeled, " << vm["unlabeled"].as<int>() << " unlabeled, "
            << vm["test"].as<int>() << " test @ " << spec.image_size << "px)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << kUsage;
    return 1;
  }
  const std::string command = argv[1];
  try {
    check_device();
    if (command == "train") return cmd_train(argc, argv);
    if (command == "eval") return cmd_eval(argc, argv);
    if (command == "predict") return cmd_predict(argc, argv);
    if (command == "make-synthetic") return cmd_make_synthetic(argc, argv);
    if (command == "--help" || command == "-h" || command == "help") {
      std::cout << kUsage;
      return 0;
    }
    std::cerr << "decseg: unknown command '" << command << "'\n\n" << kUsage;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "decseg " << command << ": " << e.what() << "\n";
    return 1;
  }
}
