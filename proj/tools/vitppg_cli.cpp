// vitppg command-line front end: imagify, synth, train, eval, inspect.

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vitppg/archive.hpp"
#include "vitppg/data_synth.hpp"
#include "vitppg/imagify.hpp"
#include "vitppg/parallel.hpp"
#include "vitppg/report.hpp"
#include "vitppg/tensorize.hpp"
#include "vitppg/train_eval.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace vitppg;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Common {
  std::uint64_t seed = 0;
  int workers = 1;
  std::string out_dir = ".";
};

struct ImagifyFlags {
  std::string repr = "stft";
  std::string window = "hann";
  int n_window = 128;
  int hop = 32;
  int n_fft = 128;
  double eps = 1e-10;
  bool two_sided = false;
  double sigma = 1.0;
  int recurrence_len = 240;

  ImagifyConfig build() const {
    ImagifyConfig c;
    c.repr = parse_representation(repr);
    c.stft.window = parse_window_kind(window);
    c.stft.n_window = n_window;
    c.stft.hop = hop;
    c.stft.n_fft = n_fft;
    c.stft.eps = eps;
    c.stft.one_sided = !two_sided;
    c.recurrence.sigma = sigma;
    c.recurrence.target_len = recurrence_len;
    c.stft.validate();
    c.recurrence.validate();
    return c;
  }
};

void add_common(CLI::App* sub, Common& c) {
  sub->footer("Option defaults may come from --config FILE; keys go under a [" + sub->get_name() + "] section.");
  sub->add_option("--seed", c.seed, "Seed for every random stream")->capture_default_str();
  sub->add_option("--workers", c.workers, "Worker threads for per-record work")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--out-dir", c.out_dir, "Output directory")->envname("VITPPG_OUT_DIR")->capture_default_str();
}

void add_imagify_flags(CLI::App* sub, ImagifyFlags& f) {
  sub->add_option("--repr", f.repr, "Representation")
      ->check(CLI::IsMember({"stft", "stft_phase", "recurrence"}))
      ->capture_default_str();
  sub->add_option("--window", f.window, "STFT window")
      ->check(CLI::IsMember({"hann", "hamming", "rectangular"}))
      ->capture_default_str();
  sub->add_option("--n-window", f.n_window, "STFT window length")->capture_default_str();
  sub->add_option("--hop", f.hop, "STFT hop")->capture_default_str();
  sub->add_option("--n-fft", f.n_fft, "DFT size")->capture_default_str();
  sub->add_option("--eps", f.eps, "Log-power floor")->capture_default_str();
  sub->add_flag("--two-sided", f.two_sided, "Keep all DFT bins");
  sub->add_option("--sigma", f.sigma, "Recurrence bandwidth")->capture_default_str();
  sub->add_option("--recurrence-len", f.recurrence_len, "Recurrence sequence length")->capture_default_str();
}

fs::path ensure_dir(const std::string& dir) {
  fs::path p(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
  return p;
}

std::string safe_name(const std::string& id) {
  std::string s = id;
  for (char& ch : s) {
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.')) ch = '_';
  }
  return s.empty() ? "record" : s;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw DataError("failed writing '" + path.string() + "'");
}

// Min-max scaled 8-bit greyscale, lowest row at the bottom.
void write_pgm(const fs::path& path, const Matrix& m) {
  const double lo = m.minCoeff(), hi = m.maxCoeff();
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  std::ofstream os(path, std::ios::binary);
  os << "P5\n" << m.cols() << ' ' << m.rows() << "\n255\n";
  for (Eigen::Index r = m.rows() - 1; r >= 0; --r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      os.put(static_cast<char>(static_cast<unsigned char>(std::lround((m(r, c) - lo) * scale))));
    }
  }
  if (!os) throw DataError("failed writing '" + path.string() + "'");
}

ArrayArchive image_archive(const PpgRecord& rec, const ImageTriplet& img, const ImagifyConfig& cfg,
                           const BackboneProfile& profile) {
  ArrayArchive ar;
  const auto padded = pad_and_mask(img, profile);
  ar.manifest = {{"format", "vitppg-image"},
                 {"id", rec.id},
                 {"repr", to_string(img.repr)},
                 {"rows", img.rows()},
                 {"cols", img.cols()},
                 {"imagify", to_json(cfg)},
                 {"profile", profile.name},
                 {"patch", profile.patch},
                 {"grid", {padded.grid.rows, padded.grid.cols}}};
  NamedArray channels{"channels", {3, static_cast<std::uint64_t>(img.rows()), static_cast<std::uint64_t>(img.cols())},
                      std::vector<double>{}};
  auto& data = std::get<std::vector<double>>(channels.data);
  data.reserve(3 * static_cast<std::size_t>(img.rows() * img.cols()));
  for (const auto& c : img.channels) {
    const RowMatrix rm = c;
    data.insert(data.end(), rm.data(), rm.data() + rm.size());
  }
  ar.put(std::move(channels));
  ar.put("valid_mask", img.valid_mask);
  return ar;
}

int cmd_imagify(const Common& common, const std::string& input, const ImagifyFlags& flags, const std::string& backbone,
                bool previews) {
  const ImagifyConfig cfg = flags.build();
  const BackboneProfile profile = make_profile(backbone, "tiny");
  const auto records = load_dataset(input);
  const fs::path out = ensure_dir(common.out_dir);
  if (previews) ensure_dir((out / "previews").string());

  std::vector<std::string> names(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) names[i] = safe_name(records[i].id);
  std::vector<std::string> sorted = names;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw DataError("record ids collide after filename sanitising");
  }

  parallel_for(records.size(), common.workers, [&](std::size_t i) {
    const auto& rec = records[i];
    ImageTriplet img;
    try {
      img = make_image(rec.samples, cfg);
    } catch (const InvalidInput& e) {
      throw InvalidInput("record '" + rec.id + "': " + e.what());
    }
    image_archive(rec, img, cfg, profile).save((out / (names[i] + ".vpna")).string());
    if (previews) {
      for (int c = 0; c < 3; ++c) {
        write_pgm(out / "previews" / (names[i] + "_c" + std::to_string(c + 1) + ".pgm"), img.channels[c]);
      }
    }
  });
  std::cout << "wrote " << records.size() << " image containers to " << out.string() << "\n";
  return kOk;
}

int cmd_synth(const Common& common, SynthConfig cfg, const std::string& output) {
  cfg.seed = common.seed;
  const fs::path out = ensure_dir(common.out_dir);
  const fs::path path = output.empty() ? out / "synth.jsonl" : fs::path(output);
  if (path.has_parent_path()) ensure_dir(path.parent_path().string());
  save_dataset(path.string(), synth_ppg(cfg));
  std::cout << "wrote " << cfg.n_records << " records to " << path.string() << "\n";
  return kOk;
}

struct TrainFlags {
  std::string data;
  std::string target = "hr";
  std::string backbone = "dinov3_like";
  std::string preset = "tiny";
  std::string trainable = "lora_pool_head";
  std::string loss = "l1";
  double lr = 1e-4;
  double weight_decay = 0.01;
  int batch_size = 16;
  int epochs = 30;
  double val_frac = 0.1;
  double test_frac = 0.1;
  int lora_rank = 8;
  double lora_alpha = 16.0;
  double lora_dropout = 0.05;
  bool resize = false;
  int resize_to = 224;
};

int cmd_train(const Common& common, const TrainFlags& f, const ImagifyFlags& img) {
  TrainConfig cfg;
  cfg.loss = parse_loss_kind(f.loss);
  cfg.optimizer.lr = f.lr;
  cfg.optimizer.weight_decay = f.weight_decay;
  cfg.batch_size = f.batch_size;
  cfg.epochs = f.epochs;
  cfg.seed = common.seed;
  cfg.trainable = parse_trainable_set(f.trainable);
  cfg.imagify = img.build();
  cfg.tensorize.resize = f.resize;
  cfg.tensorize.resize_rows = cfg.tensorize.resize_cols = f.resize_to;
  cfg.profile = make_profile(f.backbone, f.preset);
  cfg.lora = {f.lora_rank, f.lora_alpha, f.lora_dropout};
  cfg.target = f.target;
  cfg.split = {1.0 - f.val_frac - f.test_frac, f.val_frac, f.test_frac};
  cfg.workers = common.workers;

  const auto records = load_dataset(f.data);
  const fs::path out = ensure_dir(common.out_dir);
  std::ofstream log(out / "train_log.jsonl", std::ios::binary);
  const auto result = fit(records, cfg, [&](const EpochLog& e) {
    const std::string line = epoch_log_line(e);
    log << line << "\n";
    log.flush();
    std::cerr << line << "\n";
  });
  if (!log) throw DataError("failed writing train_log.jsonl");
  save_checkpoint((out / "checkpoint.vpna").string(), result.checkpoint);
  std::cout << "best epoch " << result.best_epoch;
  if (!result.log.empty()) std::cout << " val_mae " << format_mae(result.log[result.best_epoch - 1].val_mae);
  std::cout << "\ncheckpoint " << (out / "checkpoint.vpna").string() << "\n";
  return kOk;
}

std::vector<PpgRecord> select_split(const std::vector<PpgRecord>& records, const Checkpoint& ckpt,
                                    const std::string& which) {
  if (which == "all") return records;
  std::array<double, 3> fractions{0.8, 0.1, 0.1};
  if (ckpt.config.contains("split")) fractions = ckpt.config.at("split").get<std::array<double, 3>>();
  const auto seed = ckpt.config.value("seed", std::uint64_t{0});
  const auto parts = split(records, fractions, seed);
  if (which == "train") return parts.train;
  if (which == "val") return parts.val;
  return parts.test;
}

struct EvalFlags {
  std::string data;
  std::vector<std::string> checkpoints;
  std::vector<std::string> columns;
  std::string target;
  std::string split = "val";
  std::string row;
  std::string layout = "task_rows";
};

int cmd_eval(const Common& common, const EvalFlags& f) {
  const ReportLayout layout = parse_report_layout(f.layout);
  if (!f.columns.empty() && f.columns.size() != f.checkpoints.size()) {
    throw ConfigError("--column must be given once per --checkpoint");
  }
  const auto records = load_dataset(f.data);
  const std::string row = f.row.empty() ? fs::path(f.data).stem().string() : f.row;
  const fs::path out = ensure_dir(common.out_dir);

  std::vector<ReportEntry> entries;
  std::ostringstream predictions;
  for (std::size_t k = 0; k < f.checkpoints.size(); ++k) {
    const Checkpoint ckpt = load_checkpoint(f.checkpoints[k]);
    const std::string target = f.target.empty() ? ckpt.model.target : f.target;
    if (target != ckpt.model.target) {
      throw ConfigError("checkpoint '" + f.checkpoints[k] + "' predicts '" + ckpt.model.target + "', not '" + target +
                        "'");
    }
    const auto subset = select_split(records, ckpt, f.split);
    const Evaluation ev = evaluate(subset, ckpt, target, common.workers);
    const std::string column = f.columns.empty() ? ckpt.model.profile.name : f.columns[k];
    entries.push_back({row, column, ev.report});
    for (std::size_t i = 0; i < ev.ids.size(); ++i) {
      predictions << json{{"checkpoint", f.checkpoints[k]}, {"column", column},          {"id", ev.ids[i]},
                          {"target", target},               {"prediction", ev.predictions[i]}, {"label", ev.labels[i]}}
                         .dump()
                  << "\n";
    }
  }
  const std::string table = render_report(entries, layout);
  write_text(out / "report.txt", table);
  write_text(out / "report.jsonl", render_report_records(entries));
  write_text(out / "predictions.jsonl", predictions.str());
  std::cout << table;
  return kOk;
}

struct InspectFlags {
  std::string backbone = "dinov3_like";
  std::string preset = "tiny";
  std::string trainable = "lora_pool_head";
  std::string checkpoint;
  std::string data;
  int length = 1200;
  bool resize = false;
  int resize_to = 224;
};

int cmd_inspect(const InspectFlags& f, const ImagifyFlags& flags) {
  ImagifyConfig icfg = flags.build();
  TensorizeConfig tcfg;
  tcfg.resize = f.resize;
  tcfg.resize_rows = tcfg.resize_cols = f.resize_to;
  BackboneProfile profile = make_profile(f.backbone, f.preset);
  LoraConfig lora;
  TrainableSet set = parse_trainable_set(f.trainable);
  if (!f.checkpoint.empty()) {
    const Checkpoint ckpt = load_checkpoint(f.checkpoint);
    profile = ckpt.model.profile;
    lora = ckpt.model.lora;
    icfg = ckpt.imagify;
    tcfg = ckpt.tensorize;
    if (ckpt.config.contains("trainable")) set = parse_trainable_set(ckpt.config.at("trainable").get<std::string>());
    std::cout << "checkpoint    " << f.checkpoint << " (target " << ckpt.model.target << ", fingerprint "
              << ckpt.fingerprint() << ")\n";
  }

  // Shape of the image: from the first record when data is given, otherwise a
  // zero signal of the requested length.
  Vector signal = Vector::Zero(f.length);
  if (!f.data.empty()) {
    const auto records = load_dataset(f.data);
    if (records.empty()) throw DataError("inspect: dataset is empty");
    signal = records.front().samples;
  }
  const ImageTriplet img = make_image(signal, icfg);
  const ImageTriplet sized = tcfg.resize ? resize_bilinear(img, tcfg.resize_rows, tcfg.resize_cols) : img;
  const PaddedImage padded = pad_and_mask(sized, profile);
  const PatchSet ps = patchify(padded);
  const int valid_patches = ps.patch_mask.cast<int>().sum();
  const auto valid_pixels = padded.valid_mask.cast<long>().sum();
  const auto counts = parameter_counts(profile, lora, true, set);

  std::cout << "profile       " << profile.name << "/" << profile.preset << " (p=" << profile.patch
            << ", D=" << profile.width << ", depth=" << profile.depth << ", heads=" << profile.n_heads
            << ", registers=" << profile.n_registers << ")\n";
  std::cout << "image         " << to_string(img.repr) << " 3x" << img.rows() << "x" << img.cols() << "\n";
  std::cout << "padded        " << padded.valid_mask.rows() << "x" << padded.valid_mask.cols() << "\n";
  std::cout << "patch grid    " << padded.grid.rows << "x" << padded.grid.cols << "\n";
  std::cout << "N             " << ps.grid.count() << "\n";
  std::cout << "patch dim     " << profile.patch_dim() << "\n";
  std::cout << "tokens        " << 1 + profile.n_registers + ps.grid.count() << "\n";
  std::cout << "valid patches " << valid_patches << "/" << ps.grid.count() << "\n";
  std::cout << "valid pixels  " << valid_pixels << "/" << padded.valid_mask.size() << "\n";
  std::cout << "params total  " << counts.total << "\n";
  std::cout << "params train  " << counts.trainable << " (" << to_string(set) << ")\n";
  std::cout << "lora/layer    " << counts.lora_per_layer << "\n";
  return kOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kUsage;
  if (dynamic_cast<const NumericError*>(&e)) return kNumeric;
  if (dynamic_cast<const Error*>(&e)) return kData;
  if (dynamic_cast<const nlohmann::json::exception*>(&e)) return kData;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kData;
  return kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PPG vital-sign regression with ViT-style encoders on signal images"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file of option defaults, one [subcommand] section each");

  Common common;
  ImagifyFlags img_flags;

  auto* imagify = app.add_subcommand("imagify", "Turn signals into image containers");
  std::string imagify_input, imagify_backbone = "dinov3_like";
  bool previews = false;
  imagify->add_option("--input", imagify_input, "Record file (JSON lines)")->required();
  imagify->add_option("--backbone", imagify_backbone, "Profile used for the recorded patch grid")
      ->check(CLI::IsMember({"dinov3_like", "siglip2_like"}))
      ->capture_default_str();
  imagify->add_flag("--preview", previews, "Also write lossy PGM previews");
  add_imagify_flags(imagify, img_flags);
  add_common(imagify, common);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic labelled dataset");
  SynthConfig synth_cfg;
  std::string synth_output;
  synth->add_option("--n-records", synth_cfg.n_records, "Record count")->capture_default_str();
  synth->add_option("--fs", synth_cfg.fs, "Sampling rate in Hz")->capture_default_str();
  synth->add_option("--duration", synth_cfg.duration_s, "Seconds per record")->capture_default_str();
  synth->add_option("--hr-min", synth_cfg.hr_min, "Lowest heart rate (BPM)")->capture_default_str();
  synth->add_option("--hr-max", synth_cfg.hr_max, "Highest heart rate (BPM)")->capture_default_str();
  synth->add_option("--rr-min", synth_cfg.rr_min, "Lowest respiratory rate (BRPM)")->capture_default_str();
  synth->add_option("--rr-max", synth_cfg.rr_max, "Highest respiratory rate (BRPM)")->capture_default_str();
  synth->add_option("--noise", synth_cfg.noise_std, "Gaussian noise std")->capture_default_str();
  synth->add_option("--modulation", synth_cfg.modulation_depth, "Respiratory AM depth")->capture_default_str();
  synth->add_option("--output", synth_output, "Output file (default <out-dir>/synth.jsonl)");
  add_common(synth, common);

  auto* train = app.add_subcommand("train", "Fit adapters, pooling and head");
  TrainFlags tf;
  ImagifyFlags train_img;
  train->add_option("--data", tf.data, "Record file (JSON lines)")->required();
  train->add_option("--target", tf.target, "Label to regress")->capture_default_str();
  train->add_option("--backbone", tf.backbone, "Backbone profile")
      ->check(CLI::IsMember({"dinov3_like", "siglip2_like"}))
      ->capture_default_str();
  train->add_option("--preset", tf.preset, "Size preset")
      ->check(CLI::IsMember({"tiny", "small", "full"}))
      ->capture_default_str();
  train->add_option("--trainable", tf.trainable, "Trainable parameter set")
      ->check(CLI::IsMember({"lora_pool_head", "head_only", "full"}))
      ->capture_default_str();
  train->add_option("--loss", tf.loss, "Training loss")->check(CLI::IsMember({"l1", "mse"}))->capture_default_str();
  train->add_option("--lr", tf.lr, "AdamW step size")->capture_default_str();
  train->add_option("--weight-decay", tf.weight_decay, "AdamW decoupled decay")->capture_default_str();
  train->add_option("--batch-size", tf.batch_size, "Samples per step")->capture_default_str();
  train->add_option("--epochs", tf.epochs, "Passes over the training split")->capture_default_str();
  train->add_option("--val-frac", tf.val_frac, "Validation fraction")->capture_default_str();
  train->add_option("--test-frac", tf.test_frac, "Test fraction")->capture_default_str();
  train->add_option("--lora-rank", tf.lora_rank, "Adapter rank")->capture_default_str();
  train->add_option("--lora-alpha", tf.lora_alpha, "Adapter alpha")->capture_default_str();
  train->add_option("--lora-dropout", tf.lora_dropout, "Adapter input dropout")->capture_default_str();
  train->add_flag("--resize", tf.resize, "Resize images before padding");
  train->add_option("--resize-to", tf.resize_to, "Square resize target")->capture_default_str();
  add_imagify_flags(train, train_img);
  add_common(train, common);

  auto* eval = app.add_subcommand("eval", "Evaluate checkpoints and write reports");
  EvalFlags ef;
  eval->add_option("--data", ef.data, "Record file (JSON lines)")->required();
  eval->add_option("--checkpoint", ef.checkpoints, "Checkpoint file (repeatable)")
      ->required();
  eval->add_option("--column", ef.columns, "Column label per checkpoint (default: backbone name)");
  eval->add_option("--target", ef.target, "Expected target (default: the checkpoint's)");
  eval->add_option("--split", ef.split, "Records to score")
      ->check(CLI::IsMember({"all", "train", "val", "test"}))
      ->capture_default_str();
  eval->add_option("--row", ef.row, "Row label (default: data file stem)");
  eval->add_option("--layout", ef.layout, "Report layout")
      ->check(CLI::IsMember({"task_rows", "bp_slash"}))
      ->capture_default_str();
  add_common(eval, common);

  auto* inspect = app.add_subcommand("inspect", "Print shapes, token counts and parameter counts");
  InspectFlags inf;
  ImagifyFlags inspect_img;
  inspect->add_option("--backbone", inf.backbone, "Backbone profile")
      ->check(CLI::IsMember({"dinov3_like", "siglip2_like"}))
      ->capture_default_str();
  inspect->add_option("--preset", inf.preset, "Size preset")
      ->check(CLI::IsMember({"tiny", "small", "full"}))
      ->capture_default_str();
  inspect->add_option("--trainable", inf.trainable, "Trainable parameter set")
      ->check(CLI::IsMember({"lora_pool_head", "head_only", "full"}))
      ->capture_default_str();
  inspect->add_option("--checkpoint", inf.checkpoint, "Take profile and preprocessing from a checkpoint");
  inspect->add_option("--data", inf.data, "Take the image shape from this file's first record");
  inspect->add_option("--length", inf.length, "Signal length when no data is given")->capture_default_str();
  inspect->add_flag("--resize", inf.resize, "Resize images before padding");
  inspect->add_option("--resize-to", inf.resize_to, "Square resize target")->capture_default_str();
  add_imagify_flags(inspect, inspect_img);
  add_common(inspect, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*imagify) return cmd_imagify(common, imagify_input, img_flags, imagify_backbone, previews);
    if (*synth) return cmd_synth(common, synth_cfg, synth_output);
    if (*train) return cmd_train(common, tf, train_img);
    if (*eval) return cmd_eval(common, ef);
    if (*inspect) return cmd_inspect(inf, inspect_img);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kUsage;
}
