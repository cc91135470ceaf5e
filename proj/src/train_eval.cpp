#include "vitppg/train_eval.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "vitppg/parallel.hpp"
#include "vitppg/random.hpp"

namespace vitppg {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(optimizer.lr > 0.0)) throw ConfigError("train: step size must be positive");
  if (optimizer.weight_decay < 0.0) throw ConfigError("train: weight decay must be >= 0");
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0 && optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
    throw ConfigError("train: betas must lie in [0, 1)");
  }
  if (batch_size < 1) throw ConfigError("train: batch size must be positive");
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (target.empty()) throw ConfigError("train: target must be set");
  profile.validate();
  imagify.stft.validate();
  imagify.recurrence.validate();
}

json to_json(const ImagifyConfig& c) {
  return {{"repr", to_string(c.repr)},
          {"stft",
           {{"n_window", c.stft.n_window},
            {"hop", c.stft.hop},
            {"n_fft", c.stft.n_fft},
            {"window", to_string(c.stft.window)},
            {"eps", c.stft.eps},
            {"one_sided", c.stft.one_sided}}},
          {"recurrence", {{"sigma", c.recurrence.sigma}, {"target_len", c.recurrence.target_len}}}};
}

json to_json(const TensorizeConfig& c) {
  return {{"resize", c.resize}, {"resize_rows", c.resize_rows}, {"resize_cols", c.resize_cols}};
}

json to_json(const TrainConfig& c) {
  return {{"loss", to_string(c.loss)},
          {"lr", c.optimizer.lr},
          {"weight_decay", c.optimizer.weight_decay},
          {"beta1", c.optimizer.beta1},
          {"beta2", c.optimizer.beta2},
          {"adam_eps", c.optimizer.eps},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"trainable", to_string(c.trainable)},
          {"target", c.target},
          {"split", c.split}};
}

ImagifyConfig imagify_config_from_json(const json& j) {
  try {
    ImagifyConfig c;
    c.repr = parse_representation(j.at("repr").get<std::string>());
    const auto& s = j.at("stft");
    c.stft.n_window = s.at("n_window").get<int>();
    c.stft.hop = s.at("hop").get<int>();
    c.stft.n_fft = s.at("n_fft").get<int>();
    c.stft.window = parse_window_kind(s.at("window").get<std::string>());
    c.stft.eps = s.at("eps").get<double>();
    c.stft.one_sided = s.at("one_sided").get<bool>();
    c.recurrence.sigma = j.at("recurrence").at("sigma").get<double>();
    c.recurrence.target_len = j.at("recurrence").at("target_len").get<int>();
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("imagify config: ") + e.what());
  }
}

TensorizeConfig tensorize_config_from_json(const json& j) {
  try {
    return {j.at("resize").get<bool>(), j.at("resize_rows").get<int>(), j.at("resize_cols").get<int>()};
  } catch (const json::exception& e) {
    throw DataError(std::string("tensorize config: ") + e.what());
  }
}

std::string Checkpoint::fingerprint() const {
  json j = config;
  j["imagify"] = to_json(imagify);
  j["tensorize"] = to_json(tensorize);
  j["profile"] = profile_to_json(model.profile);
  j["target"] = model.target;
  const std::string s = j.dump();
  return hex64(fnv1a(s.data(), s.size()));
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  json extras = {{"imagify", to_json(ckpt.imagify)}, {"tensorize", to_json(ckpt.tensorize)}, {"config", ckpt.config}};
  to_archive(ckpt.model, extras).save(path);
}

Checkpoint load_checkpoint(const std::string& path) {
  const ArrayArchive ar = ArrayArchive::load(path);
  Checkpoint c;
  c.model = from_archive(ar);
  c.imagify = imagify_config_from_json(ar.manifest.at("imagify"));
  c.tensorize = tensorize_config_from_json(ar.manifest.at("tensorize"));
  c.config = ar.manifest.value("config", json::object());
  return c;
}

AdamW::AdamW(const Model& shape, const OptimizerConfig& cfg) : cfg_(cfg), m_(zeros_like(shape)), v_(zeros_like(shape)) {}

void AdamW::step(Model& params, const Model& grads, const std::function<bool(std::string_view)>& trainable) {
  ++step_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for_each_parameter(
      [&](const std::string& name, auto& p, const auto& g, auto& m, auto& v) {
        if (!trainable(name)) return;
        p *= 1.0 - cfg_.lr * cfg_.weight_decay;
        m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
        v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
        p.array() -= cfg_.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + cfg_.eps);
      },
      params, grads, m_, v_);
}

std::string epoch_log_line(const EpochLog& e) {
  return json{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_mae", e.val_mae}, {"wall_ms", e.wall_ms}}.dump();
}

std::vector<PatchSet> prepare_dataset(const std::vector<PpgRecord>& records, const ImagifyConfig& imagify,
                                      const BackboneProfile& profile, const TensorizeConfig& tensorize, int workers) {
  std::vector<PatchSet> out(records.size());
  parallel_for(records.size(), workers, [&](std::size_t i) {
    try {
      out[i] = prepare_patches(make_image(records[i].samples, imagify), profile, tensorize);
    } catch (const InvalidInput& e) {
      throw DataError("record '" + records[i].id + "': " + e.what());
    }
  });
  return out;
}

namespace {

double label_of(const PpgRecord& r, const std::string& target) {
  const auto it = r.labels.find(target);
  if (it == r.labels.end()) throw DataError("record '" + r.id + "' has no label '" + target + "'");
  return it->second;
}

double mean_abs_error(const Model& model, const std::vector<PatchSet>& patches, const std::vector<double>& labels,
                      const std::vector<std::size_t>& idx) {
  double sum = 0.0;
  for (auto i : idx) sum += std::abs(predict(model, patches[i]) - labels[i]);
  return sum / static_cast<double>(idx.size());
}

}  // namespace

FitResult fit(const std::vector<PpgRecord>& dataset, const TrainConfig& cfg,
              const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  std::vector<double> labels(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) labels[i] = label_of(dataset[i], cfg.target);

  FitResult result;
  result.split = split_indices(dataset.size(), cfg.split, cfg.seed);
  const auto& train_idx = result.split.train;
  const auto& val_idx = result.split.val;
  if (train_idx.empty()) throw DataError("fit: training split is empty");
  if (val_idx.empty()) throw DataError("fit: validation split is empty");

  const std::vector<PatchSet> patches = prepare_dataset(dataset, cfg.imagify, cfg.profile, cfg.tensorize, cfg.workers);

  double mean = 0.0;
  for (auto i : train_idx) mean += labels[i];
  mean /= static_cast<double>(train_idx.size());
  double var = 0.0;
  for (auto i : train_idx) var += (labels[i] - mean) * (labels[i] - mean);
  const double sd = std::sqrt(var / static_cast<double>(train_idx.size()));

  Checkpoint& best = result.checkpoint;
  best.imagify = cfg.imagify;
  best.tensorize = cfg.tensorize;
  best.config = to_json(cfg);
  best.model = init_model(cfg.profile, cfg.lora, true, cfg.target, cfg.seed);
  best.model.label = {mean, sd > 1e-12 ? sd : 1.0};

  Model model = best.model;
  AdamW optimizer(model, cfg.optimizer);
  const auto trainable = [&cfg](std::string_view name) { return is_trainable(name, cfg.trainable); };
  double best_mae = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order = train_idx;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    order = train_idx;
    auto shuffle_rng = derived_stream(cfg.seed, {0x65706f63, static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    int batch_index = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size), ++batch_index) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      Model grads = zeros_like(model);
      double batch_loss = 0.0;
      for (std::size_t k = b; k < e; ++k) {
        ForwardOptions opts;
        opts.training = true;
        opts.dropout_seed = derived_stream(cfg.seed, {0x64726f70, static_cast<std::uint64_t>(epoch), k})();
        const LossResult lr = loss_and_gradient(model, patches[order[k]], labels[order[k]], cfg.loss, opts, grads);
        batch_loss += lr.loss;
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("fit: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      }
      loss_sum += batch_loss;
      const double inv = 1.0 / static_cast<double>(e - b);
      for_each_parameter([inv](const std::string&, auto& g) { g *= inv; }, grads);
      optimizer.step(model, grads, trainable);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(order.size());
    entry.val_mae = mean_abs_error(model, patches, labels, val_idx);
    entry.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
    if (entry.val_mae < best_mae) {
      best_mae = entry.val_mae;
      best.model = model;
      result.best_epoch = epoch;
    }
  }
  best.config["best_epoch"] = result.best_epoch;
  return result;
}

Evaluation evaluate(const std::vector<PpgRecord>& dataset, const Checkpoint& ckpt, const std::string& target,
                    int workers) {
  if (ckpt.model.target != target) {
    throw ConfigError("checkpoint was trained for target '" + ckpt.model.target + "', not '" + target + "'");
  }
  if (dataset.empty()) throw DataError("evaluate: empty dataset");
  Evaluation ev;
  ev.labels.resize(dataset.size());
  ev.ids.resize(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    ev.labels[i] = label_of(dataset[i], target);
    ev.ids[i] = dataset[i].id;
  }
  ev.predictions.resize(dataset.size());
  parallel_for(dataset.size(), workers, [&](std::size_t i) {
    PatchSet ps;
    try {
      ps = prepare_patches(make_image(dataset[i].samples, ckpt.imagify), ckpt.model.profile, ckpt.tensorize);
    } catch (const InvalidInput& e) {
      throw DataError("record '" + dataset[i].id + "': " + e.what());
    }
    ev.predictions[i] = predict(ckpt.model, ps);
  });
  double sum = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) sum += std::abs(ev.predictions[i] - ev.labels[i]);
  ev.report.mae[target] = sum / static_cast<double>(dataset.size());
  ev.report.count = dataset.size();
  ev.report.fingerprint = ckpt.fingerprint();
  return ev;
}

}  // namespace vitppg
