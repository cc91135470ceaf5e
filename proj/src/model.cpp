#include "vitppg/model.hpp"

#include <cinttypes>
#include <cstdio>
#include <type_traits>

namespace vitppg {

std::string_view to_string(TrainableSet set) {
  switch (set) {
    case TrainableSet::lora_pool_head: return "lora_pool_head";
    case TrainableSet::head_only: return "head_only";
    case TrainableSet::full: return "full";
  }
  return "unknown";
}

std::string_view to_string(LossKind kind) { return kind == LossKind::l1 ? "l1" : "mse"; }

TrainableSet parse_trainable_set(std::string_view name) {
  if (name == "lora_pool_head") return TrainableSet::lora_pool_head;
  if (name == "head_only") return TrainableSet::head_only;
  if (name == "full") return TrainableSet::full;
  throw ConfigError("unknown trainable set '" + std::string(name) + "'");
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "l1") return LossKind::l1;
  if (name == "mse") return LossKind::mse;
  throw ConfigError("unknown loss '" + std::string(name) + "'");
}

Model init_model(const BackboneProfile& profile, const LoraConfig& lora, bool with_adapters, const std::string& target,
                 std::uint64_t seed) {
  profile.validate();
  if (target.empty()) throw ConfigError("target name must not be empty");
  Model m;
  m.profile = profile;
  m.lora = lora;
  m.target = target;
  m.encoder = init_encoder(profile, seed);
  if (with_adapters) m.adapters = make_qkv_adapters(profile.depth, profile.width, lora, seed);
  m.pool = init_pool(profile.width);
  m.head = init_head(profile.width, profile.head_hidden, seed);
  return m;
}

Model zeros_like(const Model& model) {
  Model z = model;
  for_each_parameter([](const std::string&, auto& a) { a.setZero(); }, z);
  return z;
}

bool is_trainable(std::string_view name, TrainableSet set) {
  switch (set) {
    case TrainableSet::full: return true;
    case TrainableSet::head_only: return name.starts_with("head/");
    case TrainableSet::lora_pool_head:
      return name.starts_with("lora/") || name.starts_with("pool/") || name.starts_with("head/");
  }
  return false;
}

double predict(const Model& model, const PatchSet& ps, const ForwardOptions& opts) {
  const TokenBatch tokens = embed_patches(ps, model.encoder);
  const TokenBatch encoded = encoder_forward(tokens, model.encoder, &model.adapters, opts);
  const Vector pooled = attention_pool(extract_feature_map(encoded), model.pool);
  return model.label.offset + model.label.scale * regress(pooled, model.head);
}

double loss_value(LossKind kind, double prediction, double label) {
  const double r = prediction - label;
  return kind == LossKind::l1 ? std::abs(r) : r * r;
}

LossResult loss_and_gradient(const Model& model, const PatchSet& ps, double label, LossKind kind,
                             const ForwardOptions& opts, Model& grads) {
  EncoderTape tape;
  ForwardOptions fwd = opts;
  fwd.tape = &tape;
  const TokenBatch tokens = embed_patches(ps, model.encoder);
  const TokenBatch encoded = encoder_forward(tokens, model.encoder, &model.adapters, fwd);
  const FeatureMap fm = extract_feature_map(encoded);
  Vector alpha;
  const Vector pooled = attention_pool(fm, model.pool, &alpha);
  HeadTape head_tape;
  const double y = regress(pooled, model.head, &head_tape);

  LossResult out;
  out.prediction = model.label.offset + model.label.scale * y;
  out.loss = loss_value(kind, out.prediction, label);
  const double r = out.prediction - label;
  const double d_pred = kind == LossKind::l1 ? static_cast<double>((r > 0) - (r < 0)) : 2.0 * r;

  const Vector d_pooled = regress_backward(head_tape, d_pred * model.label.scale, model.head, grads.head);
  const Matrix d_features = attention_pool_backward(fm, alpha, d_pooled, model.pool, grads.pool);
  Matrix d_tokens = Matrix::Zero(encoded.size(), model.encoder.width());
  d_tokens.bottomRows(fm.grid.count()) = d_features.transpose();
  const Matrix d_input = encoder_backward(tape, d_tokens, model.encoder, &model.adapters, grads.encoder, &grads.adapters);
  embed_backward(ps, d_input, grads.encoder);
  return out;
}

ParameterCounts count_parameters(const Model& model, TrainableSet set) {
  ParameterCounts c;
  for_each_parameter(
      [&c, set](const std::string& name, const auto& a) {
        c.total += a.size();
        if (is_trainable(name, set)) c.trainable += a.size();
        if (name.starts_with("lora/0/")) c.lora_per_layer += a.size();
      },
      model);
  return c;
}

ParameterCounts parameter_counts(const BackboneProfile& profile, const LoraConfig& lora, bool with_adapters,
                                 TrainableSet set) {
  const std::int64_t d = profile.width;
  const std::int64_t hidden = profile.mlp_hidden;
  const std::int64_t r = profile.n_registers;
  const std::int64_t grid = profile.max_grid;
  const std::int64_t encoder = d * profile.patch_dim() + d + d + r * d + (1 + r) * d + 2 * grid * d +
                               profile.depth * (4 * d + 4 * (d * d + d) + hidden * d + hidden + d * hidden + d) + 2 * d;
  const std::int64_t lora_layer = with_adapters ? 3 * 2 * static_cast<std::int64_t>(lora.rank) * d : 0;
  const std::int64_t pool = d;
  const std::int64_t hh = profile.head_hidden;
  const std::int64_t head = 2 * d + hh * d + hh + hh + 1;

  ParameterCounts c;
  c.lora_per_layer = lora_layer;
  c.total = encoder + profile.depth * lora_layer + pool + head;
  switch (set) {
    case TrainableSet::full: c.trainable = c.total; break;
    case TrainableSet::head_only: c.trainable = head; break;
    case TrainableSet::lora_pool_head: c.trainable = profile.depth * lora_layer + pool + head; break;
  }
  return c;
}

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t hash) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    hash ^= p[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, v);
  return buf;
}

std::uint64_t parameter_checksum(const Model& model, const std::function<bool(std::string_view)>& select) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for_each_parameter(
      [&](const std::string& name, const auto& a) {
        if (!select(name)) return;
        h = fnv1a(name.data(), name.size(), h);
        h = fnv1a(a.data(), static_cast<std::size_t>(a.size()) * sizeof(Scalar), h);
      },
      model);
  return h;
}

nlohmann::json profile_to_json(const BackboneProfile& p) {
  return {{"name", p.name},
          {"preset", p.preset},
          {"patch", p.patch},
          {"channel_mean", p.channel_mean},
          {"channel_std", p.channel_std},
          {"n_registers", p.n_registers},
          {"width", p.width},
          {"depth", p.depth},
          {"n_heads", p.n_heads},
          {"mlp_hidden", p.mlp_hidden},
          {"head_hidden", p.head_hidden},
          {"max_grid", p.max_grid}};
}

BackboneProfile profile_from_json(const nlohmann::json& j) {
  try {
    BackboneProfile p;
    p.name = j.at("name").get<std::string>();
    p.preset = j.at("preset").get<std::string>();
    p.patch = j.at("patch").get<int>();
    p.channel_mean = j.at("channel_mean").get<std::array<double, 3>>();
    p.channel_std = j.at("channel_std").get<std::array<double, 3>>();
    p.n_registers = j.at("n_registers").get<int>();
    p.width = j.at("width").get<int>();
    p.depth = j.at("depth").get<int>();
    p.n_heads = j.at("n_heads").get<int>();
    p.mlp_hidden = j.at("mlp_hidden").get<int>();
    p.head_hidden = j.at("head_hidden").get<int>();
    p.max_grid = j.at("max_grid").get<int>();
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint profile: ") + e.what());
  }
}

ArrayArchive to_archive(const Model& model, const nlohmann::json& extras) {
  ArrayArchive ar;
  ar.manifest = extras;
  ar.manifest["format"] = "vitppg-checkpoint";
  ar.manifest["profile"] = profile_to_json(model.profile);
  ar.manifest["lora"] = {{"rank", model.lora.rank}, {"alpha", model.lora.alpha}, {"dropout", model.lora.dropout}};
  ar.manifest["with_adapters"] = !model.adapters.empty();
  ar.manifest["target"] = model.target;
  for_each_parameter([&ar](const std::string& name, const auto& a) { ar.put(name, a); }, model);
  Vector affine(2);
  affine << model.label.offset, model.label.scale;
  ar.put("head/" + model.target + "/label_affine", affine);
  return ar;
}

Model from_archive(const ArrayArchive& ar) {
  const auto& m = ar.manifest;
  if (m.value("format", "") != "vitppg-checkpoint") throw DataError("archive is not a model checkpoint");
  const BackboneProfile profile = profile_from_json(m.at("profile"));
  LoraConfig lora;
  lora.rank = m.at("lora").at("rank").get<int>();
  lora.alpha = m.at("lora").at("alpha").get<double>();
  lora.dropout = m.at("lora").at("dropout").get<double>();
  Model model = init_model(profile, lora, m.at("with_adapters").get<bool>(), m.at("target").get<std::string>(), 0);
  for_each_parameter(
      [&ar](const std::string& name, auto& a) {
        using T = std::decay_t<decltype(a)>;
        T loaded;
        if constexpr (std::is_same_v<T, Vector>) {
          loaded = ar.get_vector(name);
        } else {
          loaded = ar.get_matrix(name);
        }
        if (loaded.rows() != a.rows() || loaded.cols() != a.cols()) {
          throw DataError("checkpoint array '" + name + "' has unexpected shape");
        }
        a = std::move(loaded);
      },
      model);
  const Vector affine = ar.get_vector("head/" + model.target + "/label_affine");
  if (affine.size() != 2) throw DataError("checkpoint label_affine must have 2 entries");
  model.label = {affine(0), affine(1)};
  return model;
}

}  // namespace vitppg
