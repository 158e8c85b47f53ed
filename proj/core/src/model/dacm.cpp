#include "cadd/model/dacm.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cadd/errors.hpp"
#include "cadd/numeric/ops.hpp"
#include "cadd/seed.hpp"

namespace cadd::model {

namespace ops = numeric;
using nlohmann::json;

namespace {

constexpr std::array<Variant, 6> kVariants{Variant::TextOnly, Variant::AudioOnly, Variant::Base,
                                           Variant::NoAttn,   Variant::NoDim,     Variant::Full};

bool has_attention(Variant v) { return v == Variant::NoDim || v == Variant::Full; }
bool has_dim(Variant v) { return v == Variant::NoAttn || v == Variant::Full; }
bool has_aux(Variant v) { return v == Variant::NoAttn || v == Variant::NoDim || v == Variant::Full; }

// Under valence targets, logit 0 stands for positive and 1 for negative.
std::size_t aux_label(const EncodedSample& s, datagen::Valence v, AuxTarget target) {
  if (target == AuxTarget::CaddLabel) return s.label;
  return v == datagen::Valence::Positive ? 0 : 1;
}

std::vector<bool> all_valid(std::size_t n) { return std::vector<bool>(n, true); }

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::TextOnly: return "TextOnly";
    case Variant::AudioOnly: return "AudioOnly";
    case Variant::Base: return "Base";
    case Variant::NoAttn: return "noAttn";
    case Variant::NoDim: return "noDIM";
    case Variant::Full: return "Full";
  }
  return "unknown";
}

Variant parse_variant(std::string_view s) {
  for (auto v : kVariants)
    if (to_string(v) == s) return v;
  throw ConfigError("unknown variant '" + std::string(s) + "'");
}

std::span<const Variant> all_variants() { return kVariants; }

bool uses_text(Variant v) { return v != Variant::AudioOnly; }
bool uses_audio(Variant v) { return v != Variant::TextOnly; }

std::size_t ModelConfig::head_input_width() const {
  switch (variant) {
    case Variant::TextOnly:
    case Variant::AudioOnly: return width;
    case Variant::Base:
    case Variant::NoDim: return 2 * width;
    case Variant::NoAttn:
    case Variant::Full: return interaction_width(width);
  }
  return 0;
}

// ---------------------------------------------------------------------------

Featurizer::Featurizer(const ModelConfig& config)
    : text_(config.width, config.encoder_seed, config.text_layers),
      audio_(config.width, config.encoder_seed, config.audio_layers) {}

EncodedSample Featurizer::encode(std::string_view text, const datagen::Waveform& wave) const {
  return encode_features(text, audio_.layer_stack(wave).features);
}

EncodedSample Featurizer::encode_features(std::string_view text, Tensor audio_features) const {
  EncodedSample s;
  s.text = text_.layer_stack(text_.tokenize(text));
  const auto stack = audio_.layer_stack_from_features(std::move(audio_features));
  s.audio_features = stack.features;
  const std::size_t t_len = stack.rows(), f = stack.features.dim(1);
  std::vector<double> mean(f, 0.0);
  auto x = stack.features.values();
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t j = 0; j < f; ++j) mean[j] += x[t * f + j] / static_cast<double>(t_len);
  s.audio_feature_mean = Tensor::vector(std::move(mean));
  return s;
}

Tensor Linear::operator()(const Tensor& x) const {
  auto y = ops::matmul(weight, x);
  return bias.defined() ? ops::add(y, bias) : y;
}

// ---------------------------------------------------------------------------

struct Dacm::Shared {
  Tensor text_layer_weights;  // softmax over text layers
  Tensor audio_projection;    // [F x d]
};

void Dacm::register_parameter(std::string name, const Tensor& t) {
  params_.push_back({std::move(name), t});
}

Linear Dacm::make_linear(const std::string& name, std::size_t in, std::size_t out,
                         std::mt19937_64& rng, bool bias) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> w(in * out);
  for (auto& v : w) v = dist(rng);
  Linear l;
  l.weight = Tensor({out, in}, std::move(w), true);
  register_parameter(name + ".weight", l.weight);
  if (bias) {
    std::vector<double> b(out);
    for (auto& v : b) v = dist(rng);
    l.bias = Tensor({out}, std::move(b), true);
    register_parameter(name + ".bias", l.bias);
  }
  return l;
}

Dacm::Dacm(ModelConfig config, std::uint64_t seed) : config_(std::move(config)), seed_(seed) {
  const std::size_t d = config_.width;
  if (d == 0 || config_.hidden == 0 || config_.projection == 0) {
    throw ConfigError("model widths must be positive");
  }
  if (config_.dropout < 0.0 || config_.dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
  const Variant v = config_.variant;
  std::mt19937_64 rng(derive_seed({seed, 0xDAC3u}));

  if (uses_text(v)) {
    wlp_text_ = Tensor({config_.text_layers}, 0.0, true);
    register_parameter("wlp.text", wlp_text_);
  }
  if (uses_audio(v)) {
    wlp_audio_ = Tensor({config_.audio_layers}, 0.0, true);
    register_parameter("wlp.audio", wlp_audio_);
    audio_projections_ =
        encoders::AudioEncoder(d, config_.encoder_seed, config_.audio_layers).projections();
  }
  if (has_aux(v)) {
    aux_text_ = make_linear("aux.text", d, kClassCount, rng);
    aux_audio_ = make_linear("aux.audio", d, kClassCount, rng);
    proj_text_ = make_linear("proj.text", d, config_.projection, rng, false);
    proj_audio_ = make_linear("proj.audio", d, config_.projection, rng, false);
  }
  if (has_attention(v)) {
    attn_text_audio_ = AttentionParams::init(d, config_.heads, rng);
    attn_audio_text_ = AttentionParams::init(d, config_.heads, rng);
    for (auto [prefix, p] : {std::pair{"attn.t2a", &attn_text_audio_}, std::pair{"attn.a2t", &attn_audio_text_}}) {
      register_parameter(std::string(prefix) + ".w_q", p->w_q);
      register_parameter(std::string(prefix) + ".w_k", p->w_k);
      register_parameter(std::string(prefix) + ".w_v", p->w_v);
      register_parameter(std::string(prefix) + ".w_o", p->w_o);
    }
  }
  if (has_dim(v)) {
    dim_gate_ = make_linear("dim.gate", 2 * d, d, rng, false).weight;
  }
  const std::size_t in = config_.head_input_width();
  if (has_aux(v)) agreement_ = make_linear("agreement", in, 1, rng);
  mlp_hidden_ = make_linear("mlp.0", in, config_.hidden, rng);
  mlp_out_ = make_linear("mlp.1", config_.hidden, kClassCount, rng);
}

std::vector<Tensor> Dacm::parameters() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.tensor);
  return out;
}

const Tensor& Dacm::parameter(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.tensor;
  throw ConfigError("no parameter named '" + std::string(name) + "' in variant " +
                    std::string(to_string(config_.variant)));
}

std::size_t Dacm::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.size();
  return n;
}

ModelOutputs Dacm::forward_one(const EncodedSample& s, const Shared& shared, bool training,
                               std::mt19937_64& rng) const {
  const std::size_t d = config_.width;
  const Variant v = config_.variant;
  Tensor seq_t, h_t, h_a;
  if (uses_text(v)) {
    if (s.text.width != d) throw ShapeError("text encoding width does not match the model");
    seq_t = ops::reshape(ops::matmul(shared.text_layer_weights, s.text.layers), {s.text.rows, d});
    h_t = ops::slice(seq_t, 0, d);
  }
  if (uses_audio(v)) h_a = ops::matmul(s.audio_feature_mean, shared.audio_projection);

  ModelOutputs out;
  Tensor head_in;
  switch (v) {
    case Variant::TextOnly: head_in = h_t; break;
    case Variant::AudioOnly: head_in = h_a; break;
    case Variant::Base:
      head_in = pooled_fusion_baseline(h_t, h_a);
      out.mismatch = mismatch_score(ops::cosine_similarity(h_t, h_a).item());
      break;
    case Variant::NoAttn:
    case Variant::NoDim:
    case Variant::Full: {
      out.text_aux_logits = aux_text_(h_t);
      out.audio_aux_logits = aux_audio_(h_a);
      out.z_t = ops::l2_normalize(proj_text_(h_t));
      out.z_a = ops::l2_normalize(proj_audio_(h_a));
      Tensor ht = h_t, ha = h_a;
      if (has_attention(v)) {
        ht = asymmetric_cross_attention(h_t, s.audio_features, shared.audio_projection,
                                        all_valid(s.audio_features.dim(0)), attn_text_audio_);
        ha = asymmetric_cross_attention(h_a, seq_t, all_valid(s.text.rows), attn_audio_text_);
      }
      if (has_dim(v)) {
        auto dim = dim_forward(ht, ha, out.text_aux_logits, out.audio_aux_logits, dim_gate_);
        head_in = dim.f;
        out.mismatch = dim.mismatch;
      } else {
        head_in = ops::concat({ht, ha});
        out.mismatch = mismatch_score(ops::cosine_similarity(ht, ha).item());
      }
      out.agreement_logit = agreement_(head_in);
      break;
    }
  }
  const auto hidden = ops::dropout(ops::gelu(mlp_hidden_(head_in)), config_.dropout, rng, training);
  out.class_logits = mlp_out_(hidden);
  return out;
}

std::vector<ModelOutputs> Dacm::forward(std::span<const EncodedSample* const> batch, bool training,
                                        std::mt19937_64& rng) const {
  Shared shared;
  if (uses_text(config_.variant)) shared.text_layer_weights = ops::softmax(wlp_text_, 0);
  if (uses_audio(config_.variant)) {
    const auto mixed = ops::matmul(ops::softmax(wlp_audio_, 0), audio_projections_);
    shared.audio_projection =
        ops::reshape(mixed, {encoders::AudioEncoder::kFeatureCount, config_.width});
  }
  std::vector<ModelOutputs> out;
  out.reserve(batch.size());
  for (const auto* s : batch) out.push_back(forward_one(*s, shared, training, rng));
  return out;
}

ModelOutputs Dacm::forward(const EncodedSample& sample) const {
  std::mt19937_64 rng(0);
  const EncodedSample* one[] = {&sample};
  return std::move(forward(one, false, rng).front());
}

Tensor Dacm::loss(const EncodedSample& sample, const ModelOutputs& out,
                  LossBreakdown* breakdown) const {
  return composite_loss(out, sample.label, aux_label(sample, sample.text_valence, config_.aux_target),
                        aux_label(sample, sample.acoustic_valence, config_.aux_target), config_.loss,
                        breakdown);
}

Tensor Dacm::batch_loss(std::span<const EncodedSample* const> batch, bool training,
                        std::mt19937_64& rng, LossBreakdown* mean_breakdown) const {
  if (batch.empty()) throw ValidationError("empty batch");
  const auto outputs = forward(batch, training, rng);
  std::vector<Tensor> terms;
  terms.reserve(batch.size());
  LossBreakdown acc;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    LossBreakdown b;
    terms.push_back(loss(*batch[i], outputs[i], &b));
    acc.total += b.total;
    acc.ce += b.ce;
    acc.margin += b.margin;
    acc.aux_text += b.aux_text;
    acc.aux_audio += b.aux_audio;
    acc.agreement += b.agreement;
  }
  const double n = static_cast<double>(batch.size());
  if (mean_breakdown) {
    *mean_breakdown = {acc.total / n, acc.ce / n,        acc.margin / n,
                       acc.aux_text / n, acc.aux_audio / n, acc.agreement / n};
  }
  return ops::affine(ops::sum(ops::concat(terms)), 1.0 / n);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

json config_to_json(const ModelConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"width", c.width},
          {"heads", c.heads},
          {"hidden", c.hidden},
          {"projection", c.projection},
          {"text_layers", c.text_layers},
          {"audio_layers", c.audio_layers},
          {"dropout", c.dropout},
          {"encoder_seed", c.encoder_seed},
          {"aux_target", c.aux_target == AuxTarget::CaddLabel ? "label" : "valence"},
          {"loss",
           {{"ce", c.loss.ce},
            {"margin", c.loss.margin},
            {"aux_text", c.loss.aux_text},
            {"aux_audio", c.loss.aux_audio},
            {"agreement", c.loss.agreement},
            {"epsilon", c.loss.epsilon},
            {"margin_m", c.loss.margin_m}}}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.width = j.at("width").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.projection = j.at("projection").get<std::size_t>();
  c.text_layers = j.at("text_layers").get<std::size_t>();
  c.audio_layers = j.at("audio_layers").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.encoder_seed = j.at("encoder_seed").get<std::uint64_t>();
  const auto aux = j.at("aux_target").get<std::string>();
  if (aux != "label" && aux != "valence") throw ValidationError("unknown aux_target '" + aux + "'");
  c.aux_target = aux == "label" ? AuxTarget::CaddLabel : AuxTarget::UnimodalValence;
  const auto& l = j.at("loss");
  c.loss.ce = l.at("ce").get<double>();
  c.loss.margin = l.at("margin").get<double>();
  c.loss.aux_text = l.at("aux_text").get<double>();
  c.loss.aux_audio = l.at("aux_audio").get<double>();
  c.loss.agreement = l.at("agreement").get<double>();
  c.loss.epsilon = l.at("epsilon").get<double>();
  c.loss.margin_m = l.at("margin_m").get<double>();
  return c;
}

}  // namespace

std::string checkpoint_to_json(const Dacm& model) {
  json params = json::array();
  for (const auto& p : model.named_parameters()) {
    params.push_back({{"name", p.name},
                      {"shape", p.tensor.shape()},
                      {"values", std::vector<double>(p.tensor.values().begin(), p.tensor.values().end())}});
  }
  json j{{"format", "cadd-dacm"},
         {"version", kCheckpointVersion},
         {"seed", model.seed()},
         {"config", config_to_json(model.config())},
         {"parameters", std::move(params)}};
  return j.dump();
}

Dacm checkpoint_from_json(const std::string& text) {
  try {
    const auto j = json::parse(text);
    if (j.at("format").get<std::string>() != "cadd-dacm") throw ValidationError("not a DACM checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw ValidationError("unsupported checkpoint version " + std::to_string(version));
    }
    Dacm model(config_from_json(j.at("config")), j.at("seed").get<std::uint64_t>());
    const auto& stored = j.at("parameters");
    if (stored.size() != model.named_parameters().size()) {
      throw ValidationError("checkpoint parameter count does not match its variant");
    }
    for (const auto& entry : stored) {
      const auto name = entry.at("name").get<std::string>();
      Tensor t = model.parameter(name);
      if (entry.at("shape").get<numeric::Shape>() != t.shape()) {
        throw ValidationError("shape mismatch for parameter " + name);
      }
      const auto values = entry.at("values").get<std::vector<double>>();
      if (values.size() != t.size()) throw ValidationError("value count mismatch for " + name);
      std::copy(values.begin(), values.end(), t.values_mut().begin());
    }
    return model;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Dacm& model) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::trunc);
    if (!os) throw IoError("cannot write checkpoint " + tmp.string());
    os << checkpoint_to_json(model);
    if (!os) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Dacm load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace cadd::model
