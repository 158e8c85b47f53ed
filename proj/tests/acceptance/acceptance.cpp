// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cadd/datagen/corpus.hpp"
#include "cadd/datagen/render.hpp"
#include "cadd/datagen/wav.hpp"
#include "cadd/model/attention.hpp"
#include "cadd/model/dacm.hpp"
#include "cadd/model/interaction.hpp"
#include "cadd/numeric/ops.hpp"
#include "cadd/service/server.hpp"
#include "cadd/training/experiments.hpp"
#include "cadd/training/metrics.hpp"
#include "support/gradcheck.hpp"
#include "support/temp_dir.hpp"

using namespace cadd;
using model::Variant;
using numeric::Tensor;
using testing::random_tensor;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void run(const char* id, const char* name, double time_limit_s, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(Clock::now() - t0).count();
  const bool in_time = s < time_limit_s;
  const bool pass = o.pass && in_time;
  failures += !pass;
  std::printf("%s %-2s %-18s %s [%.2fs < %.0fs%s]\n", pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), s,
              time_limit_s, in_time ? "" : " EXCEEDED");
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double log_softmax_at(const std::vector<double>& z, std::size_t c) {
  const double peak = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double x : z) s += std::exp(x - peak);
  return z[c] - peak - std::log(s);
}

double smoothed_ce(const std::vector<double>& z, std::size_t label, double eps) {
  double loss = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c)
    loss -= ((c == label ? 1.0 - eps : 0.0) + eps / static_cast<double>(z.size())) * log_softmax_at(z, c);
  return loss;
}

std::vector<double> normalised(std::vector<double> v) {
  const double n = l2(v);
  for (auto& x : v) x /= n;
  return v;
}

// ---------------------------------------------------------------- criteria

Outcome degeneracy() {
  std::mt19937_64 rng(1);
  const std::size_t d = 768;
  auto grads = [&](std::size_t keys) {
    auto p = model::AttentionParams::init(d, 8, rng);
    const auto q = random_tensor({d}, rng, 1.0, false);
    const auto kv = random_tensor({keys, d}, rng, 1.0, false);
    const auto r = random_tensor({d}, rng, 1.0, false);
    numeric::sum(numeric::mul(model::asymmetric_cross_attention(q, kv, std::vector<bool>(keys, true), p), r))
        .backward();
    return std::pair{l2(p.w_q.grad()), l2(p.w_k.grad())};
  };
  const auto [pq, pk] = grads(1);
  double min_seq = 1e300;
  for (std::size_t t : {2, 3, 98}) {
    const auto [sq, sk] = grads(t);
    min_seq = std::min({min_seq, sq, sk});
  }
  return {pq <= 1e-12 && pk <= 1e-12 && min_seq >= 1e-6,
          fmt("pooled |dW_Q|=%.1e |dW_K|=%.1e (<=1e-12); T'>=2 min=%.2e (>=1e-6)", pq, pk, min_seq)};
}

Outcome dimensions() {
  std::mt19937_64 rng(2);
  std::string detail;
  bool ok = true;
  for (auto [d, want] : {std::pair<std::size_t, std::size_t>{768, 1540}, {64, 132}}) {
    const auto f = model::dim_forward(random_tensor({d}, rng, 1.0, false), random_tensor({d}, rng, 1.0, false),
                                      random_tensor({3}, rng, 1.0, false), random_tensor({3}, rng, 1.0, false),
                                      random_tensor({d, 2 * d}, rng, 0.05, false));
    model::ModelConfig c;
    c.width = d;
    ok = ok && f.f.size() == want && c.head_input_width() == want;
    detail += fmt("d=%zu -> %zu (want %zu) ", d, f.f.size(), want);
  }
  return {ok, detail};
}

Outcome mismatch() {
  std::mt19937_64 rng(3);
  const std::size_t d = 64;
  auto score = [&](const std::vector<double>& a, const std::vector<double>& b) {
    return model::dim_forward(Tensor::vector(a), Tensor::vector(b), Tensor::vector({0, 0, 0}),
                              Tensor::vector({0, 0, 0}), Tensor({d, 2 * d}, 0.0))
        .mismatch;
  };
  std::vector<double> u(d, 0.0), v(d, 0.0), neg(d, 0.0);
  u[0] = 2.0;
  v[1] = 0.5;
  neg[0] = -3.0;
  const double s_same = score(u, u), s_orth = score(u, v), s_anti = score(u, neg);
  const bool anchors = std::abs(s_same) < 1e-12 && std::abs(s_orth - 0.5) < 1e-12 && std::abs(s_anti - 1.0) < 1e-12;

  std::normal_distribution<double> n(0.0, 1.0);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 10000; ++i) {
    // Every fourth pair is parallel, every fourth antiparallel.
    const double tie = i % 4 == 0 ? 1.0 : i % 4 == 1 ? -1.0 : 0.0;
    std::vector<double> a(d), b(d);
    for (std::size_t j = 0; j < d; ++j) {
      a[j] = n(rng);
      b[j] = tie != 0.0 ? tie * a[j] : n(rng);
    }
    const double s = score(a, b);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return {anchors && lo >= 0.0 && hi <= 1.0,
          fmt("S(1,0,-1)=(%.3g, %.3g, %.3g); 10^4 pairs in [%.3g, %.3g]", s_same, s_orth, s_anti, lo, hi)};
}

Outcome loss_composition() {
  const model::LossWeights w;
  const bool defaults = w.ce == 1.0 && w.margin == 0.3 && w.aux_text == 0.2 && w.aux_audio == 0.2 &&
                        w.agreement == 0.1 && w.epsilon == 0.1;
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n(0.0, 2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> z(3), yt(3), ya(3), zt(16), za(16);
    for (auto* v : {&z, &yt, &ya, &zt, &za})
      for (auto& x : *v) x = n(rng);
    zt = normalised(zt);
    za = normalised(za);
    const double agree = n(rng);
    const std::size_t label = static_cast<std::size_t>(trial % 3);

    model::ModelOutputs out;
    out.class_logits = Tensor::vector(z);
    out.text_aux_logits = Tensor::vector(yt);
    out.audio_aux_logits = Tensor::vector(ya);
    out.agreement_logit = Tensor::vector({agree});
    out.z_t = Tensor::vector(zt);
    out.z_a = Tensor::vector(za);

    double cos = 0.0;
    for (std::size_t i = 0; i < zt.size(); ++i) cos += zt[i] * za[i];
    const double margin = label == 2 ? 1.0 - cos : std::max(0.0, cos);
    const double y = label == 2 ? 1.0 : 0.0;
    const double p = 1.0 / (1.0 + std::exp(-agree));
    const double bce = -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    const double want = smoothed_ce(z, label, 0.1) + 0.3 * margin + 0.2 * smoothed_ce(yt, label, 0.1) +
                        0.2 * smoothed_ce(ya, label, 0.1) + 0.1 * bce;
    worst = std::max(worst, std::abs(model::composite_loss(out, label, w).item() - want));
  }
  return {defaults && worst < 1e-10, fmt("weights (1,.3,.2,.2,.1) eps=.1; max |L - oracle| = %.1e over 200 points", worst)};
}

model::ModelConfig micro_config() {
  model::ModelConfig c;
  c.width = 8;
  c.heads = 2;
  c.hidden = 6;
  c.projection = 4;
  c.text_layers = 3;
  c.audio_layers = 3;
  return c;
}

Outcome gradients() {
  const auto config = micro_config();
  const model::Featurizer fz(config);
  std::mt19937_64 rng(17);
  auto a = fz.encode_features("good morning", random_tensor({3, 8}, rng, 1.0, false));
  auto b = fz.encode_features("awful morning", random_tensor({3, 8}, rng, 1.0, false));
  a.label = 0;
  b.label = 2;
  const model::EncodedSample* batch[] = {&a, &b};
  if (a.text.rows != 3 || a.audio_features.dim(0) != 3) return {false, "micro-instance is not T=3"};

  auto worst_error = [&](const model::Dacm& net, bool skip_upstream) {
    std::mt19937_64 r(0);
    auto eval = [&] { return net.batch_loss(batch, false, r).item(); };
    for (auto t : net.parameters()) t.zero_grad();
    net.batch_loss(batch, false, r).backward();
    double worst = 0.0;
    for (const auto& p : net.named_parameters()) {
      if (skip_upstream && (p.name.rfind("wlp.", 0) == 0 || p.name.rfind("aux.", 0) == 0)) continue;
      const std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
      auto t = p.tensor;
      worst = std::max(worst, testing::relative_error(analytic, testing::finite_difference(eval, t, 1e-5)));
    }
    return worst;
  };

  // Generic point: every parameter off the detached route's upstream.
  const model::Dacm generic(config, 5);
  const double err_generic = worst_error(generic, true);
  // Columns of f that carry the detached logits zeroed: L is then constant
  // along that route and differences check every parameter.
  const model::Dacm pinned(config, 5);
  const std::size_t in = model::interaction_width(config.width);
  for (const char* name : {"mlp.0.weight", "agreement.weight"}) {
    auto w = pinned.parameter(name);
    auto v = w.values_mut();
    for (std::size_t row = 0; row < w.dim(0); ++row)
      for (std::size_t c = in - model::kClassCount; c < in; ++c) v[row * in + c] = 0.0;
  }
  const double err_all = worst_error(pinned, false);

  // Stop-gradient: class logits alone leave the aux heads with exact zeros.
  const model::Dacm net(config, 6);
  std::mt19937_64 r(0);
  const auto outs = net.forward(batch, false, r);
  numeric::sum(numeric::add(outs[0].class_logits, outs[1].class_logits)).backward();
  double aux = 0.0;
  for (const auto* t : {&net.text_aux_head().weight, &net.text_aux_head().bias, &net.audio_aux_head().weight,
                        &net.audio_aux_head().bias})
    for (double g : t->grad()) aux = std::max(aux, std::abs(g));

  return {err_generic < 1e-4 && err_all < 1e-4 && aux == 0.0,
          fmt("%zu params; max rel err %.1e (generic), %.1e (all, d-columns pinned); aux grad via logits %.1g",
              net.named_parameters().size(), err_generic, err_all, aux)};
}

Outcome corpus(const fs::path& dir, std::vector<datagen::ManifestRecord>& out) {
  datagen::GenerateOptions opt;
  opt.out_dir = dir;
  opt.seed = 42;
  const auto records = datagen::generate_corpus(opt);
  const auto s = datagen::summarize(records);

  bool counts = s.total == 1800;
  for (std::size_t c = 0; c < 3; ++c)
    counts = counts && s.per_class[c] == 600 && s.per_class_split[c][0] == 420 && s.per_class_split[c][1] == 90 &&
             s.per_class_split[c][2] == 90;

  std::map<int, datagen::Valence> pool;
  for (const auto& p : datagen::sentence_pool()) pool[p.sentence_id] = p.text_valence;
  bool labels = true, files = true;
  std::array<std::array<std::set<int>, 3>, 3> groups;  // [class][split]
  std::size_t wav_count = 0;
  for (const auto& r : records) {
    labels = labels && r.label == datagen::derive_label(r.text_valence, r.acoustic_valence) &&
             r.text_valence == pool.at(r.sentence_id) &&
             r.acoustic_valence == datagen::emotion_tag(r.emotion_tag).acoustic_valence;
    if (r.split != datagen::Split::Unassigned)
      groups[static_cast<int>(r.label)][static_cast<int>(r.split)].insert(r.sentence_id);
    files = files && fs::is_regular_file(dir / r.audio_path);
    wav_count += files;
  }
  // Reading a sample of the files back checks they decode.
  for (std::size_t i = 0; i < records.size(); i += 97)
    files = files && !datagen::read_wav(dir / records[i].audio_path).samples.empty();

  // Train shares no sentence with val or test. Masking and Coping groups hold
  // 12 samples, so a 90-sample split takes 7.5 groups and val/test share one.
  bool disjoint = true;
  std::string shared;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto& g = groups[c];
    std::size_t train_overlap = 0, val_test = 0;
    for (int id : g[0]) train_overlap += g[1].count(id) + g[2].count(id);
    for (int id : g[1]) val_test += g[2].count(id);
    disjoint = disjoint && train_overlap == 0 && val_test <= 1;
    shared += fmt("%s%zu", c ? "/" : "", val_test);
  }
  out = records;
  return {counts && labels && files && disjoint,
          fmt("%zu samples, 600/class, 420/90/90 each: %s; labels %s; train disjoint %s (val/test shared groups %s); %zu wav",
              s.total, counts ? "yes" : "no", labels ? "consistent" : "INCONSISTENT", disjoint ? "yes" : "no",
              shared.c_str(), wav_count)};
}

Outcome metrics(const std::vector<datagen::ManifestRecord>& records) {
  std::vector<std::size_t> truth;
  for (const auto& r : records)
    if (r.split == datagen::Split::Test) truth.push_back(static_cast<std::size_t>(r.label));
  const std::vector<std::size_t> all_congruent(truth.size(), model::kCongruentLabel);
  const auto rep = training::score(truth, all_congruent);
  const bool constant = rep.f1[0] == 0.0 && rep.f1[1] == 0.0 && std::abs(rep.f1[2] - 0.5) < 1e-12 &&
                        std::abs(rep.macro_f1 - 1.0 / 6.0) < 1e-12;
  const double mc = training::stratified_random_macro_f1(truth, 100000, 42);
  return {constant && std::abs(mc - 1.0 / 3.0) <= 0.01,
          fmt("all-Congruent F1=(%.3f, %.3f, %.3f) macro %.3f; stratified random %.4f over 1e5 draws (0.333+-0.01)",
              rep.f1[0], rep.f1[1], rep.f1[2], rep.macro_f1, mc)};
}

training::EncodedCorpus load_corpus(const std::vector<datagen::ManifestRecord>& records, const fs::path& root,
                                    const model::ModelConfig& config) {
  const auto feats = training::extract_audio_features(records, root, 42, 0);
  return training::encode_corpus(records, feats, config);
}

Outcome ablation(const training::EncodedCorpus& corpus, const model::ModelConfig& config) {
  training::AblationOptions opt;
  opt.model = config;
  opt.variants.assign(model::all_variants().begin(), model::all_variants().end());
  opt.seeds = {42, 123, 456};
  opt.threads = std::max(1u, std::thread::hardware_concurrency());
  const auto rep = training::run_ablation(corpus, opt);
  std::istringstream table(rep.to_table());
  for (std::string line; std::getline(table, line);) std::printf("     %s\n", line.c_str());

  std::size_t failed = 0;
  for (const auto& s : rep.summary) failed += s.failed_cells;
  const double full_noattn = rep.delta(Variant::Full, Variant::NoAttn);
  const double full_base = rep.delta(Variant::Full, Variant::Base);
  const double audio_text = rep.delta(Variant::AudioOnly, Variant::TextOnly);
  const double text_only = rep.find(Variant::TextOnly).mean_macro_f1;
  return {failed == 0 && full_noattn >= 0.05 && full_base >= 0.05 && audio_text >= 0.05 && text_only <= 0.60,
          fmt("d=64 seeds {42,123,456}: Full-noAttn %+.3f, Full-Base %+.3f, AudioOnly-TextOnly %+.3f (each >=0.05); "
              "TextOnly %.3f (<=0.60)",
              full_noattn, full_base, audio_text, text_only)};
}

Outcome lovo(const training::EncodedCorpus& corpus, const model::ModelConfig& config) {
  const auto rep = training::run_lovo(corpus, config, {}, 42, 0.15, std::max(1u, std::thread::hardware_concurrency()));
  std::set<std::string> voices;
  double sum = 0.0;
  bool sizes = true;
  std::string detail;
  for (const auto& f : rep.folds) {
    voices.insert(f.voice);
    sum += f.test.macro_f1;
    sizes = sizes && f.test_size == 600 && f.test.n == 600 && f.train_size + f.val_size == 1200;
    detail += fmt("%s %.3f, ", f.voice.c_str(), f.test.macro_f1);
  }
  std::set<std::string> expected;
  for (const auto& v : datagen::voices()) expected.insert(std::string(v.name));
  const double mean = rep.folds.empty() ? 0.0 : sum / static_cast<double>(rep.folds.size());
  return {rep.folds.size() == 3 && voices == expected && sizes && std::abs(rep.mean_macro_f1 - mean) < 1e-12,
          detail + fmt("mean %.3f (recomputed %.3f)", rep.mean_macro_f1, mean)};
}

Outcome journal_service(const fs::path& dir) {
  model::ModelConfig config;
  const model::Dacm net(config, 42);
  fs::create_directories(dir);
  model::save_checkpoint(dir / "model.json", net);

  service::ServiceConfig sc;
  sc.port = 0;
  sc.store_dir = dir / "store";
  sc.checkpoint = dir / "model.json";
  service::JournalService svc(sc);
  const int port = svc.start();
  httplib::Client client("127.0.0.1", port);

  const std::string text = "I'm fine, today went well.";
  const auto wav = datagen::encode_wav_pcm16(
      datagen::render_waveform(text, datagen::voice("Juniper"), datagen::emotion_tag("sad"), 1));
  auto form = [&](const std::string& audio) {
    return httplib::MultipartFormDataItems{{"text", text, "", ""}, {"audio", audio, "entry.wav", "audio/wav"}};
  };

  const auto created = client.Post("/entries", form(std::string(wav.begin(), wav.end())));
  bool round_trip = false;
  if (created && created->status == 201) {
    const auto id = nlohmann::json::parse(created->body)["entry_id"].get<std::uint64_t>();
    const auto got = client.Get("/entries/" + std::to_string(id));
    round_trip = got && got->status == 200 && got->body == created->body;
  }

  const auto& policy = svc.analyzer()->policy();
  const bool boundary = policy.decide(0, 0.05) == service::PromptKey::None &&
                        policy.decide(1, 0.05) == service::PromptKey::None &&
                        policy.decide(0, std::nextafter(0.05, 1.0)) == service::PromptKey::Masking;

  const auto bad = client.Post("/entries", form(std::string(wav.begin(), wav.begin() + 44) + "garbage"));
  const int bad_status = bad ? bad->status : -1;
  const std::size_t stored = svc.store().size();
  svc.stop();
  return {round_trip && boundary && bad_status == 422 && stored == 1,
          fmt("create->get identical: %s; S=0.05 prompts: %s; malformed WAV -> %d; entries stored %zu",
              round_trip ? "yes" : "no", boundary ? "none" : "YES", bad_status, stored)};
}

}  // namespace

int main() {
  std::printf("cadd acceptance (%u hardware threads)\n", std::thread::hardware_concurrency());
  run("1", "degeneracy", 1, degeneracy);
  run("2", "dimensions", 1, dimensions);
  run("3", "mismatch-score", 60, mismatch);
  run("4", "loss-composition", 60, loss_composition);
  run("5", "gradients", 30, gradients);

  testing::TempDir dir("acceptance");
  std::vector<datagen::ManifestRecord> records;
  run("6", "corpus", 120, [&] { return corpus(dir.path / "corpus", records); });
  run("7", "metrics", 60, [&] { return metrics(records); });

  std::optional<training::EncodedCorpus> encoded;
  const model::ModelConfig config;  // d = 64
  run("8", "ablation-ordering", 1800, [&] {
    if (records.empty()) return Outcome{false, "no corpus"};
    encoded = load_corpus(records, dir.path / "corpus", config);
    return ablation(*encoded, config);
  });
  run("9", "lovo", 1800, [&] {
    if (!encoded) return Outcome{false, "no corpus"};
    return lovo(*encoded, config);
  });
  run("10", "service", 60, [&] { return journal_service(dir.path / "service"); });

  std::printf("%s: %d of 10 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
