#include "cadd/training/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cadd/errors.hpp"
#include "cadd/seed.hpp"
#include "parallel.hpp"

namespace cadd::training {

using nlohmann::json;
using model::Variant;

namespace {

json report_json(const EvalReport& r) {
  json confusion = json::array();
  for (const auto& row : r.confusion.counts) confusion.push_back(row);
  return {{"macro_f1", r.macro_f1}, {"f1", r.f1},   {"accuracy", r.accuracy},
          {"n", r.n},               {"confusion", confusion}, {"mean_mismatch", r.mean_mismatch}};
}

std::string format(const char* fmt, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, a);
  return buf;
}

}  // namespace

const VariantSummary& AblationReport::find(Variant v) const {
  for (const auto& s : summary)
    if (s.variant == v) return s;
  throw ConfigError("variant " + std::string(model::to_string(v)) + " not in the report");
}

double AblationReport::delta(Variant a, Variant b) const {
  return find(a).mean_macro_f1 - find(b).mean_macro_f1;
}

std::string AblationReport::to_table() const {
  std::ostringstream os;
  os << "variant      F1-mask  F1-cope  F1-cong  macro-F1 (per-class at best seed; macro mean +/- std)\n";
  for (const auto& s : summary) {
    char line[128];
    std::snprintf(line, sizeof line, "%-11s  %7.3f  %7.3f  %7.3f  %.3f +/- %.3f\n",
                  std::string(model::to_string(s.variant)).c_str(), s.best_seed_f1[0],
                  s.best_seed_f1[1], s.best_seed_f1[2], s.mean_macro_f1, s.std_macro_f1);
    os << line;
    if (s.failed_cells) os << "  (" << s.failed_cells << " failed cell(s) excluded)\n";
  }
  const std::pair<Variant, Variant> ladder[] = {
      {Variant::NoAttn, Variant::Base}, {Variant::Full, Variant::NoAttn}, {Variant::Full, Variant::NoDim}};
  bool header = false;
  for (auto [a, b] : ladder) {
    bool have_a = false, have_b = false;
    for (const auto& s : summary) {
      have_a |= s.variant == a;
      have_b |= s.variant == b;
    }
    if (!have_a || !have_b) continue;
    if (!header) {
      os << "\n";
      header = true;
    }
    os << "delta " << model::to_string(a) << " - " << model::to_string(b) << " = "
       << format("%+.3f", delta(a, b)) << "\n";
  }
  return os.str();
}

std::string AblationReport::to_jsonl() const {
  std::ostringstream os;
  for (const auto& c : cells) {
    json j{{"kind", "cell"},
           {"variant", model::to_string(c.variant)},
           {"seed", c.seed},
           {"error", c.error},
           {"best_epoch", c.training.best_epoch},
           {"epochs", c.training.history.size()},
           {"val", report_json(c.val)},
           {"test", report_json(c.test)},
           {"seconds", c.seconds}};
    os << j.dump() << '\n';
  }
  for (const auto& s : summary) {
    json j{{"kind", "summary"},
           {"variant", model::to_string(s.variant)},
           {"mean_macro_f1", s.mean_macro_f1},
           {"std_macro_f1", s.std_macro_f1},
           {"mean_f1", s.mean_f1},
           {"best_seed", s.best_seed},
           {"best_seed_f1", s.best_seed_f1},
           {"best_val_seed", s.best_val_seed},
           {"best_val_seed_f1", s.best_val_seed_f1},
           {"failed_cells", s.failed_cells}};
    os << j.dump() << '\n';
  }
  return os.str();
}

AblationReport run_ablation(const EncodedCorpus& corpus, const AblationOptions& options) {
  if (options.variants.empty() || options.seeds.empty()) {
    throw ConfigError("ablation needs at least one variant and one seed");
  }
  const auto train_idx = corpus.indices(datagen::Split::Train);
  const auto val_idx = corpus.indices(datagen::Split::Val);
  const auto test_idx = corpus.indices(datagen::Split::Test);

  AblationReport report;
  report.cells.resize(options.variants.size() * options.seeds.size());
  std::mutex report_mutex;
  detail::parallel_for(report.cells.size(), std::max(1u, options.threads), [&](std::size_t k) {
    AblationCell cell;
    cell.variant = options.variants[k / options.seeds.size()];
    cell.seed = options.seeds[k % options.seeds.size()];
    const auto start = std::chrono::steady_clock::now();
    auto config = options.model;
    config.variant = cell.variant;
    try {
      model::Dacm net(config, cell.seed);
      cell.training = train(net, corpus, train_idx, val_idx, options.train, cell.seed);
      cell.val = evaluate(net, corpus, val_idx);
      cell.test = evaluate(net, corpus, test_idx);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    cell.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::lock_guard lock(report_mutex);
    report.cells[k] = cell;
    if (options.on_cell) options.on_cell(cell);
  });

  for (std::size_t v = 0; v < options.variants.size(); ++v) {
    VariantSummary s;
    s.variant = options.variants[v];
    std::vector<const AblationCell*> ok;
    for (std::size_t k = 0; k < options.seeds.size(); ++k) {
      const auto& cell = report.cells[v * options.seeds.size() + k];
      if (cell.error.empty()) ok.push_back(&cell);
      else ++s.failed_cells;
    }
    const double n = static_cast<double>(ok.size());
    double best = -1.0, best_val = -1.0;
    for (const auto* cell : ok) {
      if (cell->val.macro_f1 > best_val) {
        best_val = cell->val.macro_f1;
        s.best_val_seed = cell->seed;
        s.best_val_seed_f1 = cell->test.f1;
      }
      s.mean_macro_f1 += cell->test.macro_f1 / n;
      for (std::size_t c = 0; c < kClassCount; ++c) s.mean_f1[c] += cell->test.f1[c] / n;
      if (cell->test.macro_f1 > best) {
        best = cell->test.macro_f1;
        s.best_seed = cell->seed;
        s.best_seed_f1 = cell->test.f1;
      }
    }
    if (ok.size() > 1) {
      double ss = 0.0;
      for (const auto* cell : ok) ss += std::pow(cell->test.macro_f1 - s.mean_macro_f1, 2);
      s.std_macro_f1 = std::sqrt(ss / (n - 1.0));
    }
    report.summary.push_back(s);
  }
  return report;
}

// ---------------------------------------------------------------------------

EncodedCorpus lovo_fold_corpus(const EncodedCorpus& corpus, const std::string& held_out_voice,
                               std::uint64_t seed, double val_fraction) {
  if (val_fraction <= 0.0 || val_fraction >= 1.0) throw ConfigError("val_fraction must be in (0, 1)");
  EncodedCorpus fold = corpus;
  bool found = false;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    std::map<int, std::vector<std::size_t>> groups;
    std::size_t n = 0;
    for (std::size_t i = 0; i < fold.records.size(); ++i) {
      auto& r = fold.records[i];
      if (static_cast<std::size_t>(r.label) != c) continue;
      if (r.voice == held_out_voice) {
        r.split = datagen::Split::Test;
        found = true;
      } else {
        groups[r.sentence_id].push_back(i);
        ++n;
      }
    }
    std::vector<int> order;
    for (const auto& [sid, members] : groups) order.push_back(sid);
    std::mt19937_64 rng(derive_seed({seed, 0x10F0u, c, fnv1a(held_out_voice)}));
    std::shuffle(order.begin(), order.end(), rng);
    const auto val_target = static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(n)));
    std::size_t val_count = 0;
    for (int sid : order) {
      const auto split = val_count < val_target ? datagen::Split::Val : datagen::Split::Train;
      for (auto i : groups[sid]) fold.records[i].split = split;
      if (split == datagen::Split::Val) val_count += groups[sid].size();
    }
  }
  if (!found) throw ConfigError("voice '" + held_out_voice + "' has no samples");
  return fold;
}

std::string LovoReport::to_table() const {
  std::ostringstream os;
  os << "held-out voice  train  val  test  macro-F1\n";
  for (const auto& f : folds) {
    char line[128];
    std::snprintf(line, sizeof line, "%-14s  %5zu  %3zu  %4zu  %.3f\n", f.voice.c_str(), f.train_size,
                  f.val_size, f.test_size, f.test.macro_f1);
    os << line;
  }
  os << "mean macro-F1 " << format("%.3f", mean_macro_f1) << "\n";
  return os.str();
}

std::string LovoReport::to_jsonl() const {
  std::ostringstream os;
  for (const auto& f : folds) {
    json j{{"kind", "fold"},       {"voice", f.voice},       {"train", f.train_size},
           {"val", f.val_size},    {"test_size", f.test_size}, {"best_epoch", f.training.best_epoch},
           {"test", report_json(f.test)}};
    os << j.dump() << '\n';
  }
  os << json{{"kind", "mean"}, {"macro_f1", mean_macro_f1}}.dump() << '\n';
  return os.str();
}

LovoReport run_lovo(const EncodedCorpus& corpus, const model::ModelConfig& config,
                    const TrainConfig& train_config, std::uint64_t seed, double val_fraction,
                    unsigned threads) {
  std::vector<std::string> voices;
  for (const auto& r : corpus.records)
    if (std::find(voices.begin(), voices.end(), r.voice) == voices.end()) voices.push_back(r.voice);
  if (voices.size() != 3) {
    throw ConfigError("leave-one-voice-out needs three voices, found " + std::to_string(voices.size()));
  }

  LovoReport report;
  report.folds.resize(voices.size());
  detail::parallel_for(voices.size(), std::max(1u, threads), [&](std::size_t k) {
    const auto fold_corpus = lovo_fold_corpus(corpus, voices[k], seed, val_fraction);
    const auto train_idx = fold_corpus.indices(datagen::Split::Train);
    const auto val_idx = fold_corpus.indices(datagen::Split::Val);
    const auto test_idx = fold_corpus.indices(datagen::Split::Test);
    model::Dacm net(config, seed);
    LovoFold fold;
    fold.voice = voices[k];
    fold.train_size = train_idx.size();
    fold.val_size = val_idx.size();
    fold.test_size = test_idx.size();
    fold.training = train(net, fold_corpus, train_idx, val_idx, train_config, seed);
    fold.test = evaluate(net, fold_corpus, test_idx);
    report.folds[k] = std::move(fold);
  });
  double sum = 0.0;
  for (const auto& f : report.folds) sum += f.test.macro_f1;
  report.mean_macro_f1 = sum / static_cast<double>(report.folds.size());
  return report;
}

}  // namespace cadd::training
