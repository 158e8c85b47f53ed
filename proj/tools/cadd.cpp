// cadd: corpus generation, training, evaluation, ablation, LOVO and the
// journal service from one binary.

#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cadd/datagen/corpus.hpp"
#include "cadd/errors.hpp"
#include "cadd/service/server.hpp"
#include "cadd/training/experiments.hpp"

namespace fs = std::filesystem;
using namespace cadd;

namespace {

struct CorpusSource {
  std::string manifest;          // empty: render in memory
  std::uint64_t corpus_seed = 42;
  unsigned threads = 0;

  void add(CLI::App* app) {
    app->add_option("--manifest", manifest, "manifest.jsonl written by `cadd datagen`");
    app->add_option("--corpus-seed", corpus_seed, "seed of an in-memory corpus when no manifest is given");
    app->add_option("--threads", threads, "worker threads (0 = all cores)");
  }

  training::EncodedCorpus load(const model::ModelConfig& config) const {
    std::vector<datagen::ManifestRecord> records;
    std::optional<fs::path> root;
    if (manifest.empty()) {
      records = datagen::build_manifest(corpus_seed);
      datagen::split_stratified(records, {}, corpus_seed);
    } else {
      records = datagen::read_manifest(manifest);
      root = fs::path(manifest).parent_path();
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto feats = training::extract_audio_features(records, root, corpus_seed, threads);
    auto corpus = training::encode_corpus(std::move(records), feats, config);
    std::fprintf(stderr, "encoded %zu samples in %.1fs\n", corpus.samples.size(),
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return corpus;
  }
};

struct ModelOptions {
  std::string variant = "Full";
  std::size_t width = encoders::kDefaultWidth;
  std::size_t heads = 0;  // 0: 4 below d=768, else 8
  std::size_t max_epochs = 60;
  std::size_t patience = 7;
  double lr = 5e-4;

  void add(CLI::App* app, bool with_variant = true) {
    if (with_variant) app->add_option("--variant", variant, "TextOnly|AudioOnly|Base|noAttn|noDIM|Full");
    app->add_option("--width", width, "encoder width d");
    app->add_option("--heads", heads, "attention heads (default 4, or 8 at d >= 768)");
    app->add_option("--epochs", max_epochs, "maximum epochs");
    app->add_option("--patience", patience, "early-stopping patience in epochs");
    app->add_option("--lr", lr, "AdamW learning rate");
  }

  model::ModelConfig model() const {
    model::ModelConfig c;
    c.variant = model::parse_variant(variant);
    c.width = width;
    c.heads = heads ? heads : (width >= 768 ? 8 : 4);
    return c;
  }

  training::TrainConfig train() const {
    training::TrainConfig t;
    t.max_epochs = max_epochs;
    t.patience = patience;
    t.optimizer.lr = lr;
    return t;
  }
};

void print_report(const char* name, const training::EvalReport& r) {
  std::printf("%-5s macro-F1 %.3f  F1 (mask %.3f, cope %.3f, cong %.3f)  acc %.3f  n=%zu\n", name, r.macro_f1,
              r.f1[0], r.f1[1], r.f1[2], r.accuracy, r.n);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  os << text;
  if (!os) throw IoError("cannot write " + path.string());
}

service::JournalService* g_service = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-modal affective dissonance detection"};
  app.require_subcommand(1);

  // datagen
  datagen::GenerateOptions gen;
  std::string gen_out;
  auto* datagen_cmd = app.add_subcommand("datagen", "render the corpus and write manifest.jsonl + wav/");
  datagen_cmd->add_option("--out", gen_out, "output directory")->required();
  datagen_cmd->add_option("--seed", gen.seed, "corpus seed");
  datagen_cmd->add_flag("--dry-run", gen.dry_run, "build and split the manifest only");
  datagen_cmd->add_option("--threads", gen.threads, "render threads (0 = all cores)");

  // train
  CorpusSource train_src;
  ModelOptions train_opt;
  std::uint64_t train_seed = 42;
  std::string train_out;
  auto* train_cmd = app.add_subcommand("train", "train one variant and save its checkpoint");
  train_src.add(train_cmd);
  train_opt.add(train_cmd);
  train_cmd->add_option("--seed", train_seed, "training seed");
  train_cmd->add_option("--out", train_out, "output directory")->required();

  // eval
  CorpusSource eval_src;
  std::string eval_ckpt, eval_split = "test";
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on one split");
  eval_src.add(eval_cmd);
  eval_cmd->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--split", eval_split, "train|val|test");

  // ablate
  CorpusSource abl_src;
  ModelOptions abl_opt;
  std::vector<std::string> abl_variants;
  std::vector<std::uint64_t> abl_seeds{42, 123, 456};
  std::string abl_out;
  unsigned abl_jobs = 1;
  auto* abl_cmd = app.add_subcommand("ablate", "all variants over several seeds");
  abl_src.add(abl_cmd);
  abl_opt.add(abl_cmd, false);
  abl_cmd->add_option("--variants", abl_variants, "subset of variants (default: all six)");
  abl_cmd->add_option("--seeds", abl_seeds, "training seeds");
  abl_cmd->add_option("--jobs", abl_jobs, "cells trained in parallel");
  abl_cmd->add_option("--out", abl_out, "line-delimited report path");

  // lovo
  CorpusSource lovo_src;
  ModelOptions lovo_opt;
  std::uint64_t lovo_seed = 42;
  std::string lovo_out;
  auto* lovo_cmd = app.add_subcommand("lovo", "leave-one-voice-out evaluation");
  lovo_src.add(lovo_cmd);
  lovo_opt.add(lovo_cmd);
  lovo_cmd->add_option("--seed", lovo_seed, "training seed");
  lovo_cmd->add_option("--out", lovo_out, "line-delimited report path");

  // serve
  service::ServiceConfig serve;
  std::string serve_ckpt, serve_store = "journal";
  auto* serve_cmd = app.add_subcommand("serve", "run the journal HTTP service");
  serve_cmd->add_option("--host", serve.host, "listen address")->envname("CADD_HOST");
  serve_cmd->add_option("--port", serve.port, "listen port")->envname("CADD_PORT");
  serve_cmd->add_option("--store", serve_store, "journal directory")->envname("CADD_STORE");
  serve_cmd->add_option("--ckpt", serve_ckpt, "checkpoint file")->envname("CADD_CHECKPOINT");
  serve_cmd->add_option("--threshold", serve.policy.threshold, "mismatch score above which prompts fire")
      ->envname("CADD_PROMPT_THRESHOLD");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*datagen_cmd) {
      gen.out_dir = gen_out;
      const auto t0 = std::chrono::steady_clock::now();
      const auto records = datagen::generate_corpus(gen);
      const auto s = datagen::summarize(records);
      std::printf("%zu samples%s in %.1fs\n", s.total, gen.dry_run ? " (dry run)" : "",
                  std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      for (std::size_t c = 0; c < datagen::kNumClasses; ++c) {
        std::printf("  %-9s %zu  train/val/test %zu/%zu/%zu\n",
                    std::string(datagen::to_string(static_cast<datagen::CaddClass>(c))).c_str(), s.per_class[c],
                    s.per_class_split[c][0], s.per_class_split[c][1], s.per_class_split[c][2]);
      }
    } else if (*train_cmd) {
      const auto config = train_opt.model();
      const auto corpus = train_src.load(config);
      model::Dacm net(config, train_seed);
      const auto result = training::train(
          net, corpus, corpus.indices(datagen::Split::Train), corpus.indices(datagen::Split::Val),
          train_opt.train(), train_seed, [](const training::EpochRecord& r) {
            std::fprintf(stderr, "epoch %3zu  loss %.4f  val macro-F1 %.3f\n", r.epoch, r.train_loss, r.val_macro_f1);
          });
      const fs::path out(train_out);
      fs::create_directories(out);
      model::save_checkpoint(out / "checkpoint.json", net);
      std::string history;
      for (const auto& h : result.history) {
        char line[256];
        std::snprintf(line, sizeof line,
                      "{\"epoch\":%zu,\"loss\":%.17g,\"ce\":%.17g,\"margin\":%.17g,\"aux_text\":%.17g,"
                      "\"aux_audio\":%.17g,\"agreement\":%.17g,\"val_macro_f1\":%.17g}\n",
                      h.epoch, h.train_loss, h.components.ce, h.components.margin, h.components.aux_text,
                      h.components.aux_audio, h.components.agreement, h.val_macro_f1);
        history += line;
      }
      write_text(out / "history.jsonl", history);
      std::printf("best epoch %zu of %zu\n", result.best_epoch, result.history.size());
      print_report("val", training::evaluate(net, corpus, corpus.indices(datagen::Split::Val)));
    } else if (*eval_cmd) {
      const auto net = model::load_checkpoint(eval_ckpt);
      const auto corpus = eval_src.load(net.config());
      const auto split = datagen::parse_split(eval_split);
      print_report(eval_split.c_str(), training::evaluate(net, corpus, corpus.indices(split)));
    } else if (*abl_cmd) {
      training::AblationOptions opt;
      opt.model = abl_opt.model();
      opt.train = abl_opt.train();
      opt.seeds = abl_seeds;
      opt.threads = abl_jobs;
      if (abl_variants.empty()) {
        opt.variants.assign(model::all_variants().begin(), model::all_variants().end());
      } else {
        for (const auto& v : abl_variants) opt.variants.push_back(model::parse_variant(v));
      }
      const auto corpus = abl_src.load(opt.model);
      opt.on_cell = [](const training::AblationCell& c) {
        if (c.error.empty()) {
          std::fprintf(stderr, "%-9s seed %-4lu test macro-F1 %.3f (%zu epochs, %.1fs)\n",
                       std::string(model::to_string(c.variant)).c_str(), static_cast<unsigned long>(c.seed),
                       c.test.macro_f1, c.training.history.size(), c.seconds);
        } else {
          std::fprintf(stderr, "%-9s seed %-4lu FAILED: %s\n", std::string(model::to_string(c.variant)).c_str(),
                       static_cast<unsigned long>(c.seed), c.error.c_str());
        }
      };
      const auto report = training::run_ablation(corpus, opt);
      std::printf("%s", report.to_table().c_str());
      if (!abl_out.empty()) write_text(abl_out, report.to_jsonl());
    } else if (*lovo_cmd) {
      const auto config = lovo_opt.model();
      const auto corpus = lovo_src.load(config);
      const auto report =
          training::run_lovo(corpus, config, lovo_opt.train(), lovo_seed, 0.15, lovo_src.threads ? lovo_src.threads : 3);
      std::printf("%s", report.to_table().c_str());
      if (!lovo_out.empty()) write_text(lovo_out, report.to_jsonl());
    } else if (*serve_cmd) {
      serve.store_dir = serve_store;
      if (!serve_ckpt.empty()) serve.checkpoint = serve_ckpt;
      service::JournalService svc(serve);
      g_service = &svc;
      std::signal(SIGINT, [](int) {
        if (g_service) g_service->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (g_service) g_service->stop();
      });
      std::fprintf(stderr, "serving on %s:%d (store %s, checkpoint %s)\n", serve.host.c_str(), serve.port,
                   serve_store.c_str(), serve_ckpt.empty() ? "none" : serve_ckpt.c_str());
      svc.run();
      g_service = nullptr;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
