#include "cadd/service/server.hpp"

#include <fstream>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cadd/errors.hpp"

namespace cadd::service {

using nlohmann::json;

namespace {

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", message}}.dump(), "application/json");
}

json entry_json(const JournalEntry& e, const PromptPolicy& policy) {
  auto j = json::parse(to_json(e));
  const auto* prompt = policy.text_for(e.analysis.prompt_key);
  j["prompt"] = prompt ? json(*prompt) : json(nullptr);
  return j;
}

}  // namespace

struct JournalService::Impl {
  explicit Impl(ServiceConfig c) : config(std::move(c)), store(config.store_dir) {}

  ServiceConfig config;
  JournalStore store;
  httplib::Server server;
  std::thread thread;
  mutable std::mutex analyzer_mutex;
  std::shared_ptr<const Analyzer> current;

  std::shared_ptr<const Analyzer> analyzer() const {
    std::lock_guard lock(analyzer_mutex);
    return current;
  }

  void routes() {
    server.set_payload_max_length(32u << 20);

    server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
      json j{{"status", "ok"}, {"checkpoint_loaded", analyzer() != nullptr}, {"entries", store.size()}};
      res.set_content(j.dump(), "application/json");
    });

    server.Post("/entries", [this](const httplib::Request& req, httplib::Response& res) {
      if (!req.is_multipart_form_data() || !req.has_file("text") || !req.has_file("audio")) {
        send_error(res, 422, "expected multipart fields 'text' and 'audio'");
        return;
      }
      const auto analyzer_now = analyzer();
      if (!analyzer_now) {
        send_error(res, 503, "no checkpoint loaded");
        return;
      }
      const std::string text = req.get_file_value("text").content;
      const std::string& audio = req.get_file_value("audio").content;
      const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(audio.data()),
                                                audio.size());
      Analysis analysis;
      try {
        analysis = analyzer_now->analyze_wav(text, bytes);
      } catch (const ValidationError& e) {
        send_error(res, 422, e.what());
        return;
      }
      try {
        const auto entry = store.create(text, bytes, analysis);
        res.status = 201;
        res.set_content(entry_json(entry, config.policy).dump(), "application/json");
      } catch (const IoError& e) {
        res.set_header("Retry-After", "1");
        send_error(res, 503, e.what());
      }
    });

    server.Get("/entries", [this](const httplib::Request& req, httplib::Response& res) {
      std::size_t limit = config.default_list_limit;
      if (req.has_param("limit")) {
        try {
          const auto v = std::stoll(req.get_param_value("limit"));
          if (v < 0) throw std::invalid_argument("negative");
          limit = static_cast<std::size_t>(v);
        } catch (const std::exception&) {
          send_error(res, 422, "limit must be a non-negative integer");
          return;
        }
      }
      json items = json::array();
      for (const auto& e : store.list(limit)) {
        items.push_back({{"entry_id", e.entry_id},
                         {"created_at", e.created_at},
                         {"predicted_class",
                          datagen::to_string(static_cast<datagen::CaddClass>(e.analysis.predicted_class))},
                         {"mismatch_S", e.analysis.mismatch_S}});
      }
      res.set_content(items.dump(), "application/json");
    });

    auto lookup = [this](const httplib::Request& req, httplib::Response& res) -> std::optional<JournalEntry> {
      std::optional<JournalEntry> e;
      try {
        e = store.get(std::stoull(req.matches[1].str()));
      } catch (const std::out_of_range&) {
      }
      if (!e) send_error(res, 404, "no entry " + req.matches[1].str());
      return e;
    };

    server.Get(R"(/entries/(\d+))", [this, lookup](const httplib::Request& req, httplib::Response& res) {
      if (auto e = lookup(req, res)) {
        res.set_content(entry_json(*e, config.policy).dump(), "application/json");
      }
    });

    server.Get(R"(/entries/(\d+)/audio)", [this, lookup](const httplib::Request& req, httplib::Response& res) {
      auto e = lookup(req, res);
      if (!e) return;
      std::ifstream is(store.audio_path(*e), std::ios::binary);
      if (!is) {
        send_error(res, 404, "audio missing for entry " + std::to_string(e->entry_id));
        return;
      }
      std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
      res.set_content(std::move(bytes), "audio/wav");
    });
  }
};

JournalService::JournalService(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {
  impl_->routes();
  if (impl_->config.checkpoint) load_checkpoint(*impl_->config.checkpoint);
}

JournalService::~JournalService() { stop(); }

void JournalService::set_analyzer(std::shared_ptr<const Analyzer> analyzer) {
  std::lock_guard lock(impl_->analyzer_mutex);
  impl_->current = std::move(analyzer);
}

void JournalService::load_checkpoint(const std::filesystem::path& path) {
  set_analyzer(std::make_shared<const Analyzer>(model::load_checkpoint(path), impl_->config.policy));
}

std::shared_ptr<const Analyzer> JournalService::analyzer() const { return impl_->analyzer(); }

JournalStore& JournalService::store() { return impl_->store; }

int JournalService::start() {
  int port = impl_->config.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(impl_->config.host);
  } else if (!impl_->server.bind_to_port(impl_->config.host, port)) {
    port = -1;
  }
  if (port < 0) throw IoError("cannot bind " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void JournalService::run() {
  if (!impl_->server.listen(impl_->config.host, impl_->config.port)) {
    throw IoError("cannot listen on " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  }
}

void JournalService::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace cadd::service
