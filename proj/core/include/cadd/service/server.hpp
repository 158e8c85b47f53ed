#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "cadd/service/journal.hpp"

namespace cadd::service {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path store_dir = "journal";
  std::optional<std::filesystem::path> checkpoint;
  PromptPolicy policy;
  std::size_t default_list_limit = 50;
};

/// HTTP front end for the journal:
///   POST /entries            multipart text + audio -> 201 entry JSON
///   GET  /entries?limit=K    newest first
///   GET  /entries/{id}       full entry
///   GET  /entries/{id}/audio stored WAV
///   GET  /healthz
/// Malformed input is 422, unknown ids 404, and a missing checkpoint or a
/// failed store write 503.
class JournalService {
 public:
  explicit JournalService(ServiceConfig config);
  ~JournalService();
  JournalService(const JournalService&) = delete;
  JournalService& operator=(const JournalService&) = delete;

  /// Replaces the served checkpoint; in-flight requests keep the previous one.
  void set_analyzer(std::shared_ptr<const Analyzer> analyzer);
  void load_checkpoint(const std::filesystem::path& path);
  std::shared_ptr<const Analyzer> analyzer() const;

  JournalStore& store();

  /// Binds and serves on a background thread. Returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cadd::service
