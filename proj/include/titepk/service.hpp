#pragma once

// HTTP/JSON service for running trials live. Each trial is a session with a
// version counter; cohort submissions must quote the current version.
// Every accepted mutation is appended to <log_dir>/<id>.jsonl and replayed
// on start-up.

#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

namespace titepk::service {

using nlohmann::json;

struct Options {
  std::string log_dir;  // empty: in-memory only
  std::string token;    // empty: no authentication
};

struct Reply {
  int status = 200;
  json body;
};

class Session;

class TrialService {
 public:
  explicit TrialService(Options options = {});
  ~TrialService();
  TrialService(const TrialService&) = delete;
  TrialService& operator=(const TrialService&) = delete;

  // Transport-independent entry point; `authorization` is the raw header.
  Reply handle(const std::string& method, const std::string& path, const std::string& body,
               const std::string& authorization = {});

  std::size_t sessions() const;
  // Writes <id>.snapshot.json next to each log.
  void snapshot() const;

  static json schemas();

 private:
  Reply create(const json& body);
  Reply submit(Session& s, const json& body, const std::string& raw);
  Reply whatif(Session& s, const json& body);
  std::shared_ptr<Session> find(const std::string& id) const;
  void append_log(const std::string& id, const json& event) const;
  void replay();

  Options options_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

// Thin cpp-httplib front end.
class HttpServer {
 public:
  explicit HttpServer(TrialService& service);
  ~HttpServer();
  // Binds host:port (0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace titepk::service
