#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "schemaloop/service/stages.hpp"

namespace schemaloop::service {

struct ApiError {
  std::string code;
  std::string message;
  nlohmann::json detail;  // null when absent
  int status = 500;

  nlohmann::json to_json() const;
};

// The closed set of codes an error response can carry.
const std::vector<std::string>& api_error_codes();

// Maps a library exception onto the API taxonomy.
ApiError to_api_error(const std::exception& e);

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path session_dir = "sessions";
};

// "host:port", ":port" or "host". Throws ConfigError.
void parse_bind_address(const std::string& address, ServiceConfig& config);

// JSON API over a session directory. Every request reloads state from the store,
// so the process holds nothing that a restart would lose except running jobs.
class ApiService {
 public:
  ApiService(ServiceConfig config, std::shared_ptr<const Resources> resources);
  ~ApiService();
  ApiService(const ApiService&) = delete;
  ApiService& operator=(const ApiService&) = delete;

  // Transport-independent entry point used by the HTTP server and by tests.
  ApiResponse handle(const std::string& method, const std::string& path, const std::string& body,
                     const std::map<std::string, std::string>& query = {});

  // Binds config.host:config.port (port 0 picks a free one) and returns the port.
  int bind();
  // Serves until stop(); call after bind().
  void serve();
  void stop();

  // Blocks until every submitted job has finished.
  void wait_for_jobs();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace schemaloop::service
