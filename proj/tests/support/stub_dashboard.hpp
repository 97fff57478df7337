#pragma once

// Minimal dashboard ingestion endpoint for exercising the report client.

#include <deque>
#include <mutex>
#include <regex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

namespace psij::testing {

class StubDashboard {
 public:
  StubDashboard() {
    server_.Post("/reports", [this](const httplib::Request& req, httplib::Response& res) { handle(req, res); });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubDashboard() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }
  StubDashboard(const StubDashboard&) = delete;
  StubDashboard& operator=(const StubDashboard&) = delete;

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

  /// Status codes returned to the next requests, before normal handling.
  void script(std::vector<int> statuses) {
    std::lock_guard lock(mutex_);
    scripted_.assign(statuses.begin(), statuses.end());
  }

  int requests() const {
    std::lock_guard lock(mutex_);
    return requests_;
  }
  // Distinct reports stored.
  std::vector<std::string> accepted_bodies() const {
    std::lock_guard lock(mutex_);
    return accepted_;
  }
  int duplicates() const {
    std::lock_guard lock(mutex_);
    return duplicates_;
  }

 private:
  void handle(const httplib::Request& req, httplib::Response& res) {
    std::lock_guard lock(mutex_);
    ++requests_;
    if (!scripted_.empty()) {
      res.status = scripted_.front();
      scripted_.pop_front();
      res.set_content(R"({"status":"unavailable"})", "application/json");
      return;
    }
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const std::exception&) {
      res.status = 400;
      res.set_content(R"({"status":"malformed"})", "application/json");
      return;
    }
    static const std::regex kEmail(R"([^@\s]+@[^@\s]+\.[^@\s]+)");
    const auto email = body.value("submitter_email", std::string());
    if (!std::regex_match(email, kEmail)) {
      res.status = 400;
      res.set_content(R"({"status":"invalid submitter_email"})", "application/json");
      return;
    }
    const std::string hash = req.get_header_value("X-Content-Hash");
    if (!hashes_.insert(hash).second) {
      ++duplicates_;
      res.status = 200;
      res.set_content(R"({"status":"duplicate"})", "application/json");
      return;
    }
    accepted_.push_back(req.body);
    res.status = 200;
    res.set_content(R"({"status":"accepted"})", "application/json");
  }

  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  mutable std::mutex mutex_;
  std::deque<int> scripted_;
  std::set<std::string> hashes_;
  std::vector<std::string> accepted_;
  int requests_ = 0;
  int duplicates_ = 0;
};

}  // namespace psij::testing
