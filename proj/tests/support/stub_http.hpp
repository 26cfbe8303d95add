#pragma once

#include <functional>
#include <memory>
#include <string>
#include <thread>

#include <httplib.h>

namespace gazemark::testing {

// In-process HTTP server bound to an ephemeral localhost port for the
// lifetime of the object. Register handlers on `server` before the first
// request arrives.
class StubServer {
 public:
  StubServer() : server_(std::make_unique<httplib::Server>()) {
    port_ = server_->bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
  }

  ~StubServer() {
    server_->stop();
    thread_.join();
  }

  StubServer(const StubServer&) = delete;
  StubServer& operator=(const StubServer&) = delete;

  httplib::Server& server() { return *server_; }
  int port() const { return port_; }
  std::string base_url() const {
    return "http://127.0.0.1:" + std::to_string(port_);
  }

 private:
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace gazemark::testing
