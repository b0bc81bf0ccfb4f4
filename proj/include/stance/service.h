#pragma once

#include <memory>
#include <string>

#include "stance/commands.h"

namespace stance {

// HTTP JSON API over a data directory. Errors are {code, message, details}
// with code one of validation_error, not_found, unauthorized, backend_error,
// internal_error.
class Service {
 public:
  // Opens the article and annotation stores, the extracted sentences and the
  // batch plan. Throws ValidationError when any of them is corrupt, and when
  // a token variable is configured but unset.
  explicit Service(CommandContext ctx);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Port 0 picks a free port. Returns the bound port; throws
  // ValidationError when the address is unavailable.
  int bind(const std::string& host, int port);
  // Serves until stop() is called.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Binds the configured address and serves until SIGINT or SIGTERM.
void serve(const CommandContext& ctx);

}  // namespace stance
