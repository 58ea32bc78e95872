// Copyright 2026 The kgedge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// HTTP binding for Service. Kept apart from runtime.hpp so that only the
// server pulls in httplib.

#ifndef KGEDGE_HTTP_HPP_
#define KGEDGE_HTTP_HPP_

#include <string>

#include "httplib.h"
#include "kgedge/runtime.hpp"

namespace kgedge {

inline void route(httplib::Server& server, const Service& service) {
  auto forward = [&service](const httplib::Request& req, httplib::Response& res) {
    const auto out = service.handle(req.method, req.path, req.body);
    res.status = out.status;
    res.set_content(out.body, "application/json");
  };
  // Every path goes through the service so that it picks 404 versus 405.
  server.Get(".*", forward);
  server.Post(".*", forward);
  server.Put(".*", forward);
  server.Delete(".*", forward);
  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      res.set_content(R"({"status":"error","message":"unknown endpoint"})", "application/json");
    }
  });
  server.set_payload_max_length(16u << 20);
}

// Blocks until the server stops. Returns false when binding fails.
inline bool serve(const Service& service) {
  httplib::Server server;
  route(server, service);
  const auto& c = service.config();
  return server.listen(c.bind_address, c.port);
}

}  // namespace kgedge

#endif  // KGEDGE_HTTP_HPP_
