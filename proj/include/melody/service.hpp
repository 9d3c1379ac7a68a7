/*
 * Copyright 2026 The Melody Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Read-only HTTP front end over a loaded summary.
//
//   GET  /health   -> {"status": "ok", ...}
//   GET  /summary  -> the summary document
//   POST /filter   -> filtered view (body: filter spec; empty body = identity)
//   POST /subset   -> {"row": id, "col": id?, "threshold": x?}
//
// Errors carry {"error": message} and, for unknown names, "offenders".
// 400 malformed body, 404 unknown cluster id, 422 unknown class/feature,
// 501 subset without a matrix.

#pragma once

#include <optional>
#include <string>
#include <utility>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "melody/error.hpp"
#include "melody/io.hpp"
#include "melody/matrix.hpp"
#include "melody/summary.hpp"

namespace melody {

struct HttpReply {
  int status = 200;
  std::string body;
};

class SummaryService {
 public:
  explicit SummaryService(Summary summary, std::optional<ExplanationMatrix> matrix = std::nullopt)
      : summary_(std::move(summary)), matrix_(std::move(matrix)), summary_body_(serialize(summary_)) {}

  HttpReply health() const {
    Json j = {{"status", "ok"},
              {"rows", summary_.rows.size()},
              {"cols", summary_.cols.size()},
              {"subset", matrix_.has_value()}};
    return {200, j.dump() + "\n"};
  }

  HttpReply get_summary() const { return {200, summary_body_}; }

  HttpReply post_filter(const std::string& body) const {
    return guarded([&] {
      const auto spec = filter_spec_from_json(parse_body(body));
      return HttpReply{200, serialize(apply_filter(summary_, spec))};
    });
  }

  HttpReply post_subset(const std::string& body) const {
    if (!matrix_) return error(501, "subset extraction needs the server started with --matrix");
    return guarded([&] {
      const auto doc = parse_body(body);
      if (!doc.is_object()) throw InputError("subset request must be a JSON object");
      ClusterId row = 0;
      std::optional<ClusterId> col;
      double threshold = 0.0;
      try {
        for (const auto& [key, value] : doc.items()) {
          if (key == "row") {
            row = value.get<ClusterId>();
          } else if (key == "col") {
            if (!value.is_null()) col = value.get<ClusterId>();
          } else if (key == "threshold") {
            if (!value.is_number()) throw InputError("threshold must be a number");
            threshold = value.get<double>();
          } else {
            throw InputError("unknown subset field '" + key + "'");
          }
        }
      } catch (const Json::exception& e) {
        throw InputError(std::string("subset request: ") + e.what());
      }
      if (!doc.contains("row")) throw InputError("subset request needs 'row'");
      return HttpReply{200, to_json(extract_subset(summary_, *matrix_, row, col, threshold)).dump(2) + "\n"};
    });
  }

  /// Registers the routes on `server`. The service must outlive it.
  void mount(httplib::Server& server) const {
    auto reply = [](httplib::Response& res, const HttpReply& r) {
      res.status = r.status;
      res.set_content(r.body, "application/json");
    };
    server.Get("/health", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, health()); });
    server.Get("/summary",
               [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, get_summary()); });
    server.Post("/filter", [this, reply](const httplib::Request& req, httplib::Response& res) {
      reply(res, post_filter(req.body));
    });
    server.Post("/subset", [this, reply](const httplib::Request& req, httplib::Response& res) {
      reply(res, post_subset(req.body));
    });
    server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
      spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
    });
  }

  const Summary& summary() const { return summary_; }

 private:
  static Json parse_body(const std::string& body) {
    if (body.find_first_not_of(" \t\r\n") == std::string::npos) return Json(nullptr);
    return parse_json(body, "request body");
  }

  static HttpReply error(int status, const std::string& message, const std::vector<std::string>& offenders = {}) {
    Json j = {{"error", message}};
    if (!offenders.empty()) j["offenders"] = offenders;
    return {status, j.dump() + "\n"};
  }

  template <class F>
  HttpReply guarded(F&& f) const {
    try {
      return f();
    } catch (const NotFound& e) {
      // Unknown names in a filter are a semantic error; unknown ids a lookup miss.
      return error(e.offenders().empty() ? 404 : 422, e.what(), e.offenders());
    } catch (const InputError& e) {
      return error(400, e.what());
    } catch (const ConfigError& e) {
      return error(400, e.what());
    } catch (const std::exception& e) {
      spdlog::error("request failed: {}", e.what());
      return error(500, e.what());
    }
  }

  Summary summary_;
  std::optional<ExplanationMatrix> matrix_;
  std::string summary_body_;
};

}  // namespace melody
