#pragma once

#include <httplib.h>

#include <string>
#include <vector>

#include "sakugaflow/codec.hpp"

namespace sakugaflow::testing {

struct StreamEvent {
  std::uint64_t id = 0;
  std::string name;
  std::string data;
};

/// Splits a text/event-stream body into events; comment blocks are skipped.
inline std::vector<StreamEvent> parse_stream(const std::string& body) {
  std::vector<StreamEvent> out;
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto end = body.find("\n\n", pos);
    if (end == std::string::npos) break;
    std::string block = body.substr(pos, end - pos);
    pos = end + 2;
    StreamEvent ev;
    bool any = false;
    std::size_t lp = 0;
    while (lp <= block.size()) {
      auto le = block.find('\n', lp);
      if (le == std::string::npos) le = block.size();
      std::string line = block.substr(lp, le - lp);
      lp = le + 1;
      if (line.rfind("id: ", 0) == 0) {
        ev.id = std::stoull(line.substr(4));
        any = true;
      } else if (line.rfind("event: ", 0) == 0) {
        ev.name = line.substr(7);
      } else if (line.rfind("data: ", 0) == 0) {
        ev.data = line.substr(6);
      }
    }
    if (any) out.push_back(std::move(ev));
  }
  return out;
}

/// Reads a project's backlog (follow=0), resuming after `last_seq` when set.
inline std::vector<StreamEvent> read_backlog(httplib::Client& client, const std::string& project,
                                             std::optional<std::uint64_t> last_seq = std::nullopt) {
  httplib::Headers headers;
  if (last_seq) headers.emplace("Last-Event-Seq", std::to_string(*last_seq));
  auto res = client.Get("/v1/projects/" + project + "/events?follow=0", headers);
  if (!res || res->status != 200) return {};
  return parse_stream(res->body);
}

inline Document json_of(const httplib::Result& res) { return parse_document(res->body); }

}  // namespace sakugaflow::testing
