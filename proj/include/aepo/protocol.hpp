#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "aepo/geometry.hpp"

// Wire format for one model turn:
//
//   <think>TEXT</think><answer>[[x,y],[x,y],...]</answer>
//
// TEXT is opaque (it must not contain the literal "</think>"); the answer is
// a JSON array of 1..n_max [x,y] pairs of finite numbers. The parser is
// strict: no bytes are allowed before <think>, between the two blocks, or
// after </answer>. It never throws on arbitrary input.
namespace aepo::protocol {

using CandidateSet = std::vector<geometry::Point>;

struct Response {
  std::string think;
  CandidateSet points;
};

enum class FormatError {
  none,
  missing_think,
  missing_answer,
  bad_number,
  empty_set,
  too_many,
};

const char* format_error_name(FormatError e);

struct ParseResult {
  FormatError error = FormatError::none;
  Response response;
  bool ok() const { return error == FormatError::none; }
};

// Coordinates are written in shortest round-trip decimal form, so
// parse(serialize(r)) recovers the exact candidate points.
std::string serialize_response(const Response& r);

ParseResult parse_response(std::string_view s, int n_max = 8);

// 1 when s parses, else 0.
int format_reward(std::string_view s, int n_max = 8);

}  // namespace aepo::protocol
