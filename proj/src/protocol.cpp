#include "aepo/protocol.hpp"

#include <cassert>
#include <cmath>

#include <json.hpp>

#include "aepo/text.hpp"

namespace aepo::protocol {

namespace {

constexpr std::string_view kThinkOpen = "<think>";
constexpr std::string_view kThinkClose = "</think>";
constexpr std::string_view kAnswerOpen = "<answer>";
constexpr std::string_view kAnswerClose = "</answer>";

ParseResult fail(FormatError e) {
  ParseResult r;
  r.error = e;
  return r;
}

}  // namespace

const char* format_error_name(FormatError e) {
  switch (e) {
    case FormatError::none: return "none";
    case FormatError::missing_think: return "missing_think";
    case FormatError::missing_answer: return "missing_answer";
    case FormatError::bad_number: return "bad_number";
    case FormatError::empty_set: return "empty_set";
    case FormatError::too_many: return "too_many";
  }
  return "unknown";
}

std::string serialize_response(const Response& r) {
  std::string out;
  out.reserve(r.think.size() + 32 * r.points.size() + 32);
  out += kThinkOpen;
  out += r.think;
  out += kThinkClose;
  out += kAnswerOpen;
  out += '[';
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    if (i > 0) out += ',';
    out += '[';
    out += text::format_double(r.points[i].x);
    out += ',';
    out += text::format_double(r.points[i].y);
    out += ']';
  }
  out += ']';
  out += kAnswerClose;
  return out;
}

ParseResult parse_response(std::string_view s, int n_max) {
  assert(n_max >= 1);

  if (!s.starts_with(kThinkOpen)) return fail(FormatError::missing_think);
  const std::size_t think_from = kThinkOpen.size();
  const std::size_t think_end = s.find(kThinkClose, think_from);
  if (think_end == std::string_view::npos) {
    return fail(FormatError::missing_think);
  }

  std::size_t pos = think_end + kThinkClose.size();
  if (s.substr(pos, kAnswerOpen.size()) != kAnswerOpen) {
    return fail(FormatError::missing_answer);
  }
  pos += kAnswerOpen.size();
  // The closing tag must terminate the string.
  if (s.size() < pos + kAnswerClose.size() ||
      s.substr(s.size() - kAnswerClose.size()) != kAnswerClose) {
    return fail(FormatError::missing_answer);
  }
  const std::string_view payload =
      s.substr(pos, s.size() - kAnswerClose.size() - pos);
  if (payload.find('<') != std::string_view::npos) {
    return fail(FormatError::missing_answer);
  }

  const nlohmann::json arr = nlohmann::json::parse(payload, nullptr, false);
  if (arr.is_discarded() || !arr.is_array()) {
    return fail(FormatError::bad_number);
  }
  if (arr.empty()) return fail(FormatError::empty_set);
  if (arr.size() > static_cast<std::size_t>(n_max)) {
    return fail(FormatError::too_many);
  }

  ParseResult out;
  out.response.think = std::string(s.substr(think_from, think_end - think_from));
  out.response.points.reserve(arr.size());
  for (const auto& pair : arr) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number() ||
        !pair[1].is_number()) {
      return fail(FormatError::bad_number);
    }
    const double x = pair[0].get<double>();
    const double y = pair[1].get<double>();
    if (!std::isfinite(x) || !std::isfinite(y)) {
      return fail(FormatError::bad_number);
    }
    out.response.points.push_back({x, y});
  }
  return out;
}

int format_reward(std::string_view s, int n_max) {
  return parse_response(s, n_max).ok() ? 1 : 0;
}

}  // namespace aepo::protocol
