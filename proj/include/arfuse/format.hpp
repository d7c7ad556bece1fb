#pragma once

// Deterministic text rendering for reports: 17 significant digits for every
// real, sorted JSON keys, no locale dependence.

#include <cmath>
#include <cstdio>
#include <string>

#include <json.hpp>

namespace arfuse::fmt {

inline std::string real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

namespace detail {
inline void escape(const std::string& s, std::string& out) {
  out += '"';
  for (unsigned char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default:
        if (c < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  out += '"';
}

inline void dump(const nlohmann::json& j, std::string& out, int indent, int depth) {
  const auto pad = [&](int d) { out.append(static_cast<std::size_t>(indent * d), ' '); };
  switch (j.type()) {
    case nlohmann::json::value_t::null: out += "null"; break;
    case nlohmann::json::value_t::boolean: out += j.get<bool>() ? "true" : "false"; break;
    case nlohmann::json::value_t::number_integer: out += std::to_string(j.get<std::int64_t>()); break;
    case nlohmann::json::value_t::number_unsigned: out += std::to_string(j.get<std::uint64_t>()); break;
    case nlohmann::json::value_t::number_float: {
      const double v = j.get<double>();
      out += std::isfinite(v) ? real(v) : "null";
      break;
    }
    case nlohmann::json::value_t::string: escape(j.get_ref<const std::string&>(), out); break;
    case nlohmann::json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        break;
      }
      out += "[\n";
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ",\n";
        first = false;
        pad(depth + 1);
        dump(v, out, indent, depth + 1);
      }
      out += '\n';
      pad(depth);
      out += ']';
      break;
    }
    case nlohmann::json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        break;
      }
      out += "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // std::map order: sorted keys
        if (!first) out += ",\n";
        first = false;
        pad(depth + 1);
        escape(it.key(), out);
        out += ": ";
        dump(it.value(), out, indent, depth + 1);
      }
      out += '\n';
      pad(depth);
      out += '}';
      break;
    }
    default: out += "null"; break;
  }
}
}  // namespace detail

/// JSON text with sorted keys, two-space indent, %.17g reals and non-finite
/// reals written as null.
inline std::string json(const nlohmann::json& j) {
  std::string out;
  detail::dump(j, out, 2, 0);
  out += '\n';
  return out;
}

/// A finite real, or null.
inline nlohmann::json json_real(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace arfuse::fmt
