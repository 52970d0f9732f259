#include "smia/jsonl.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "smia/error.hpp"

namespace smia::jsonl {

std::string Where::str() const { return file + ":" + std::to_string(line); }

void require_file(const std::filesystem::path& path, std::string_view producing_stage) {
  if (!std::filesystem::exists(path)) {
    fail(ErrorKind::upstream_missing,
         "missing input " + path.string() + " (produced by stage '" + std::string(producing_stage) + "')");
  }
}

void for_each_line(const std::filesystem::path& path, const std::function<void(const Json&, const Where&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::upstream_missing, "cannot open " + path.string());
  std::string line;
  Where where{path.string(), 0};
  while (std::getline(in, line)) {
    ++where.line;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      fail(ErrorKind::schema, where.str() + ": invalid JSON: " + e.what());
    }
    if (!j.is_object()) fail(ErrorKind::schema, where.str() + ": expected a JSON object");
    fn(j, where);
  }
}

namespace {

const Json& field(const Json& j, std::string_view key, const Where& w) {
  const auto it = j.find(key);
  if (it == j.end()) fail(ErrorKind::schema, w.str() + ": missing field \"" + std::string(key) + "\"");
  return *it;
}

[[noreturn]] void type_error(std::string_view key, const char* expected, const Where& w) {
  fail(ErrorKind::schema, w.str() + ": field \"" + std::string(key) + "\" must be " + expected);
}

}  // namespace

std::string get_string(const Json& j, std::string_view key, const Where& w) {
  const Json& v = field(j, key, w);
  if (!v.is_string()) type_error(key, "a string", w);
  return v.get<std::string>();
}

std::int64_t get_int(const Json& j, std::string_view key, const Where& w) {
  const Json& v = field(j, key, w);
  if (!v.is_number_integer()) type_error(key, "an integer", w);
  return v.get<std::int64_t>();
}

double get_number(const Json& j, std::string_view key, const Where& w) {
  const Json& v = field(j, key, w);
  if (!v.is_number()) type_error(key, "a number", w);
  const double d = v.get<double>();
  if (!std::isfinite(d)) type_error(key, "finite", w);
  return d;
}

std::vector<double> get_numbers(const Json& j, std::string_view key, const Where& w) {
  const Json& v = field(j, key, w);
  if (!v.is_array()) type_error(key, "an array of numbers", w);
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number()) type_error(key, "an array of numbers", w);
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<double> get_optional_numbers(const Json& j, std::string_view key, const Where& w) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  return get_numbers(j, key, w);
}

std::vector<std::string> get_strings(const Json& j, std::string_view key, const Where& w) {
  const Json& v = field(j, key, w);
  if (!v.is_array()) type_error(key, "an array of strings", w);
  std::vector<std::string> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_string()) type_error(key, "an array of strings", w);
    out.push_back(e.get<std::string>());
  }
  return out;
}

std::vector<std::int64_t> get_ints(const Json& j, std::string_view key, const Where& w) {
  const Json& v = field(j, key, w);
  if (!v.is_array()) type_error(key, "an array of integers", w);
  std::vector<std::int64_t> out;
  for (const auto& e : v) {
    if (!e.is_number_integer()) type_error(key, "an array of integers", w);
    out.push_back(e.get<std::int64_t>());
  }
  return out;
}

std::string format_number(double v, int significant_digits) {
  if (!std::isfinite(v)) fail(ErrorKind::invalid_input, "cannot serialize a non-finite number");
  char buf[40];
  if (significant_digits >= 17) {
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  }
  std::snprintf(buf, sizeof buf, "%.*g", significant_digits, v);
  return buf;
}

std::string format_array(std::span<const double> values, int significant_digits) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_number(values[i], significant_digits);
  }
  out += ']';
  return out;
}

std::string quote(std::string_view s) { return Json(std::string(s)).dump(); }

Writer::Writer(const std::filesystem::path& path) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.open(path, std::ios::binary | std::ios::trunc);
  if (!out_) fail(ErrorKind::config, "cannot write " + path.string());
}

void Writer::write(const Json& j) { write_raw(j.dump()); }

void Writer::write_raw(std::string_view line) {
  out_ << line << '\n';
}

void Writer::close() {
  out_.close();
  if (out_.fail()) fail(ErrorKind::config, "failed writing " + path_.string());
}

}  // namespace smia::jsonl
