#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace smia::jsonl {

using Json = nlohmann::json;

// Context used in schema error messages: "<file>:<line>".
struct Where {
  std::string file;
  std::size_t line = 0;
  std::string str() const;
};

// Throws Error(upstream_missing) naming the file and the stage that produces it.
void require_file(const std::filesystem::path& path, std::string_view producing_stage);

// Calls fn(object, where) for every non-empty line. Malformed JSON or a non-object
// line raises Error(schema) with the line number.
void for_each_line(const std::filesystem::path& path, const std::function<void(const Json&, const Where&)>& fn);

std::string get_string(const Json& j, std::string_view key, const Where& w);
std::int64_t get_int(const Json& j, std::string_view key, const Where& w);
double get_number(const Json& j, std::string_view key, const Where& w);
std::vector<double> get_numbers(const Json& j, std::string_view key, const Where& w);
// Returns empty when the key is absent or null.
std::vector<double> get_optional_numbers(const Json& j, std::string_view key, const Where& w);
std::vector<std::string> get_strings(const Json& j, std::string_view key, const Where& w);
std::vector<std::int64_t> get_ints(const Json& j, std::string_view key, const Where& w);

// Shortest "%.{digits}g" rendering; non-finite values are rejected.
std::string format_number(double v, int significant_digits = 17);
// "[a,b,c]" with format_number per element.
std::string format_array(std::span<const double> values, int significant_digits = 17);
std::string quote(std::string_view s);

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path);
  void write(const Json& j);
  void write_raw(std::string_view line);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace smia::jsonl
