#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

namespace fracland::cli {

/// Parsed configuration tree with 1-based source lines keyed by JSON pointer
/// (YAML input only).
struct ConfigDocument {
  nlohmann::json root = nlohmann::json::object();
  std::map<std::string, int> lines;
  std::string source = "<config>";
};

/// Files ending in .json are read as JSON, everything else as YAML.
/// Throws ConfigError with the location of a syntax error.
[[nodiscard]] ConfigDocument load_config(const std::string& path);
[[nodiscard]] ConfigDocument parse_yaml(const std::string& text, const std::string& source = "<yaml>");
[[nodiscard]] ConfigDocument parse_json(const std::string& text, const std::string& source = "<json>");

/// Reader for one table of a config. Every read is recorded in `resolved`
/// (defaults included) and finish() rejects keys that were never read.
class Fields {
 public:
  Fields(const ConfigDocument& doc, std::string pointer, nlohmann::json* resolved);

  [[nodiscard]] bool has(const std::string& key) const;
  [[nodiscard]] double number(const std::string& key, std::optional<double> fallback = std::nullopt);
  [[nodiscard]] double positive(const std::string& key, std::optional<double> fallback = std::nullopt);
  [[nodiscard]] double non_negative(const std::string& key, std::optional<double> fallback = std::nullopt);
  [[nodiscard]] double alpha(const std::string& key, std::optional<double> fallback = std::nullopt);
  [[nodiscard]] std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt,
                                     std::int64_t lo = 0);
  [[nodiscard]] std::uint64_t seed(const std::string& key, std::optional<std::uint64_t> fallback = std::nullopt);
  [[nodiscard]] bool flag(const std::string& key, std::optional<bool> fallback = std::nullopt);
  [[nodiscard]] std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt,
                                 const std::vector<std::string>& allowed = {});
  [[nodiscard]] std::vector<double> numbers(const std::string& key,
                                            std::optional<std::vector<double>> fallback = std::nullopt);
  /// Orders in (0, 1]; also accepted as `memory` strengths 1 - alpha under memory_key.
  [[nodiscard]] std::vector<double> alphas(const std::string& key, const std::string& memory_key,
                                           std::vector<double> fallback);
  [[nodiscard]] std::vector<std::int64_t> integers(const std::string& key,
                                                   std::optional<std::vector<std::int64_t>> fallback, std::int64_t lo);
  /// Nested table; a missing key gives an empty table so that defaults apply.
  [[nodiscard]] Fields table(const std::string& key);
  /// List of tables; a missing key gives an empty list.
  [[nodiscard]] std::vector<Fields> tables(const std::string& key);

  /// Throws ConfigError naming the first unknown key.
  void finish() const;
  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

  [[nodiscard]] std::string path(const std::string& key) const;

 private:
  [[nodiscard]] const nlohmann::json* find(const std::string& key) const;
  void mark(const std::string& key, const nlohmann::json& value);

  const ConfigDocument* doc_;
  std::string pointer_;
  const nlohmann::json* node_;
  nlohmann::json* resolved_;
  std::set<std::string> read_;
};

}  // namespace fracland::cli
