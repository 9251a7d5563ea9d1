#include "fracland_cli/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "fracland/errors.hpp"

namespace fracland::cli {

namespace {

std::string escape_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

nlohmann::json scalar(const YAML::Node& n) {
  const std::string& s = n.Scalar();
  if (n.Tag() == "!") return s;
  if (s == "true" || s == "True" || s == "TRUE") return true;
  if (s == "false" || s == "False" || s == "FALSE") return false;
  if (s == "null" || s == "~" || s.empty()) return nullptr;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  std::int64_t i = 0;
  if (auto [p, ec] = std::from_chars(first, last, i); ec == std::errc() && p == last) {
    if (i >= 0) return static_cast<std::uint64_t>(i);
    return i;
  }
  std::uint64_t u = 0;
  if (auto [p, ec] = std::from_chars(first, last, u); ec == std::errc() && p == last) return u;
  double d = 0.0;
  if (auto [p, ec] = std::from_chars(first, last, d); ec == std::errc() && p == last) return d;
  return s;
}

nlohmann::json convert(const YAML::Node& n, const std::string& ptr, ConfigDocument& doc) {
  doc.lines[ptr] = n.Mark().line + 1;
  switch (n.Type()) {
    case YAML::NodeType::Scalar:
      return scalar(n);
    case YAML::NodeType::Sequence: {
      auto arr = nlohmann::json::array();
      for (std::size_t i = 0; i < n.size(); ++i) arr.push_back(convert(n[i], ptr + "/" + std::to_string(i), doc));
      return arr;
    }
    case YAML::NodeType::Map: {
      auto obj = nlohmann::json::object();
      for (const auto& kv : n) {
        const auto key = kv.first.as<std::string>();
        if (obj.contains(key)) {
          throw ConfigError(doc.source + ":" + std::to_string(kv.first.Mark().line + 1) + ": duplicate key '" + key +
                            "'");
        }
        obj[key] = convert(kv.second, ptr + "/" + escape_token(key), doc);
      }
      return obj;
    }
    default:
      return nullptr;
  }
}

std::string join_path(const std::string& pointer, const std::string& key) {
  std::string p;
  for (char c : pointer) p += c == '/' ? '.' : c;
  if (!p.empty() && p.front() == '.') p.erase(0, 1);
  return p.empty() ? key : p + "." + key;
}

}  // namespace

ConfigDocument parse_yaml(const std::string& text, const std::string& source) {
  ConfigDocument doc;
  doc.source = source;
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (root.IsNull()) {
    doc.root = nlohmann::json::object();
    return doc;
  }
  if (!root.IsMap()) throw ConfigError(source + ": top level must be a table of key/value pairs");
  doc.root = convert(root, "", doc);
  return doc;
}

ConfigDocument parse_json(const std::string& text, const std::string& source) {
  ConfigDocument doc;
  doc.source = source;
  try {
    doc.root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) line += text[i] == '\n';
    throw ConfigError(source + ":" + std::to_string(line) + ": " + e.what());
  }
  if (!doc.root.is_object()) throw ConfigError(source + ": top level must be an object");
  return doc;
}

ConfigDocument load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) return parse_json(ss.str(), path);
  return parse_yaml(ss.str(), path);
}

Fields::Fields(const ConfigDocument& doc, std::string pointer, nlohmann::json* resolved)
    : doc_(&doc), pointer_(std::move(pointer)), node_(nullptr), resolved_(resolved) {
  const auto p = nlohmann::json::json_pointer(pointer_);
  if (doc.root.contains(p)) node_ = &doc.root.at(p);
  if (node_ && !node_->is_object() && !node_->is_null()) {
    throw ConfigError(doc.source + ": " + join_path(pointer_, "") + " must be a table");
  }
  if (resolved_ && !resolved_->is_object()) *resolved_ = nlohmann::json::object();
}

std::string Fields::path(const std::string& key) const {
  auto p = join_path(pointer_, key);
  if (!p.empty() && p.back() == '.') p.pop_back();
  return p;
}

void Fields::fail(const std::string& key, const std::string& message) const {
  std::string where = doc_->source;
  auto it = doc_->lines.find(pointer_ + "/" + escape_token(key));
  if (it == doc_->lines.end()) it = doc_->lines.find(pointer_);
  if (it != doc_->lines.end()) where += ":" + std::to_string(it->second);
  throw ConfigError(where + ": field '" + path(key) + "': " + message);
}

bool Fields::has(const std::string& key) const { return find(key) != nullptr; }

const nlohmann::json* Fields::find(const std::string& key) const {
  if (!node_ || !node_->is_object()) return nullptr;
  auto it = node_->find(key);
  if (it == node_->end() || it->is_null()) return nullptr;
  return &*it;
}

void Fields::mark(const std::string& key, const nlohmann::json& value) {
  read_.insert(key);
  if (resolved_) (*resolved_)[key] = value;
}

double Fields::number(const std::string& key, std::optional<double> fallback) {
  const auto* v = find(key);
  double x = 0.0;
  if (!v) {
    if (!fallback) fail(key, "required number is missing");
    x = *fallback;
  } else {
    if (!v->is_number()) fail(key, "expected a number");
    x = v->get<double>();
    if (!std::isfinite(x)) fail(key, "must be finite");
  }
  mark(key, x);
  return x;
}

double Fields::positive(const std::string& key, std::optional<double> fallback) {
  const double x = number(key, fallback);
  if (!(x > 0.0)) fail(key, "must be positive");
  return x;
}

double Fields::non_negative(const std::string& key, std::optional<double> fallback) {
  const double x = number(key, fallback);
  if (x < 0.0) fail(key, "must be non-negative");
  return x;
}

double Fields::alpha(const std::string& key, std::optional<double> fallback) {
  const double x = number(key, fallback);
  if (!(x > 0.0 && x <= 1.0)) fail(key, "order must lie in (0, 1]");
  return x;
}

std::int64_t Fields::integer(const std::string& key, std::optional<std::int64_t> fallback, std::int64_t lo) {
  const auto* v = find(key);
  std::int64_t x = 0;
  if (!v) {
    if (!fallback) fail(key, "required integer is missing");
    x = *fallback;
  } else {
    if (!v->is_number_integer()) fail(key, "expected an integer");
    if (v->is_number_unsigned() && v->get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
      fail(key, "integer out of range");
    }
    x = v->get<std::int64_t>();
  }
  if (x < lo) fail(key, "must be at least " + std::to_string(lo));
  mark(key, x);
  return x;
}

std::uint64_t Fields::seed(const std::string& key, std::optional<std::uint64_t> fallback) {
  const auto* v = find(key);
  std::uint64_t x = 0;
  if (!v) {
    if (!fallback) fail(key, "required seed is missing");
    x = *fallback;
  } else {
    if (!v->is_number_unsigned()) fail(key, "expected a non-negative integer seed");
    x = v->get<std::uint64_t>();
  }
  mark(key, x);
  return x;
}

bool Fields::flag(const std::string& key, std::optional<bool> fallback) {
  const auto* v = find(key);
  bool x = false;
  if (!v) {
    if (!fallback) fail(key, "required boolean is missing");
    x = *fallback;
  } else {
    if (!v->is_boolean()) fail(key, "expected true or false");
    x = v->get<bool>();
  }
  mark(key, x);
  return x;
}

std::string Fields::text(const std::string& key, std::optional<std::string> fallback,
                         const std::vector<std::string>& allowed) {
  const auto* v = find(key);
  std::string x;
  if (!v) {
    if (!fallback) fail(key, "required string is missing");
    x = *fallback;
  } else {
    if (!v->is_string()) fail(key, "expected a string");
    x = v->get<std::string>();
  }
  if (!allowed.empty() && std::find(allowed.begin(), allowed.end(), x) == allowed.end()) {
    std::string list;
    for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
    fail(key, "'" + x + "' is not one of " + list);
  }
  mark(key, x);
  return x;
}

std::vector<double> Fields::numbers(const std::string& key, std::optional<std::vector<double>> fallback) {
  const auto* v = find(key);
  std::vector<double> x;
  if (!v) {
    if (!fallback) fail(key, "required list of numbers is missing");
    x = *fallback;
  } else {
    if (!v->is_array()) fail(key, "expected a list of numbers");
    for (const auto& e : *v) {
      if (!e.is_number() || !std::isfinite(e.get<double>())) fail(key, "every entry must be a finite number");
      x.push_back(e.get<double>());
    }
  }
  if (x.empty()) fail(key, "list must not be empty");
  mark(key, x);
  return x;
}

std::vector<double> Fields::alphas(const std::string& key, const std::string& memory_key,
                                   std::vector<double> fallback) {
  if (has(key) && has(memory_key)) fail(memory_key, "give either '" + key + "' or '" + memory_key + "', not both");
  std::vector<double> a;
  if (has(memory_key)) {
    for (double m : numbers(memory_key)) {
      if (!(m >= 0.0 && m < 1.0)) fail(memory_key, "memory strength must lie in [0, 1)");
      a.push_back(1.0 - m);
    }
    if (resolved_) (*resolved_)[key] = a;
    read_.insert(key);
    return a;
  }
  a = numbers(key, fallback);
  for (double x : a) {
    if (!(x > 0.0 && x <= 1.0)) fail(key, "orders must lie in (0, 1]");
  }
  return a;
}

std::vector<std::int64_t> Fields::integers(const std::string& key,
                                           std::optional<std::vector<std::int64_t>> fallback, std::int64_t lo) {
  const auto* v = find(key);
  std::vector<std::int64_t> x;
  if (!v) {
    if (!fallback) fail(key, "required list of integers is missing");
    x = *fallback;
  } else {
    if (!v->is_array()) fail(key, "expected a list of integers");
    for (const auto& e : *v) {
      if (!e.is_number_integer()) fail(key, "every entry must be an integer");
      x.push_back(e.get<std::int64_t>());
    }
  }
  if (x.empty()) fail(key, "list must not be empty");
  for (auto i : x) {
    if (i < lo) fail(key, "entries must be at least " + std::to_string(lo));
  }
  mark(key, x);
  return x;
}

Fields Fields::table(const std::string& key) {
  const auto* v = find(key);
  if (v && !v->is_object()) fail(key, "expected a table");
  read_.insert(key);
  nlohmann::json* child = nullptr;
  if (resolved_) {
    (*resolved_)[key] = nlohmann::json::object();
    child = &(*resolved_)[key];
  }
  return Fields(*doc_, pointer_ + "/" + escape_token(key), child);
}

std::vector<Fields> Fields::tables(const std::string& key) {
  const auto* v = find(key);
  if (v && !v->is_array()) fail(key, "expected a list of tables");
  read_.insert(key);
  const std::size_t n = v ? v->size() : 0;
  if (resolved_) (*resolved_)[key] = nlohmann::json::array();
  for (std::size_t i = 0; i < n; ++i) {
    if (!(*v)[i].is_object()) fail(key, "entry " + std::to_string(i) + " is not a table");
    if (resolved_) (*resolved_)[key].push_back(nlohmann::json::object());
  }
  std::vector<Fields> out;
  for (std::size_t i = 0; i < n; ++i) {
    nlohmann::json* child = resolved_ ? &(*resolved_)[key][i] : nullptr;
    out.emplace_back(*doc_, pointer_ + "/" + escape_token(key) + "/" + std::to_string(i), child);
  }
  return out;
}

void Fields::finish() const {
  if (!node_ || !node_->is_object()) return;
  for (const auto& [k, v] : node_->items()) {
    if (!read_.count(k)) fail(k, "unknown key");
  }
}

}  // namespace fracland::cli
