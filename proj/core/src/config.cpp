#include "tvk/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "tvk/errors.hpp"

namespace tvk {

ConfigValue ConfigValue::boolean(bool v) {
  ConfigValue c;
  c.kind = Kind::Bool;
  c.b = v;
  return c;
}

ConfigValue ConfigValue::integer(std::int64_t v) {
  ConfigValue c;
  c.kind = Kind::Int;
  c.i = v;
  return c;
}

ConfigValue ConfigValue::number(double v) {
  ConfigValue c;
  c.kind = Kind::Float;
  c.d = v;
  return c;
}

ConfigValue ConfigValue::string(std::string v) {
  ConfigValue c;
  c.kind = Kind::String;
  c.s = std::move(v);
  return c;
}

ConfigValue ConfigValue::array(std::vector<ConfigValue> v) {
  ConfigValue c;
  c.kind = Kind::Array;
  c.items = std::move(v);
  return c;
}

ConfigValue ConfigValue::numbers(const std::vector<double>& v) {
  std::vector<ConfigValue> items;
  for (double x : v) items.push_back(number(x));
  return array(std::move(items));
}

ConfigValue ConfigValue::strings(const std::vector<std::string>& v) {
  std::vector<ConfigValue> items;
  for (const auto& x : v) items.push_back(string(x));
  return array(std::move(items));
}

double ConfigValue::as_double() const {
  if (kind == Kind::Float) return d;
  if (kind == Kind::Int) return static_cast<double>(i);
  throw ConfigError("expected a number");
}

std::int64_t ConfigValue::as_int() const {
  if (kind == Kind::Int) return i;
  if (kind == Kind::Float && std::floor(d) == d && std::abs(d) < 9e15) return static_cast<std::int64_t>(d);
  throw ConfigError("expected an integer");
}

bool ConfigValue::as_bool() const {
  if (kind != Kind::Bool) throw ConfigError("expected a boolean");
  return b;
}

const std::string& ConfigValue::as_string() const {
  if (kind != Kind::String) throw ConfigError("expected a string");
  return s;
}

std::vector<double> ConfigValue::as_doubles() const {
  if (kind != Kind::Array) return {as_double()};
  std::vector<double> out;
  for (const auto& v : items) out.push_back(v.as_double());
  return out;
}

std::vector<std::int64_t> ConfigValue::as_ints() const {
  if (kind != Kind::Array) return {as_int()};
  std::vector<std::int64_t> out;
  for (const auto& v : items) out.push_back(v.as_int());
  return out;
}

std::vector<std::string> ConfigValue::as_strings() const {
  if (kind != Kind::Array) return {as_string()};
  std::vector<std::string> out;
  for (const auto& v : items) out.push_back(v.as_string());
  return out;
}

bool ConfigValue::operator==(const ConfigValue& o) const {
  if (kind != o.kind) return false;
  switch (kind) {
    case Kind::Bool: return b == o.b;
    case Kind::Int: return i == o.i;
    case Kind::Float: return d == o.d || (std::isnan(d) && std::isnan(o.d));
    case Kind::String: return s == o.s;
    case Kind::Array: return items == o.items;
  }
  return false;
}

namespace {

class Parser {
 public:
  Parser(const std::string& text, int line) : t_(text), line_(line) {}

  ConfigValue value() {
    skip_ws();
    if (pos_ >= t_.size()) fail("missing value");
    const char c = t_[pos_];
    if (c == '"') return ConfigValue::string(quoted());
    if (c == '[') return array();
    return scalar();
  }

  void expect_end() {
    skip_ws();
    if (pos_ < t_.size()) fail("trailing characters after value");
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("config line " + std::to_string(line_) + ": " + what);
  }

  void skip_ws() {
    while (pos_ < t_.size()) {
      if (std::isspace(static_cast<unsigned char>(t_[pos_]))) {
        ++pos_;
      } else if (t_[pos_] == '#') {
        while (pos_ < t_.size() && t_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string quoted() {
    ++pos_;
    std::string out;
    while (pos_ < t_.size() && t_[pos_] != '"') {
      char c = t_[pos_++];
      if (c == '\\') {
        if (pos_ >= t_.size()) fail("unterminated escape");
        const char e = t_[pos_++];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
      }
      out.push_back(c);
    }
    if (pos_ >= t_.size()) fail("unterminated string");
    ++pos_;
    return out;
  }

  ConfigValue array() {
    ++pos_;
    std::vector<ConfigValue> items;
    skip_ws();
    if (pos_ < t_.size() && t_[pos_] == ']') {
      ++pos_;
      return ConfigValue::array({});
    }
    while (true) {
      ConfigValue v = value();
      if (v.kind == ConfigValue::Kind::Array) fail("nested arrays are not supported");
      items.push_back(std::move(v));
      skip_ws();
      if (pos_ >= t_.size()) fail("unterminated array");
      if (t_[pos_] == ',') {
        ++pos_;
        skip_ws();
        if (pos_ < t_.size() && t_[pos_] == ']') {
          ++pos_;
          break;
        }
        continue;
      }
      if (t_[pos_] == ']') {
        ++pos_;
        break;
      }
      fail("expected ',' or ']' in array");
    }
    return ConfigValue::array(std::move(items));
  }

  ConfigValue scalar() {
    const std::size_t start = pos_;
    while (pos_ < t_.size() && !std::isspace(static_cast<unsigned char>(t_[pos_])) && t_[pos_] != ',' &&
           t_[pos_] != ']' && t_[pos_] != '#')
      ++pos_;
    std::string tok = t_.substr(start, pos_ - start);
    if (tok == "true") return ConfigValue::boolean(true);
    if (tok == "false") return ConfigValue::boolean(false);
    std::string clean;
    for (char c : tok)
      if (c != '_') clean.push_back(c);
    if (clean.empty()) fail("empty value");
    const std::string body = (clean[0] == '+' || clean[0] == '-') ? clean.substr(1) : clean;
    if (body == "inf" || body == "nan") {
      const double v = body == "inf" ? std::numeric_limits<double>::infinity() : std::numeric_limits<double>::quiet_NaN();
      return ConfigValue::number(clean[0] == '-' ? -v : v);
    }
    const bool is_float = clean.find_first_of(".eE") != std::string::npos;
    const char* first = clean.data() + (clean[0] == '+' ? 1 : 0);
    const char* last = clean.data() + clean.size();
    if (is_float) {
      double v = 0.0;
      auto [p, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || p != last) fail("bad number '" + tok + "'");
      return ConfigValue::number(v);
    }
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || p != last) fail("bad value '" + tok + "'");
    return ConfigValue::integer(v);
  }

  const std::string& t_;
  int line_;
  std::size_t pos_ = 0;
};

std::string strip_comment(const std::string& line) {
  bool in_str = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
    if (line[i] == '#' && !in_str) return line.substr(0, i);
  }
  return line;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.') return false;
  return true;
}

int bracket_depth(const std::string& s) {
  int depth = 0;
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) in_str = !in_str;
    if (in_str) continue;
    if (s[i] == '[') ++depth;
    if (s[i] == ']') --depth;
  }
  return depth;
}

std::string format_value(const ConfigValue& v) {
  switch (v.kind) {
    case ConfigValue::Kind::Bool: return v.b ? "true" : "false";
    case ConfigValue::Kind::Int: return std::to_string(v.i);
    case ConfigValue::Kind::Float: {
      if (std::isnan(v.d)) return "nan";
      if (std::isinf(v.d)) return v.d > 0 ? "inf" : "-inf";
      char buf[64];
      auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v.d);
      std::string s(buf, p);
      if (s.find_first_of(".e") == std::string::npos) s += ".0";
      return s;
    }
    case ConfigValue::Kind::String: {
      std::string out = "\"";
      for (char c : v.s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        if (c == '\n') {
          out += "\\n";
          continue;
        }
        if (c == '\t') {
          out += "\\t";
          continue;
        }
        out.push_back(c);
      }
      return out + "\"";
    }
    case ConfigValue::Kind::Array: {
      std::string out = "[";
      for (std::size_t i = 0; i < v.items.size(); ++i) out += (i ? ", " : "") + format_value(v.items[i]);
      return out + "]";
    }
  }
  return "";
}

}  // namespace

ConfigDocument ConfigDocument::parse(const std::string& text) {
  ConfigDocument doc;
  std::istringstream in(text);
  std::string raw;
  std::string table;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw ConfigError("config line " + std::to_string(lineno) + ": bad table header");
      table = trim(line.substr(1, line.size() - 2));
      if (!valid_key(table)) throw ConfigError("config line " + std::to_string(lineno) + ": bad table name");
      if (doc.tables_.count(table) && !doc.tables_[table].empty())
        throw ConfigError("config line " + std::to_string(lineno) + ": duplicate table [" + table + "]");
      doc.tables_[table];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (!valid_key(key)) throw ConfigError("config line " + std::to_string(lineno) + ": bad key '" + key + "'");
    std::string rhs = line.substr(eq + 1);
    const int start_line = lineno;
    while (bracket_depth(rhs) > 0 && std::getline(in, raw)) {
      ++lineno;
      rhs += "\n" + strip_comment(raw);
    }
    Parser p(rhs, start_line);
    ConfigValue v = p.value();
    p.expect_end();
    ConfigTable& t = doc.tables_[table];
    if (t.count(key)) throw ConfigError("config line " + std::to_string(start_line) + ": duplicate key '" + key + "'");
    t.emplace(key, std::move(v));
  }
  return doc;
}

ConfigDocument ConfigDocument::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

std::string ConfigDocument::serialize() const {
  std::ostringstream out;
  auto emit = [&](const ConfigTable& t) {
    for (const auto& [k, v] : t) out << k << " = " << format_value(v) << '\n';
  };
  if (auto it = tables_.find(""); it != tables_.end()) emit(it->second);
  bool first = !tables_.count("") || tables_.at("").empty();
  for (const auto& [name, t] : tables_) {
    if (name.empty()) continue;
    if (!first) out << '\n';
    first = false;
    out << '[' << name << "]\n";
    emit(t);
  }
  return out.str();
}

void ConfigDocument::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write config " + path);
  f << serialize();
}

bool ConfigDocument::has(const std::string& table, const std::string& key) const {
  auto it = tables_.find(table);
  return it != tables_.end() && it->second.count(key) > 0;
}

const ConfigValue& ConfigDocument::get(const std::string& table, const std::string& key) const {
  auto it = tables_.find(table);
  if (it == tables_.end()) throw ConfigError("missing config table [" + table + "]");
  auto jt = it->second.find(key);
  if (jt == it->second.end()) throw ConfigError("missing config key " + table + "." + key);
  return jt->second;
}

void ConfigDocument::set(const std::string& table, const std::string& key, ConfigValue v) {
  tables_[table][key] = std::move(v);
}

double ConfigDocument::get_or(const std::string& table, const std::string& key, double fallback) const {
  return has(table, key) ? get(table, key).as_double() : fallback;
}

std::int64_t ConfigDocument::get_or(const std::string& table, const std::string& key, std::int64_t fallback) const {
  return has(table, key) ? get(table, key).as_int() : fallback;
}

int ConfigDocument::get_or(const std::string& table, const std::string& key, int fallback) const {
  return has(table, key) ? static_cast<int>(get(table, key).as_int()) : fallback;
}

bool ConfigDocument::get_or(const std::string& table, const std::string& key, bool fallback) const {
  return has(table, key) ? get(table, key).as_bool() : fallback;
}

std::string ConfigDocument::get_or(const std::string& table, const std::string& key,
                                   const std::string& fallback) const {
  return has(table, key) ? get(table, key).as_string() : fallback;
}

std::string ConfigDocument::get_or(const std::string& table, const std::string& key, const char* fallback) const {
  return get_or(table, key, std::string(fallback));
}

}  // namespace tvk
