#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tvk {

// Value of a TOML-style key: scalar or flat array of scalars.
struct ConfigValue {
  enum class Kind { Bool, Int, Float, String, Array };

  Kind kind = Kind::Int;
  bool b = false;
  std::int64_t i = 0;
  double d = 0.0;
  std::string s;
  std::vector<ConfigValue> items;

  static ConfigValue boolean(bool v);
  static ConfigValue integer(std::int64_t v);
  static ConfigValue number(double v);
  static ConfigValue string(std::string v);
  static ConfigValue array(std::vector<ConfigValue> v);
  static ConfigValue numbers(const std::vector<double>& v);
  static ConfigValue strings(const std::vector<std::string>& v);

  double as_double() const;  // Int or Float
  std::int64_t as_int() const;
  bool as_bool() const;
  const std::string& as_string() const;
  std::vector<double> as_doubles() const;
  std::vector<std::int64_t> as_ints() const;
  std::vector<std::string> as_strings() const;

  bool operator==(const ConfigValue& o) const;
};

using ConfigTable = std::map<std::string, ConfigValue>;

// Tables of key-value pairs. Keys before the first [table] header live in table "".
class ConfigDocument {
 public:
  static ConfigDocument parse(const std::string& text);
  static ConfigDocument load(const std::string& path);
  std::string serialize() const;
  void save(const std::string& path) const;

  bool has(const std::string& table, const std::string& key) const;
  const ConfigValue& get(const std::string& table, const std::string& key) const;
  void set(const std::string& table, const std::string& key, ConfigValue v);
  const std::map<std::string, ConfigTable>& tables() const { return tables_; }

  double get_or(const std::string& table, const std::string& key, double fallback) const;
  std::int64_t get_or(const std::string& table, const std::string& key, std::int64_t fallback) const;
  int get_or(const std::string& table, const std::string& key, int fallback) const;
  bool get_or(const std::string& table, const std::string& key, bool fallback) const;
  std::string get_or(const std::string& table, const std::string& key, const std::string& fallback) const;
  std::string get_or(const std::string& table, const std::string& key, const char* fallback) const;

  bool operator==(const ConfigDocument& o) const { return tables_ == o.tables_; }

 private:
  std::map<std::string, ConfigTable> tables_;
};

}  // namespace tvk
