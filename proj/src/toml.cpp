#include "qdspin/toml.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "qdspin/errors.hpp"

namespace qdspin::toml {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

// strip a trailing comment that is not inside a string literal
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') return false;
  }
  return true;
}

Value parse_value(const std::string& raw, int line_no) {
  const std::string v = trim(raw);
  if (v.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty value");

  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"')
      throw ConfigError("line " + std::to_string(line_no) + ": unterminated string");
    return v.substr(1, v.size() - 2);
  }
  if (v == "true") return true;
  if (v == "false") return false;

  const bool looks_float = v.find_first_of(".eE") != std::string::npos ||
                           v == "inf" || v == "-inf" || v == "nan";
  if (!looks_float) {
    long iv = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), iv);
    if (ec == std::errc() && p == v.data() + v.size()) return iv;
  }
  try {
    std::size_t used = 0;
    const double dv = std::stod(v, &used);
    if (used == v.size()) return dv;
  } catch (...) {
  }
  throw ConfigError("line " + std::to_string(line_no) + ": cannot parse value '" + v + "'");
}

}  // namespace

Document parse(const std::string& text) {
  Document doc;
  std::string current;  // "" = top level
  doc[""];

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": malformed table header");
      const std::string name = trim(line.substr(1, line.size() - 2));
      if (!valid_key(name))
        throw ConfigError("line " + std::to_string(line_no) + ": bad table name '" + name + "'");
      if (doc.count(name))
        throw ConfigError("line " + std::to_string(line_no) + ": duplicate table '" + name + "'");
      doc[name];
      current = name;
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (!valid_key(key))
      throw ConfigError("line " + std::to_string(line_no) + ": bad key '" + key + "'");
    if (doc[current].count(key))
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    doc[current][key] = parse_value(line.substr(eq + 1), line_no);
  }
  return doc;
}

Document parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

}  // namespace qdspin::toml
