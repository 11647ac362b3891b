#pragma once

#include <map>
#include <string>
#include <variant>

namespace qdspin::toml {

// Minimal strict TOML subset: comments, [tables], and key = value pairs with
// string / bool / integer / float values. Unknown syntax is an error; key and
// table validation against the schema happens in config.
using Value = std::variant<bool, long, double, std::string>;
using Table = std::map<std::string, Value>;
using Document = std::map<std::string, Table>;  // "" holds top-level keys

Document parse(const std::string& text);
Document parse_file(const std::string& path);

}  // namespace qdspin::toml
