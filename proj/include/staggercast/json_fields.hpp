#pragma once

#include "staggercast/errors.hpp"
#include "staggercast/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>

namespace staggercast {

using Json = nlohmann::json;

/// Strict reader over one JSON object. Every key must be consumed through
/// `required`/`optional` before `finish()`, otherwise the document is rejected.
/// Keys starting with '_' are metadata and always allowed.
class JsonObject {
public:
    JsonObject(const Json& value, std::string path);

    const Json& required(std::string_view key);
    const Json* optional(std::string_view key);
    std::string child(std::string_view key) const { return path_ + "/" + std::string(key); }
    const std::string& path() const { return path_; }

    /// Throws ConfigError naming the first unknown key.
    void finish() const;

private:
    const Json& value_;
    std::string path_;
    std::set<std::string, std::less<>> seen_;
};

double as_number(const Json& value, const std::string& path);
double as_probability(const Json& value, const std::string& path);
std::uint64_t as_uint(const Json& value, const std::string& path);
std::int64_t as_int(const Json& value, const std::string& path);
bool as_bool(const Json& value, const std::string& path);
std::string as_string(const Json& value, const std::string& path);
DayWindow as_window(const Json& value, const std::string& path);

template <class E>
E as_enum(const Json& value, const std::string& path) {
    const auto text = as_string(value, path);
    if (auto parsed = parse_enum<E>(text)) return *parsed;
    throw ConfigError(path, "unknown value '" + text + "'");
}

template <class E>
EnumSet<E> as_enum_set(const Json& value, const std::string& path) {
    if (!value.is_array()) throw ConfigError(path, "expected an array");
    EnumSet<E> out;
    for (std::size_t i = 0; i < value.size(); ++i) {
        out.insert(as_enum<E>(value[i], path + "/" + std::to_string(i)));
    }
    return out;
}

/// Parse a JSON file; syntax errors become ConfigError with the file path.
Json read_json_file(const std::filesystem::path& file);

}  // namespace staggercast
