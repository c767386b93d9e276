#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

namespace ecocal {

/// Parsed `key=value` text: one key per line, `#` starts a comment, blank
/// lines ignored. Typed accessors remember which keys were read so that
/// leftovers can be rejected as unknown.
class KeyValueFile {
public:
    static KeyValueFile parse(std::string_view text, std::string source = "<string>");
    static KeyValueFile load(const std::filesystem::path& path);

    [[nodiscard]] bool contains(const std::string& key) const { return entries_.count(key) != 0; }

    [[nodiscard]] std::optional<std::string> get_string(const std::string& key);
    [[nodiscard]] std::optional<double> get_double(const std::string& key);
    // Accepts scientific notation ("1e5") as long as the value is integral.
    [[nodiscard]] std::optional<std::int64_t> get_integer(const std::string& key);
    [[nodiscard]] std::optional<bool> get_bool(const std::string& key);

    double require_double(const std::string& key);

    /// Throws ParseError at the first key that no accessor has read.
    void reject_unknown() const;

    [[nodiscard]] std::size_t line_of(const std::string& key) const;
    [[nodiscard]] const std::string& source() const noexcept { return source_; }

private:
    struct Entry {
        std::string value;
        std::size_t line;
    };
    std::string source_;
    std::map<std::string, Entry> entries_;
    std::set<std::string> consumed_;
};

}  // namespace ecocal
