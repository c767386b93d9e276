#include "ecocal/keyvalue.hpp"

#include "ecocal/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace ecocal {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

KeyValueFile KeyValueFile::parse(std::string_view text, std::string source) {
    KeyValueFile kv;
    kv.source_ = std::move(source);
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;

        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) {
            if (end == text.size()) break;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(kv.source_, line_no, "expected key=value");
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) throw ParseError(kv.source_, line_no, "empty key");
        if (value.empty()) throw ParseError(kv.source_, line_no, "empty value for '" + key + "'");
        if (!kv.entries_.emplace(key, Entry{value, line_no}).second) {
            throw ParseError(kv.source_, line_no, "duplicate key '" + key + "'");
        }
        if (end == text.size()) break;
    }
    return kv;
}

KeyValueFile KeyValueFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

std::optional<std::string> KeyValueFile::get_string(const std::string& key) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    consumed_.insert(key);
    return it->second.value;
}

std::optional<double> KeyValueFile::get_double(const std::string& key) {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    consumed_.insert(key);
    const std::string& v = it->second.value;
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out)) {
        throw ParseError(source_, it->second.line, "'" + key + "': cannot parse '" + v + "' as a number");
    }
    return out;
}

std::optional<std::int64_t> KeyValueFile::get_integer(const std::string& key) {
    const auto d = get_double(key);
    if (!d) return std::nullopt;
    const double x = *d;
    if (x != std::floor(x) || std::fabs(x) > 9.0e15) {
        throw ParseError(source_, line_of(key), "'" + key + "': expected an integer, got '" + entries_.at(key).value + "'");
    }
    return static_cast<std::int64_t>(x);
}

std::optional<bool> KeyValueFile::get_bool(const std::string& key) {
    const auto s = get_string(key);
    if (!s) return std::nullopt;
    if (*s == "true" || *s == "1" || *s == "yes") return true;
    if (*s == "false" || *s == "0" || *s == "no") return false;
    throw ParseError(source_, line_of(key), "'" + key + "': expected a boolean, got '" + *s + "'");
}

double KeyValueFile::require_double(const std::string& key) {
    const auto v = get_double(key);
    if (!v) throw ParseError(source_, 0, "missing required key '" + key + "'");
    return *v;
}

void KeyValueFile::reject_unknown() const {
    const Entry* first = nullptr;
    std::string first_key;
    for (const auto& [key, entry] : entries_) {
        if (consumed_.count(key)) continue;
        if (!first || entry.line < first->line) {
            first = &entry;
            first_key = key;
        }
    }
    if (first) throw ParseError(source_, first->line, "unknown key '" + first_key + "'");
}

std::size_t KeyValueFile::line_of(const std::string& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? 0 : it->second.line;
}

}  // namespace ecocal
