#include "ecocal/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace ecocal::log {

namespace {
std::atomic<Level> g_level{Level::warn};
std::mutex g_mutex;

constexpr std::string_view tag(Level level) {
    switch (level) {
        case Level::debug: return "debug";
        case Level::info: return "info";
        case Level::warn: return "warn";
        case Level::error: return "error";
        case Level::off: break;
    }
    return "";
}
}  // namespace

void set_level(Level level) noexcept { g_level.store(level); }

Level level() noexcept { return g_level.load(); }

void write(Level lvl, std::string_view message) {
    if (lvl < g_level.load() || lvl == Level::off) return;
    std::lock_guard lock(g_mutex);
    std::clog << "[ecocal " << tag(lvl) << "] " << message << '\n';
}

}  // namespace ecocal::log
