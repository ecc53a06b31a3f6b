#include "aniso/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <memory>

namespace aniso::log {
namespace {

std::shared_ptr<spdlog::logger> sink() {
    static std::shared_ptr<spdlog::logger> logger = [] {
        auto l = spdlog::stderr_logger_mt("aniso");
        l->set_pattern("%v");
        l->set_level(spdlog::level::info);
        return l;
    }();
    return logger;
}

spdlog::level::level_enum to_spd(Level level) {
    switch (level) {
    case Level::Debug: return spdlog::level::debug;
    case Level::Info: return spdlog::level::info;
    case Level::Warn: return spdlog::level::warn;
    case Level::Error: return spdlog::level::err;
    case Level::Off: return spdlog::level::off;
    }
    return spdlog::level::info;
}

const char* name(Level level) {
    switch (level) {
    case Level::Debug: return "debug";
    case Level::Info: return "info";
    case Level::Warn: return "warn";
    case Level::Error: return "error";
    case Level::Off: return "off";
    }
    return "info";
}

Level g_level = Level::Info;

} // namespace

void set_level(Level level) {
    g_level = level;
    sink()->set_level(to_spd(level));
}

Level level() { return g_level; }

void write(Level level, std::string_view module, std::string_view message) {
    if (level < g_level) return;
    sink()->log(to_spd(level), "level={} module={} msg=\"{}\"", name(level), module, message);
}

} // namespace aniso::log
