#pragma once

#include <string_view>

namespace aniso::log {

enum class Level { Debug, Info, Warn, Error, Off };

/// Structured stderr lines: `level=<lvl> module=<name> msg="..."`.
void set_level(Level level);
Level level();

void write(Level level, std::string_view module, std::string_view message);

inline void debug(std::string_view module, std::string_view msg) { write(Level::Debug, module, msg); }
inline void info(std::string_view module, std::string_view msg) { write(Level::Info, module, msg); }
inline void warn(std::string_view module, std::string_view msg) { write(Level::Warn, module, msg); }
inline void error(std::string_view module, std::string_view msg) { write(Level::Error, module, msg); }

} // namespace aniso::log
