#pragma once

#include <adawave/error.hpp>

#include <string>

namespace adawave {

enum class Task { forecast, impute, superres };

inline std::string to_string(Task t) {
    switch (t) {
    case Task::forecast: return "forecast";
    case Task::impute: return "impute";
    case Task::superres: return "superres";
    }
    return "?";
}

inline Task parse_task(const std::string& s) {
    if (s == "forecast") return Task::forecast;
    if (s == "impute" || s == "imputation") return Task::impute;
    if (s == "superres" || s == "super-resolution") return Task::superres;
    throw DataError("unknown task '" + s + "' (forecast|impute|superres)");
}

} // namespace adawave
