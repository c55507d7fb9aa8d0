#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <utility>

namespace critns {

/// Structured, non-fatal diagnostic (warnings from operators, rejected probes, solver events).
struct Diagnostic {
    std::string code;
    std::string message;
};

using DiagnosticSink = std::function<void(const Diagnostic&)>;

namespace detail {

inline std::mutex& diagnostic_mutex() {
    static std::mutex m;
    return m;
}

inline std::string json_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    return out;
}

inline DiagnosticSink& diagnostic_sink() {
    static DiagnosticSink sink = [](const Diagnostic& d) {
        std::clog << "{\"diagnostic\":\"" << json_escape(d.code) << "\",\"message\":\"" << json_escape(d.message)
                  << "\"}\n";
    };
    return sink;
}

} // namespace detail

/// Replace the process-wide sink; returns the previous one so callers can restore it.
inline DiagnosticSink set_diagnostic_sink(DiagnosticSink sink) {
    std::lock_guard lock(detail::diagnostic_mutex());
    return std::exchange(detail::diagnostic_sink(), std::move(sink));
}

inline void emit_diagnostic(std::string code, std::string message) {
    std::lock_guard lock(detail::diagnostic_mutex());
    if (detail::diagnostic_sink()) {
        detail::diagnostic_sink()(Diagnostic{std::move(code), std::move(message)});
    }
}

} // namespace critns
