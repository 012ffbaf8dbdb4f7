#pragma once

#include <stdexcept>
#include <string>

namespace fedsim {

// Error categories map to CLI exit codes (see tools/fedsim.cpp).
enum class ErrorCategory {
    Parse,      // malformed config text
    Config,     // semantically invalid configuration
    Data,       // bad dataset contents or file format
    Io,         // filesystem failures
    Structure,  // shape/dimension mismatches
    Numeric,    // non-finite values where finite ones are required
};

class Error : public std::runtime_error {
public:
    Error(ErrorCategory category, const std::string& message)
        : std::runtime_error(message), category_(category) {}

    ErrorCategory category() const { return category_; }

private:
    ErrorCategory category_;
};

inline const char* to_string(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::Parse: return "parse";
        case ErrorCategory::Config: return "config";
        case ErrorCategory::Data: return "data";
        case ErrorCategory::Io: return "io";
        case ErrorCategory::Structure: return "structure";
        case ErrorCategory::Numeric: return "numeric";
    }
    return "unknown";
}

}  // namespace fedsim
