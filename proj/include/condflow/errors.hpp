#pragma once

#include <stdexcept>
#include <string>

namespace condflow {

// Every error carries a stable upper-case code so the CLI can print a
// single machine-parsable line: "error <CODE>: <message>".
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define CONDFLOW_DEFINE_ERROR(Name, Code)                                      \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string& message) : Error(Code, message) {}    \
    };

CONDFLOW_DEFINE_ERROR(ShapeError, "SHAPE_ERROR")
CONDFLOW_DEFINE_ERROR(DomainError, "DOMAIN_ERROR")
CONDFLOW_DEFINE_ERROR(InvertibilityError, "INVERTIBILITY_ERROR")
CONDFLOW_DEFINE_ERROR(InputError, "INPUT_ERROR")
CONDFLOW_DEFINE_ERROR(ConfigError, "CONFIG_ERROR")
CONDFLOW_DEFINE_ERROR(TrainingError, "TRAINING_ERROR")
CONDFLOW_DEFINE_ERROR(FormatError, "FORMAT_ERROR")

#undef CONDFLOW_DEFINE_ERROR

}  // namespace condflow
