#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace ragattack {

/// Root of every error the toolkit throws. Callers that only care about
/// "something in the pipeline failed" catch this.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
public:
    using Error::Error;
};

/// Malformed file content. `line` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ConflictError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

/// Network / service failure. `batch` carries whatever payload the failed
/// call was about (e.g. the texts of a failed embedding batch).
class TransportError : public Error {
public:
    explicit TransportError(const std::string& what, std::vector<std::string> batch = {},
                            int status = 0)
        : Error(what), batch_(std::move(batch)), status_(status) {}
    const std::vector<std::string>& batch() const noexcept { return batch_; }
    int status() const noexcept { return status_; }

private:
    std::vector<std::string> batch_;
    int status_;
};

class SchemaError : public Error {
public:
    using Error::Error;
};

class TemplateError : public Error {
public:
    TemplateError(const std::string& placeholder)
        : Error("unbound placeholder: " + placeholder), placeholder_(placeholder) {}
    const std::string& placeholder() const noexcept { return placeholder_; }

private:
    std::string placeholder_;
};

class EmptyOutputError : public Error {
public:
    using Error::Error;
};

class UnmatchedPromptError : public Error {
public:
    using Error::Error;
};

class ExtractionError : public Error {
public:
    using Error::Error;
};

/// A generate-validate loop ran out of attempts. `constraint` names the check
/// that the last candidate failed.
class ValidationExhaustedError : public Error {
public:
    ValidationExhaustedError(const std::string& what, std::string constraint)
        : Error(what + " (last failed constraint: " + constraint + ")"),
          constraint_(std::move(constraint)) {}
    const std::string& constraint() const noexcept { return constraint_; }

private:
    std::string constraint_;
};

class JudgingError : public Error {
public:
    using Error::Error;
};

class DefenseError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Orchestrator stage failure; `stage` is the pipeline stage that aborted.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error("stage '" + stage + "' failed: " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace ragattack
