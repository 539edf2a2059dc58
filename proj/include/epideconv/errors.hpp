#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace epideconv {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class NoData : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class FitDiverged : public Error {
public:
    FitDiverged(const std::string& what, std::size_t iteration, std::ptrdiff_t index = -1)
        : Error(what), iteration_(iteration), index_(index) {}
    std::size_t iteration() const noexcept { return iteration_; }
    /// First offending day index (0-based), or -1 when not tied to one entry.
    std::ptrdiff_t index() const noexcept { return index_; }

private:
    std::size_t iteration_;
    std::ptrdiff_t index_;
};

class ScenarioExplodes : public Error {
public:
    using Error::Error;
};

class NoSelection : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace epideconv
