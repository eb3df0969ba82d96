#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace apufsim {

/// Operating condition outside the instance's declared envelope.
class EnvelopeError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Challenge or dataset length disagrees with the stage count.
class DimensionError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Structural problem with an input document (missing column, missing field, wrong version).
class SchemaError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed content at a known location of a text input.
class ParseError : public std::runtime_error {
  public:
    ParseError(std::size_t line, const std::string &what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line)
    {
    }

    std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

/// A least-squares fit or numerical procedure had too little data.
class FitError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace apufsim
