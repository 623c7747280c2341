#pragma once

#include <stdexcept>
#include <string>

namespace idlink {

// Bad user-facing configuration: unknown flags, out-of-range knobs,
// missing input files. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed file content. Carries path and 1-based line where known.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& path, std::size_t line, const std::string& msg)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + msg),
        path_(path), line_(line) {}
  explicit ParseError(const std::string& msg) : std::runtime_error(msg), line_(0) {}

  const std::string& path() const { return path_; }
  std::size_t line() const { return line_; }

private:
  std::string path_;
  std::size_t line_ = 0;
};

// A caller violated an operation's precondition (mismatched vector
// lengths, unresolved ids, ...). Distinct from ConfigError so the CLI
// reports it as a pipeline failure (exit 1), not a usage error.
class ContractError : public std::logic_error {
public:
  explicit ContractError(const std::string& msg) : std::logic_error(msg) {}
};

}  // namespace idlink
