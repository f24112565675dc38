#pragma once

#include <stdexcept>
#include <string>

namespace scopeweaver {

/// Base for every error raised by the toolkit. `error_class()` is the stable
/// label surfaced in JSON diagnostics and exit-code mapping.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
  virtual const char *error_class() const noexcept { return "Error"; }
};

#define SCOPEWEAVER_ERROR(Name)                                                \
  class Name : public Error {                                                  \
  public:                                                                      \
    using Error::Error;                                                        \
    const char *error_class() const noexcept override { return #Name; }        \
  }

SCOPEWEAVER_ERROR(EncodingError);
SCOPEWEAVER_ERROR(ScopeError);
SCOPEWEAVER_ERROR(IoError);
SCOPEWEAVER_ERROR(StoreError);
SCOPEWEAVER_ERROR(AmbiguousTarget);
SCOPEWEAVER_ERROR(TargetNotFound);
SCOPEWEAVER_ERROR(NameCollision);
SCOPEWEAVER_ERROR(CycleError);
SCOPEWEAVER_ERROR(ProtocolError);
SCOPEWEAVER_ERROR(JoinError);
SCOPEWEAVER_ERROR(ConfigError);
SCOPEWEAVER_ERROR(UnresolvedNames);

#undef SCOPEWEAVER_ERROR

/// Syntax errors carry a 1-based line and 0-based byte column.
class SyntaxError : public Error {
public:
  SyntaxError(int line, int column, const std::string &message)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " +
              message),
        line_(line), column_(column), detail_(message) {}
  const char *error_class() const noexcept override { return "SyntaxError"; }
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::string &detail() const noexcept { return detail_; }

private:
  int line_;
  int column_;
  std::string detail_;
};

class TokenizeError : public SyntaxError {
public:
  using SyntaxError::SyntaxError;
  const char *error_class() const noexcept override { return "TokenizeError"; }
};

} // namespace scopeweaver
