#ifndef UDA_ERROR_HPP
#define UDA_ERROR_HPP

#include <stdexcept>
#include <string>

namespace uda {

enum class ErrorKind {
  Config,
  Usage,
  Parse,
  Schema,
  Range,
  Data,
  Shape,
  Graph,
  Numeric,
  Loss,
  Schedule,
  State,
  Inference,
  Eval,
  Format,
  Io,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// CLI exit code: 2 usage/config, 3 data, 4 numeric, 5 I/O.
int exit_code(ErrorKind kind);

}  // namespace uda

#endif  // UDA_ERROR_HPP
