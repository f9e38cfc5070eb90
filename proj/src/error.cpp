#include "uda/error.hpp"

namespace uda {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Schema: return "schema";
    case ErrorKind::Range: return "range";
    case ErrorKind::Data: return "data";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Graph: return "graph";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::Loss: return "loss";
    case ErrorKind::Schedule: return "schedule";
    case ErrorKind::State: return "state";
    case ErrorKind::Inference: return "inference";
    case ErrorKind::Eval: return "eval";
    case ErrorKind::Format: return "format";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Usage:
    case ErrorKind::Schedule:
    case ErrorKind::Graph:
    case ErrorKind::Shape:
      return 2;
    case ErrorKind::Parse:
    case ErrorKind::Schema:
    case ErrorKind::Range:
    case ErrorKind::Data:
    case ErrorKind::Inference:
    case ErrorKind::Eval:
      return 3;
    case ErrorKind::Numeric:
    case ErrorKind::Loss:
    case ErrorKind::State:
      return 4;
    case ErrorKind::Format:
    case ErrorKind::Io:
      return 5;
  }
  return 1;
}

}  // namespace uda
