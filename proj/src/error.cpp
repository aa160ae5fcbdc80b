#include "aspo/error.hpp"

namespace aspo {

const char* toString(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfiguration: return "invalid-configuration";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::UnknownParameter: return "unknown-parameter";
    case ErrorKind::TypeMismatch: return "type-mismatch";
    case ErrorKind::Domain: return "domain";
    case ErrorKind::NumericalFailure: return "numerical-failure";
    case ErrorKind::NoFeasibleCandidate: return "no-feasible-candidate";
    case ErrorKind::InfeasibleSpace: return "infeasible-space";
    case ErrorKind::EmptyDatabase: return "empty-database";
    case ErrorKind::InsufficientRecords: return "insufficient-records";
    case ErrorKind::UnknownBenchmark: return "unknown-benchmark";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::Tool: return "tool";
    case ErrorKind::UndefinedMetric: return "undefined-metric";
    case ErrorKind::HashMismatch: return "hash-mismatch";
    case ErrorKind::Io: return "io";
    case ErrorKind::InvalidArgument: return "invalid-argument";
  }
  return "unknown";
}

}  // namespace aspo
