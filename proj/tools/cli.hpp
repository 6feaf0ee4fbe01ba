#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "msym/geometry.hpp"
#include "msym/numerics.hpp"

namespace msym::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kSingular = 2,
  kDiverged = 3,
  kVerificationFailed = 4,
};

/// Parsed model file:
///
///   # comment
///   base_dim = 2
///   fiber_dim = 1
///   lagrangian = sqrt(1 + v1_1^2 + v1_2^2)
///   domain = [-1,1] x [-1,1]
///   boundary = scherk
///
/// `domain` defaults to [-1,1] on every axis. `boundary` holds one entry per
/// field separated by ';'. Unknown or repeated keys are rejected.
struct ModelFile {
  FieldModel model;
  Domain domain;
  std::optional<std::string> boundary_text;

  /// Boundary expressions; throws ModelError when no boundary was given.
  std::vector<Expression> boundary() const;
};

/// Throws ModelError (or the parser's errors) on malformed input.
ModelFile parse_model_file(std::string_view text);
ModelFile read_model_file(const std::string& path);

/// Full command line including the program name. Returns the exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace msym::cli
