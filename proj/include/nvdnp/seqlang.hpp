#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "nvdnp/optics.hpp"
#include "nvdnp/protocol.hpp"

namespace nvdnp::seq {

enum class ErrorKind { kSyntax, kSemantic };

class ParseError : public std::runtime_error {
 public:
  ParseError(ErrorKind kind, int line, int column, const std::string& message);

  ErrorKind kind() const { return kind_; }
  int line() const { return line_; }
  int column() const { return column_; }
  // Message without the location prefix.
  const std::string& detail() const { return detail_; }

 private:
  ErrorKind kind_;
  int line_;
  int column_;
  std::string detail_;
};

struct ParseOptions {
  // Kappa, bias and efficiency for every `laser`; the statement supplies the
  // duration and, optionally, the nuclear model.
  OpticalParams laser_calibration;
};

// Grammar:
//   program := stmt+
//   stmt    := pulse | laser | repeat | marker
//   pulse   := ("mw" | "rf") level "->" level angle ["rabi" FLOAT "MHz"] ["offset" FLOAT "MHz"]
//   level   := "(" INT "," INT ")"
//   angle   := FLOAT ("pi" | "rad")
//   laser   := "laser" FLOAT ("ns" | "us") ["walk" | "flip" | "hold"]
//   repeat  := "repeat" INT "{" stmt+ "}"
//   marker  := "readout" IDENT
// `#` starts a comment running to the end of the line.
ProtocolProgram parse_program(std::string_view text, const ParseOptions& options = {});

// Canonical text; parse_program(format_program(p)) == p when the parse uses
// the calibration the lasers of p were built with.
std::string format_program(const ProtocolProgram& program);

}  // namespace nvdnp::seq
