//
//  case_io.hpp
//
//  MATPOWER case file parsing, validation and serialization.
//

#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace orpd {

// Column indices for the MATPOWER tables (subset handled by this project).
namespace col {
// mpc.bus
constexpr int BUS_I = 0, BUS_TYPE = 1, PD = 2, QD = 3, GS = 4, BS = 5,
              AREA = 6, VM = 7, VA = 8, BASE_KV = 9, ZONE = 10, VMAX = 11,
              VMIN = 12;
// mpc.gen
constexpr int GEN_BUS = 0, PG = 1, QG = 2, QMAX = 3, QMIN = 4, VG = 5,
              MBASE = 6, GEN_STATUS = 7, PMAX = 8, PMIN = 9;
// mpc.branch
constexpr int F_BUS = 0, T_BUS = 1, BR_R = 2, BR_X = 3, BR_B = 4, RATE_A = 5,
              RATE_B = 6, RATE_C = 7, TAP = 8, SHIFT = 9, BR_STATUS = 10,
              ANGMIN = 11, ANGMAX = 12;
// mpc.gencost
constexpr int COST_MODEL = 0, STARTUP = 1, SHUTDOWN = 2, NCOST = 3, COST = 4;
constexpr int POLYNOMIAL = 2, PW_LINEAR = 1;
}  // namespace col

using Matrix = std::vector<std::vector<double>>;

// Numeric contents of a MATPOWER case, as found in the file. Bus IDs are
// kept exactly as given; no renumbering or unit conversion happens here.
struct RawCase {
  std::string name;
  double base_mva = 0.0;
  Matrix bus_rows;
  Matrix gen_rows;
  Matrix branch_rows;
  Matrix gencost_rows;  // may be empty when the case carries no cost data
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class MissingMatrix : public ParseError {
 public:
  explicit MissingMatrix(const std::string& which)
      : ParseError("missing required matrix: " + which), matrix(which) {}
  std::string matrix;
};
class MalformedRow : public ParseError {
 public:
  MalformedRow(const std::string& matrix, int row, const std::string& what)
      : ParseError("malformed row " + std::to_string(row) + " in mpc." +
                   matrix + ": " + what) {}
};
class NonNumericEntry : public ParseError {
 public:
  NonNumericEntry(const std::string& matrix, int row, const std::string& tok)
      : ParseError("non-numeric entry '" + tok + "' in mpc." + matrix +
                   " row " + std::to_string(row)) {}
};

RawCase parse_case(std::istream& in);
RawCase parse_case_string(const std::string& text);
RawCase parse_case_file(const std::string& path);

// Serializes back to MATPOWER text with 12 significant digits; reparsing the
// output reproduces the matrices exactly at that precision.
void write_case(const RawCase& c, std::ostream& out);
std::string write_case_string(const RawCase& c);

enum class DiagSeverity { Warning, Error };

struct Diagnostic {
  DiagSeverity severity = DiagSeverity::Warning;
  std::string code;     // stable identifier, e.g. "UnknownBus"
  std::string message;  // human-readable detail
};

// Structural checks on a parsed case. Error-severity diagnostics make the
// case unusable for build_network; warnings (out-of-service rows, negative
// resistance, ...) do not.
std::vector<Diagnostic> validate_case(const RawCase& raw);

bool has_errors(const std::vector<Diagnostic>& diags);

}  // namespace orpd
