//
//  case_io.cpp
//

#include "orpd/case_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace orpd {

namespace {

// Strips % comments and joins ... continuations, keeping newlines so that
// matrix rows can still be split on them.
std::string preprocess(std::istream& in) {
  std::string out, line;
  while (std::getline(in, line)) {
    auto pos = line.find('%');
    if (pos != std::string::npos) line.erase(pos);
    auto cont = line.find("...");
    if (cont != std::string::npos) {
      out += line.substr(0, cont);
      continue;  // no newline: next line continues this one
    }
    out += line;
    out += '\n';
  }
  return out;
}

bool parse_double(const std::string& tok, double& val) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, val);
  return ec == std::errc() && ptr == last;
}

Matrix parse_matrix_body(const std::string& body, const std::string& name) {
  Matrix rows;
  std::string row_text;
  int row_no = 0;
  auto flush_row = [&]() {
    std::istringstream ts(row_text);
    std::vector<double> vals;
    std::string tok;
    while (ts >> tok) {
      // commas are permitted separators inside rows
      std::replace(tok.begin(), tok.end(), ',', ' ');
      std::istringstream sub(tok);
      std::string piece;
      while (sub >> piece) {
        double v;
        if (!parse_double(piece, v))
          throw NonNumericEntry(name, row_no + 1, piece);
        vals.push_back(v);
      }
    }
    if (!vals.empty()) {
      ++row_no;
      rows.push_back(std::move(vals));
    }
    row_text.clear();
  };
  for (char c : body) {
    if (c == ';' || c == '\n') {
      flush_row();
    } else {
      row_text += (c == ',') ? ' ' : c;
    }
  }
  flush_row();
  return rows;
}

void check_rect(const Matrix& m, const std::string& name, size_t min_cols) {
  for (size_t i = 0; i < m.size(); ++i) {
    if (m[i].size() < min_cols)
      throw MalformedRow(name, static_cast<int>(i + 1),
                         "expected at least " + std::to_string(min_cols) +
                             " columns, got " + std::to_string(m[i].size()));
    if (m[i].size() != m[0].size())
      throw MalformedRow(name, static_cast<int>(i + 1),
                         "inconsistent column count");
  }
}

}  // namespace

RawCase parse_case(std::istream& in) {
  const std::string text = preprocess(in);
  RawCase c;

  // function mpc = <name>
  {
    auto fpos = text.find("function");
    if (fpos != std::string::npos) {
      auto eq = text.find('=', fpos);
      if (eq != std::string::npos) {
        std::istringstream ns(text.substr(eq + 1));
        ns >> c.name;
      }
    }
  }

  std::map<std::string, Matrix> matrices;
  bool have_base = false;

  size_t pos = 0;
  while ((pos = text.find("mpc.", pos)) != std::string::npos) {
    size_t name_start = pos + 4;
    size_t name_end = name_start;
    while (name_end < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[name_end])) ||
            text[name_end] == '_'))
      ++name_end;
    std::string field = text.substr(name_start, name_end - name_start);
    size_t eq = text.find('=', name_end);
    if (eq == std::string::npos) break;
    size_t vstart = text.find_first_not_of(" \t\n", eq + 1);
    if (vstart == std::string::npos) break;
    if (text[vstart] == '[') {
      size_t vend = text.find(']', vstart);
      if (vend == std::string::npos)
        throw ParseError("unterminated matrix mpc." + field);
      std::string body = text.substr(vstart + 1, vend - vstart - 1);
      matrices[field] = parse_matrix_body(body, field);
      pos = vend + 1;
    } else if (field == "baseMVA") {
      size_t vend = text.find(';', vstart);
      std::string tok = text.substr(vstart, vend - vstart);
      tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
      double v;
      if (!parse_double(tok, v)) throw NonNumericEntry("baseMVA", 1, tok);
      c.base_mva = v;
      have_base = true;
      pos = vend == std::string::npos ? text.size() : vend + 1;
    } else {
      // string field (e.g. mpc.version) or unrelated scalar: skip it
      size_t vend = text.find(';', vstart);
      pos = vend == std::string::npos ? text.size() : vend + 1;
    }
  }

  if (!have_base) throw MissingMatrix("baseMVA");
  for (const char* req : {"bus", "gen", "branch"}) {
    auto it = matrices.find(req);
    if (it == matrices.end() || it->second.empty()) throw MissingMatrix(req);
  }

  c.bus_rows = std::move(matrices["bus"]);
  c.gen_rows = std::move(matrices["gen"]);
  c.branch_rows = std::move(matrices["branch"]);
  if (auto it = matrices.find("gencost"); it != matrices.end())
    c.gencost_rows = std::move(it->second);

  check_rect(c.bus_rows, "bus", 13);
  check_rect(c.gen_rows, "gen", 10);
  check_rect(c.branch_rows, "branch", 13);
  if (!c.gencost_rows.empty()) check_rect(c.gencost_rows, "gencost", 4);
  return c;
}

RawCase parse_case_string(const std::string& text) {
  std::istringstream ss(text);
  return parse_case(ss);
}

RawCase parse_case_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open case file: " + path);
  RawCase c = parse_case(f);
  if (c.name.empty()) {
    auto slash = path.find_last_of("/\\");
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    auto dot = base.find_last_of('.');
    c.name = dot == std::string::npos ? base : base.substr(0, dot);
  }
  return c;
}

namespace {

void write_number(std::ostream& out, double v) {
  char buf[40];
  snprintf(buf, sizeof(buf), "%.12g", v);
  out << buf;
}

void write_matrix(std::ostream& out, const std::string& name, const Matrix& m) {
  out << "mpc." << name << " = [\n";
  for (const auto& row : m) {
    out << '\t';
    for (size_t j = 0; j < row.size(); ++j) {
      if (j) out << '\t';
      write_number(out, row[j]);
    }
    out << ";\n";
  }
  out << "];\n\n";
}

}  // namespace

void write_case(const RawCase& c, std::ostream& out) {
  out << "function mpc = " << (c.name.empty() ? "case_unnamed" : c.name)
      << "\n";
  out << "mpc.version = '2';\n";
  out << "mpc.baseMVA = ";
  write_number(out, c.base_mva);
  out << ";\n\n";
  write_matrix(out, "bus", c.bus_rows);
  write_matrix(out, "gen", c.gen_rows);
  write_matrix(out, "branch", c.branch_rows);
  if (!c.gencost_rows.empty()) write_matrix(out, "gencost", c.gencost_rows);
}

std::string write_case_string(const RawCase& c) {
  std::ostringstream ss;
  write_case(c, ss);
  return ss.str();
}

std::vector<Diagnostic> validate_case(const RawCase& raw) {
  std::vector<Diagnostic> diags;
  auto add = [&](DiagSeverity sev, std::string code, std::string msg) {
    diags.push_back({sev, std::move(code), std::move(msg)});
  };

  if (raw.base_mva <= 0)
    add(DiagSeverity::Error, "NonpositiveBaseMVA",
        "baseMVA must be positive, got " + std::to_string(raw.base_mva));

  std::set<long long> bus_ids;
  for (size_t i = 0; i < raw.bus_rows.size(); ++i) {
    const auto& b = raw.bus_rows[i];
    long long id = llround(b[col::BUS_I]);
    if (!bus_ids.insert(id).second)
      add(DiagSeverity::Error, "DuplicateBusId",
          "bus ID " + std::to_string(id) + " appears more than once");
    if (b[col::VMIN] > b[col::VMAX])
      add(DiagSeverity::Error, "InvertedBound",
          "bus " + std::to_string(id) + " has Vmin > Vmax");
    if (b[col::VMIN] <= 0)
      add(DiagSeverity::Error, "NonpositiveVmin",
          "bus " + std::to_string(id) + " has Vmin <= 0");
  }

  for (size_t i = 0; i < raw.branch_rows.size(); ++i) {
    const auto& br = raw.branch_rows[i];
    long long f = llround(br[col::F_BUS]), t = llround(br[col::T_BUS]);
    for (long long end : {f, t})
      if (!bus_ids.count(end))
        add(DiagSeverity::Error, "UnknownBus",
            "branch " + std::to_string(i + 1) + " references unknown bus " +
                std::to_string(end));
    if (br[col::BR_R] < 0)
      add(DiagSeverity::Warning, "NegativeResistance",
          "branch " + std::to_string(i + 1) + " has r < 0");
    if (br[col::BR_STATUS] == 0)
      add(DiagSeverity::Warning, "OutOfServiceBranch",
          "branch " + std::to_string(i + 1) + " is out of service; dropped");
  }

  for (size_t i = 0; i < raw.gen_rows.size(); ++i) {
    const auto& g = raw.gen_rows[i];
    long long bus = llround(g[col::GEN_BUS]);
    if (!bus_ids.count(bus))
      add(DiagSeverity::Error, "UnknownBus",
          "generator " + std::to_string(i + 1) + " references unknown bus " +
              std::to_string(bus));
    if (g[col::PMIN] > g[col::PMAX])
      add(DiagSeverity::Error, "InvertedBound",
          "generator " + std::to_string(i + 1) + " has Pmin > Pmax");
    if (g[col::QMIN] > g[col::QMAX])
      add(DiagSeverity::Error, "InvertedBound",
          "generator " + std::to_string(i + 1) + " has Qmin > Qmax");
    if (g[col::GEN_STATUS] == 0)
      add(DiagSeverity::Warning, "OutOfServiceGen",
          "generator " + std::to_string(i + 1) +
              " is out of service; dropped");
  }

  if (!raw.gencost_rows.empty()) {
    if (raw.gencost_rows.size() != raw.gen_rows.size())
      add(DiagSeverity::Error, "GencostCountMismatch",
          "gencost has " + std::to_string(raw.gencost_rows.size()) +
              " rows for " + std::to_string(raw.gen_rows.size()) +
              " generators");
    for (size_t i = 0; i < raw.gencost_rows.size(); ++i) {
      const auto& gc = raw.gencost_rows[i];
      if (llround(gc[col::COST_MODEL]) != col::POLYNOMIAL) {
        add(DiagSeverity::Error, "UnsupportedCostModel",
            "gencost row " + std::to_string(i + 1) +
                ": only polynomial costs (model=2) are supported");
        continue;
      }
      int n = static_cast<int>(llround(gc[col::NCOST]));
      if (n < 1 || n > 3)
        add(DiagSeverity::Error, "UnsupportedCostDegree",
            "gencost row " + std::to_string(i + 1) +
                ": polynomial degree above 2 is not supported");
      if (gc.size() < static_cast<size_t>(col::COST + n))
        add(DiagSeverity::Error, "GencostTooShort",
            "gencost row " + std::to_string(i + 1) + " is missing coefficients");
    }
  }
  return diags;
}

bool has_errors(const std::vector<Diagnostic>& diags) {
  return std::any_of(diags.begin(), diags.end(), [](const Diagnostic& d) {
    return d.severity == DiagSeverity::Error;
  });
}

}  // namespace orpd
