#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "extremodep/numerics.hpp"

namespace extremodep::cli {

inline constexpr const char* kVersion = "0.1.0";

// Bad flags, malformed values or missing inputs; mapped to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// "a:b:n" gives n equispaced values from a to b; otherwise a comma list.
Vec parse_range(const std::string& s);
// Comma list whose entries may be fractions such as 1/600.
Vec parse_list(const std::string& s);

struct Table {
  std::vector<std::string> columns;
  Matrix rows;
};

// Numeric CSV with a header row. An optional "extremodep-<kind>-v1" first line
// must name `kind` and version 1; "#" lines are skipped. NA and empty cells are NaN.
Table read_table(std::istream& is, const std::string& kind = "data");
Table read_table_file(const std::string& path, const std::string& kind = "data");

// Shortest round-trip decimal form.
std::string num(double v);

// Files are staged in memory and written by commit(): each goes to a temp file
// next to its target, and the temp files are renamed only after all writes
// succeeded. On failure every temp file is removed.
class OutputSet {
 public:
  void stage(const std::string& path, std::string content);
  void commit();
  std::vector<std::string> paths() const;

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

// Exit code: 0 success, 1 runtime error, 2 usage error. The run manifest goes
// to `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace extremodep::cli
