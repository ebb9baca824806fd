// Copyright 2026 The curvlens Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Plot-ready file output shared by every module: CSV tables, text files, and
// the provenance block embedded in each JSON metadata file.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "curvlens/numkit.hpp"

namespace curvlens {

/// Shortest decimal string that round-trips to the same double. Non-finite
/// values become "nan", "inf", "-inf".
std::string format_double(double x);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  void row(std::span<const double> values);
  void row(std::initializer_list<double> values) {
    row(std::span<const double>(values.begin(), values.size()));
  }
  const std::string& str() const noexcept { return out_; }

 private:
  std::size_t columns_;
  std::string out_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Numeric CSV with a header line. "nan"/"inf" cells parse to non-finite values.
CsvTable read_csv(const std::string& path);

/// Writes the file, creating parent directories. Throws IoError.
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

/// "fnv1a64:<16 hex digits>" over the little-endian IEEE-754 bytes.
std::string digest_hex(const DVector& v);

/// Provenance echoed into every metadata file. `config_json` must be a JSON
/// object in text form; it is embedded verbatim as the "config" member.
struct RunInfo {
  std::string command;
  std::string config_json = "{}";
  std::uint64_t seed = 0;
};

std::string version_string();

}  // namespace curvlens
