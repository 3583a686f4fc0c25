#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace difflab {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kVersionString = "difflab 1.0.0";

// %.17g with the C locale: '.' decimal point, round-trip safe.
std::string format_g17(double value);

std::uint64_t fnv1a64(std::string_view bytes);

// Throws std::invalid_argument if the file cannot be read.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

/* CSV with '#'-prefixed metadata comment lines before the header:
 *   # schema_version=1
 *   # version=difflab 1.0.0
 *   ...
 * Metadata keys are emitted in the map's (sorted) order so identical inputs
 * produce byte-identical files. */
void write_csv(std::ostream& out, const std::map<std::string, std::string>& metadata,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

}  // namespace difflab
