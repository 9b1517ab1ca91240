#ifndef STUDYREC_CSV_HPP
#define STUDYREC_CSV_HPP

#include <string>
#include <string_view>
#include <vector>

namespace studyrec {

// Minimal RFC-4180-ish CSV handling: comma separated, double quotes around
// fields that need them, "" as an escaped quote. Trailing \r is stripped so
// Windows exports ingest cleanly.
std::vector<std::string> split_csv_line(std::string_view line);

std::string csv_escape(std::string_view field);

std::string trim(std::string_view s);

}  // namespace studyrec

#endif
