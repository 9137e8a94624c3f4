#pragma once

#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace perpsieve::csv {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::vector<std::string_view> split(std::string_view line, char sep = ',');

/// Line-oriented reader that skips blank lines and '#' comment lines and
/// checks the header row verbatim.
class Reader {
public:
    Reader(const std::string& path, std::string_view expected_header);

    /// Fills fields for the next data row; false at end of file.
    bool next(std::vector<std::string_view>& fields);

    std::size_t line_number() const noexcept { return line_no_; }
    const std::string& path() const noexcept { return path_; }

private:
    bool next_line();

    std::string path_;
    std::ifstream in_;
    std::string line_;
    std::size_t line_no_ = 0;
};

/// Opens path for writing, writes an optional "# run_id=..." provenance line and the header.
std::ofstream open_for_write(const std::string& path, std::string_view header, std::string_view run_id = {});

}  // namespace perpsieve::csv
