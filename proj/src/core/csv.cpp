#include "perpsieve/csv.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <system_error>

#include "perpsieve/error.hpp"

namespace perpsieve::csv {

std::string format_double(double v) {
    if (v == 0.0) return "0";  // folds -0 so ledgers print one zero
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) fail(ErrorKind::Io, "number formatting failed");
    return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '"')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '"' || text.back() == '\r')) text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        fail(ErrorKind::Schema, "not a number: '" + std::string(text) + "'");
    }
    return v;
}

long long parse_int(std::string_view text) {
    while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\r')) text.remove_suffix(1);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
        fail(ErrorKind::Schema, "not an integer: '" + std::string(text) + "'");
    }
    return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

Reader::Reader(const std::string& path, std::string_view expected_header) : path_(path), in_(path) {
    if (!in_) fail(ErrorKind::Io, "cannot open " + path);
    if (!next_line()) fail(ErrorKind::Schema, path + ": missing header");
    std::string_view header = line_;
    if (header.size() >= 3 && static_cast<unsigned char>(header[0]) == 0xEF) header.remove_prefix(3);  // BOM
    if (header != expected_header) {
        fail(ErrorKind::Schema, path + ": expected header '" + std::string(expected_header) + "', got '" +
                                    std::string(header) + "'");
    }
}

bool Reader::next_line() {
    while (std::getline(in_, line_)) {
        ++line_no_;
        if (!line_.empty() && line_.back() == '\r') line_.pop_back();
        if (line_.empty() || line_.front() == '#') continue;
        return true;
    }
    return false;
}

bool Reader::next(std::vector<std::string_view>& fields) {
    if (!next_line()) return false;
    fields = split(line_);
    return true;
}

std::ofstream open_for_write(const std::string& path, std::string_view header, std::string_view run_id) {
    const std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(p.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::Io, "cannot write " + path);
    if (!run_id.empty()) out << "# run_id=" << run_id << '\n';
    out << header << '\n';
    return out;
}

}  // namespace perpsieve::csv
