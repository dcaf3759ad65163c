#include "epinomic/csv.hpp"

#include <fmt/format.h>

#include <charconv>
#include <sstream>

namespace epinomic {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

} // namespace

int CsvTable::col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return int(i);
    throw DataError(path, 1, "missing-column", fmt::format("column '{}' not found", name));
}

bool CsvTable::has_col(const std::string& name) const {
    for (const auto& h : header)
        if (h == name) return true;
    return false;
}

double CsvTable::num(std::size_t row, int c) const {
    const std::string& s = rows[row][std::size_t(c)];
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw DataError(path, line(row), "numeric-field",
                        fmt::format("column '{}' value '{}' is not a number", header[std::size_t(c)], s));
    return v;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path.string(), -1, "missing-file", "cannot open file");
    CsvTable t;
    t.path = path.string();
    std::string line;
    bool first = true;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (first) {
            if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
            t.header = split(line);
            first = false;
            continue;
        }
        if (line.empty()) continue;
        auto fields = split(line);
        if (fields.size() != t.header.size())
            throw DataError(t.path, lineno, "column-count",
                            fmt::format("expected {} fields, found {}", t.header.size(), fields.size()));
        t.rows.push_back(std::move(fields));
    }
    if (first) throw DataError(t.path, 1, "header", "empty file");
    return t;
}

CsvWriter::CsvWriter(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw Error(fmt::format("cannot write {}", path.string()));
}

void CsvWriter::header(const std::vector<std::string>& cols) {
    for (const auto& c : cols) field(c);
    end_row();
}

CsvWriter& CsvWriter::field(const std::string& s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
    return *this;
}

CsvWriter& CsvWriter::field(double v) { return field(format_number(v)); }

void CsvWriter::end_row() {
    out_ << '\n';
    first_ = true;
}

} // namespace epinomic
