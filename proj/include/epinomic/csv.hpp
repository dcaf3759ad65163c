#pragma once

#include "epinomic/core.hpp"

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace epinomic {

/// Plain comma-separated table: no quoting, header row, '.' decimals.
struct CsvTable {
    std::string path;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int col(const std::string& name) const;
    bool has_col(const std::string& name) const;
    double num(std::size_t row, int col) const;
    const std::string& str(std::size_t row, int col) const { return rows[row][std::size_t(col)]; }
    /// 1-based line number in the file for data row `row`.
    long line(std::size_t row) const { return long(row) + 2; }
};

CsvTable read_csv(const std::filesystem::path& path);

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path);
    void header(const std::vector<std::string>& cols);
    CsvWriter& field(const std::string& s);
    CsvWriter& field(double v);
    void end_row();

private:
    std::ofstream out_;
    bool first_ = true;
};

} // namespace epinomic
