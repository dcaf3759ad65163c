#pragma once

#include "epinomic/coupler.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace epinomic {

/// String table written as CSV.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void write(const std::filesystem::path& file) const;
};

struct CountryInput {
    const CountryDataset* ds = nullptr;
    CountryConfig cfg;
};

/// One run of a grid with the labels that identify it in the summary.
struct GridRun {
    const CountryInput* country = nullptr;
    ScenarioSpec spec;
    std::vector<std::pair<std::string, std::string>> labels;
};

/// Restricts a grid to one variant; unset fields keep the full published grid.
struct GridFilter {
    std::optional<std::string> policy;
    std::optional<Date> date;
    std::optional<int> release_months;
    std::optional<double> nu;
    std::optional<std::string> second_seed;
    std::optional<int> intervention_day;
};

/// Runs of scenario1 (5 policies × 6 dates), scenario2 (4 release months per country),
/// scenario3 (ν ∈ {7, 28, 62} per country) or scenario4 (every non-capital second seed per country).
std::vector<GridRun> build_grid(const std::string& scenario, const std::vector<CountryInput>& countries,
                                const GridFilter& filter = {});

/// Runs every entry, `overrides` applied on top of each spec, up to `workers` at a time.
std::vector<SimulationRecord> run_grid(const std::vector<GridRun>& runs, int workers,
                                       const std::map<std::string, double>& overrides = {});

/// Summary table of a scenario grid; every value is recomputable from the record CSVs.
Table summarize(const std::string& scenario, const std::vector<GridRun>& runs,
                const std::vector<SimulationRecord>& records);

/// Long-format IC load, output and labor series for a one-at-a-time sweep.
Table sweep_series(const std::string& parameter, const std::vector<double>& values,
                   const std::vector<SimulationRecord>& records);

/// File-name-safe version of a run name.
std::string slug(const std::string& name);

} // namespace epinomic
