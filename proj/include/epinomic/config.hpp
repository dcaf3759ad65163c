#pragma once

#include "epinomic/coupler.hpp"

#include <filesystem>
#include <optional>
#include <string>

namespace epinomic {

/// Reads country.toml. Missing keys keep the values of `CountryConfig::defaults_for(code)`.
CountryConfig load_country_config(const std::filesystem::path& file);
/// `<dataset root>/country.toml` when present, else defaults for the dataset code.
CountryConfig country_config_for(const CountryDataset& ds);

/// A scenario file: either a library scenario plus variant, or a fully explicit spec.
struct ScenarioFile {
    std::optional<std::filesystem::path> dataset; ///< resolved against the file's directory
    std::string library;                          ///< empty → explicit spec
    ScenarioVariant variant;
    ScenarioSpec spec;
    bool factual_policy = false; ///< explicit spec: start from the country's factual schedule
    bool has_seeds = false;
};

ScenarioFile load_scenario_file(const std::filesystem::path& file);
/// Builds the runnable spec, filling library content and country defaults.
ScenarioSpec resolve_scenario(const ScenarioFile& f, const CountryDataset& ds, const CountryConfig& cfg);

/// Parses "name=value" as given to --set.
std::pair<std::string, double> parse_assignment(const std::string& text);

} // namespace epinomic
