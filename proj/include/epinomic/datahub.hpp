#pragma once

#include "epinomic/core.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace epinomic {

/// Age bin labels "0-4" … "75-79", "80+".
const std::vector<std::string>& age_bin_labels();
/// Weight of each age bin inside the 16–65 active population.
Vec active_age_weights();

struct GeoFrame {
    std::vector<std::string> patch_ids;
    std::vector<std::string> names;
    Mat population;        ///< 17 × G persons
    Vec active_population; ///< persons aged 16–65
    Vec area;              ///< km²

    int size() const { return int(patch_ids.size()); }
    int index_of(const std::string& id_or_name) const;
};

struct MobilityMatrix {
    Mat raw;        ///< commuters/day, origin × destination
    Mat normalized; ///< fraction of the origin's active population
};

struct ContactMatrixSet {
    Mat home, school, leisure_public, leisure_private;
    /// Work matrices as listed in the source file (NACE-21 letter or NACE-64 code).
    std::vector<std::pair<std::string, Mat>> work_source;
    /// Work matrix per catalog sector after broadcasting.
    std::vector<Mat> work;

    Mat prepandemic_total(const Vec& lmc_shares) const;
};

struct SectorCatalog {
    std::vector<std::string> codes;
    Vec f_workplace, f_telework, lav_c, lav_d, fp, inventory_days, employee_share;
    Mat criticality; ///< (input l, sector k) ∈ {0, 0.5, 1}
    Mat lmc;         ///< G × K labor market composition
    Vec willingness; ///< derived W_k

    int size() const { return int(codes.size()); }
    int index_of(const std::string& code) const;
    /// Indices of all sectors whose code equals `code` or starts with it (e.g. "R" → R90-92, R93).
    std::vector<int> match(const std::string& code) const;
};

struct IOTables {
    Mat Z;
    Vec x0, c0, f0, l0;
    Mat A;  ///< derived technical coefficients
    Mat S0; ///< derived target inventories
};

/// Share of f0 in each exogenous demand component.
struct ExogenousSplit {
    static constexpr int kComponents = 4;
    static const std::vector<std::string>& names(); ///< government, investment, exports_goods, exports_services
    Mat shares; ///< K × 4, rows sum to 1
    bool from_file = false;
};

struct CountryDataset {
    std::string code;
    std::filesystem::path root;
    GeoFrame geo;
    MobilityMatrix mobility;
    ContactMatrixSet contacts;
    SectorCatalog sectors;
    IOTables io;
    ExogenousSplit exogenous;

    int patches() const { return geo.size(); }
    int sector_count() const { return sectors.size(); }
};

using DatasetPtr = std::shared_ptr<const CountryDataset>;

/// Raw, unvalidated components; `build_dataset` validates and derives.
struct DatasetParts {
    std::string code;
    GeoFrame geo;
    Mat commuters;
    ContactMatrixSet contacts;
    SectorCatalog sectors;
    Mat Z;
    Vec x0, c0, f0, l0;
    std::optional<Mat> exogenous_shares;
};

std::vector<DataError> validate_parts(const DatasetParts& parts);
CountryDataset build_dataset(DatasetParts parts);
DatasetParts read_dataset_parts(const std::filesystem::path& root);
CountryDataset load_country_dataset(const std::filesystem::path& root);
DatasetPtr load_shared_dataset(const std::filesystem::path& root);
void write_country_dataset(const CountryDataset& ds, const std::filesystem::path& root);

/// Names of the CSV files making up a dataset directory.
const std::vector<std::string>& dataset_csv_files();

Mat normalize_mobility(const Mat& commuters, const Vec& active_population);
Mat technical_coefficients(const Mat& Z, const Vec& x0);
Vec willingness(const Vec& fp, const Vec& f_telework, const Vec& employee_share);

/// Aggregates patches into groups (used by the reduced-fidelity calibration mode).
CountryDataset aggregate_patches(const CountryDataset& ds,
                                 const std::vector<std::vector<int>>& groups,
                                 const std::vector<std::string>& new_ids);

} // namespace epinomic
