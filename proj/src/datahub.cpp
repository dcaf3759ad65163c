#include "epinomic/datahub.hpp"

#include "epinomic/csv.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace fs = std::filesystem;

namespace epinomic {

const std::vector<std::string>& age_bin_labels() {
    static const std::vector<std::string> labels = [] {
        std::vector<std::string> v;
        for (int i = 0; i < kAgeGroups - 1; ++i) v.push_back(fmt::format("{}-{}", 5 * i, 5 * i + 4));
        v.push_back("80+");
        return v;
    }();
    return labels;
}

Vec active_age_weights() {
    Vec w = Vec::Zero(kAgeGroups);
    w(3) = 0.8; // 16-19
    for (int i = 4; i <= 12; ++i) w(i) = 1.0;
    w(13) = 0.2; // 65
    return w;
}

const std::vector<std::string>& ExogenousSplit::names() {
    static const std::vector<std::string> n{"government", "investment", "exports_goods",
                                            "exports_services"};
    return n;
}

const std::vector<std::string>& dataset_csv_files() {
    static const std::vector<std::string> f{
        "demography.csv",     "active_population.csv",   "mobility.csv",
        "contacts_home.csv",  "contacts_school.csv",     "contacts_leisure_public.csv",
        "contacts_leisure_private.csv", "contacts_work.csv", "sectors.csv",
        "lmc.csv",            "io_z.csv",                "io_vectors.csv",
        "criticality.csv"};
    return f;
}

int GeoFrame::index_of(const std::string& key) const {
    for (int g = 0; g < size(); ++g)
        if (patch_ids[std::size_t(g)] == key || names[std::size_t(g)] == key) return g;
    throw Error(fmt::format("unknown patch '{}'", key));
}

int SectorCatalog::index_of(const std::string& code) const {
    for (int k = 0; k < size(); ++k)
        if (codes[std::size_t(k)] == code) return k;
    throw Error(fmt::format("unknown sector '{}'", code));
}

std::vector<int> SectorCatalog::match(const std::string& code) const {
    std::vector<int> out;
    for (int k = 0; k < size(); ++k)
        if (codes[std::size_t(k)] == code) return {k};
    for (int k = 0; k < size(); ++k)
        if (codes[std::size_t(k)].rfind(code, 0) == 0) out.push_back(k);
    return out;
}

Mat ContactMatrixSet::prepandemic_total(const Vec& lmc_shares) const {
    Mat n = home + school + leisure_public + leisure_private;
    for (std::size_t k = 0; k < work.size(); ++k) n += lmc_shares(Eigen::Index(k)) * work[k];
    return n;
}

Mat normalize_mobility(const Mat& commuters, const Vec& active) {
    if (commuters.rows() != active.size() || commuters.cols() != active.size())
        throw Error("normalize_mobility: dimension mismatch");
    Mat out(commuters.rows(), commuters.cols());
    for (Eigen::Index g = 0; g < commuters.rows(); ++g) {
        if (!(active(g) > 0.0))
            throw Error(fmt::format("normalize_mobility: zero active population in patch {}", g));
        out.row(g) = commuters.row(g) / active(g);
    }
    return out;
}

Mat technical_coefficients(const Mat& Z, const Vec& x0) {
    if (Z.cols() != x0.size()) throw Error("technical_coefficients: dimension mismatch");
    Mat A(Z.rows(), Z.cols());
    for (Eigen::Index l = 0; l < Z.cols(); ++l) {
        if (!(x0(l) > 0.0))
            throw Error(fmt::format("technical_coefficients: zero gross output for sector {}", l));
        A.col(l) = Z.col(l) / x0(l);
    }
    return A;
}

Vec willingness(const Vec& fp, const Vec& f_telework, const Vec& employee_share) {
    Vec prod = fp.cwiseProduct(f_telework);
    double denom = prod.dot(employee_share);
    if (!(denom > 0.0)) throw Error("willingness: FP·f_telework is zero for every sector");
    return prod / denom;
}

namespace {

void push(std::vector<DataError>& errs, const std::string& file, long row, const std::string& inv,
          const std::string& detail) {
    errs.emplace_back(file, row, inv, detail);
}

bool in_unit(double v) { return v >= 0.0 && v <= 1.0 && std::isfinite(v); }

} // namespace

std::vector<DataError> validate_parts(const DatasetParts& p) {
    std::vector<DataError> e;
    const int G = p.geo.size();
    const int K = p.sectors.size();
    const auto& geo = p.geo;

    if (G < 1) push(e, "active_population.csv", -1, "patch-count", "at least one patch required");
    if (geo.population.rows() != kAgeGroups || geo.population.cols() != G)
        push(e, "demography.csv", -1, "dimension",
             fmt::format("population must be {}×{}", kAgeGroups, G));
    else
        for (int g = 0; g < G; ++g)
            for (int i = 0; i < kAgeGroups; ++i)
                if (!(geo.population(i, g) > 0.0))
                    push(e, "demography.csv", 2 + g * kAgeGroups + i, "positive-population",
                         fmt::format("patch {} age {} has population {}", geo.patch_ids[std::size_t(g)],
                                     age_bin_labels()[std::size_t(i)], geo.population(i, g)));
    for (int g = 0; g < G && g < geo.active_population.size(); ++g) {
        if (!(geo.active_population(g) > 0.0))
            push(e, "active_population.csv", 2 + g, "positive-active-population",
                 geo.patch_ids[std::size_t(g)]);
        if (!(geo.area(g) > 0.0))
            push(e, "active_population.csv", 2 + g, "positive-area", geo.patch_ids[std::size_t(g)]);
    }

    if (p.commuters.rows() != G || p.commuters.cols() != G) {
        push(e, "mobility.csv", -1, "dimension", fmt::format("commuter matrix must be {}×{}", G, G));
    } else {
        for (int g = 0; g < G; ++g) {
            double row = 0.0;
            for (int h = 0; h < G; ++h) {
                if (!(p.commuters(g, h) >= 0.0))
                    push(e, "mobility.csv", 2 + g * G + h, "non-negative-commuters", "");
                row += p.commuters(g, h);
            }
            if (geo.active_population.size() == G && row > geo.active_population(g) * (1.0 + 1e-9))
                push(e, "mobility.csv", 2 + g * G, "row-sum-le-1",
                     fmt::format("patch {} commuters {} exceed active population {}",
                                 geo.patch_ids[std::size_t(g)], row, geo.active_population(g)));
        }
    }

    auto check_contact = [&](const Mat& m, const std::string& file, bool reciprocal) {
        if (m.rows() != kAgeGroups || m.cols() != kAgeGroups) {
            push(e, file, -1, "dimension", "contact matrix must be 17×17");
            return;
        }
        for (int i = 0; i < kAgeGroups; ++i)
            for (int j = 0; j < kAgeGroups; ++j)
                if (!(m(i, j) >= 0.0) || !std::isfinite(m(i, j)))
                    push(e, file, 2 + i * kAgeGroups + j, "non-negative-contacts", "");
        if (!reciprocal || geo.population.rows() != kAgeGroups) return;
        Vec T = geo.population.rowwise().sum();
        for (int i = 0; i < kAgeGroups; ++i)
            for (int j = i + 1; j < kAgeGroups; ++j) {
                double a = m(i, j) * T(i), b = m(j, i) * T(j);
                if (std::abs(a - b) > 1e-6 * std::max({a, b, 1e-300}))
                    push(e, file, 2 + i * kAgeGroups + j, "reciprocity",
                         fmt::format("N[{},{}]·T = {} vs N[{},{}]·T = {}", i, j, a, j, i, b));
            }
    };
    check_contact(p.contacts.home, "contacts_home.csv", true);
    check_contact(p.contacts.school, "contacts_school.csv", false);
    check_contact(p.contacts.leisure_public, "contacts_leisure_public.csv", true);
    check_contact(p.contacts.leisure_private, "contacts_leisure_private.csv", true);
    for (const auto& [code, m] : p.contacts.work_source) {
        check_contact(m, "contacts_work.csv", false);
        if (p.sectors.match(code).empty())
            push(e, "contacts_work.csv", -1, "known-sector", fmt::format("sector '{}' matches no catalog code", code));
    }
    for (int k = 0; k < K; ++k) {
        bool covered = false;
        for (const auto& [code, m] : p.contacts.work_source) {
            auto idx = p.sectors.match(code);
            if (std::find(idx.begin(), idx.end(), k) != idx.end()) covered = true;
        }
        if (!covered)
            push(e, "contacts_work.csv", -1, "sector-coverage",
                 fmt::format("no work contact matrix for sector {}", p.sectors.codes[std::size_t(k)]));
    }

    const auto& s = p.sectors;
    auto vec_ok = [&](const Vec& v) { return v.size() == K; };
    if (!(vec_ok(s.f_workplace) && vec_ok(s.f_telework) && vec_ok(s.lav_c) && vec_ok(s.lav_d) &&
          vec_ok(s.fp) && vec_ok(s.inventory_days) && vec_ok(s.employee_share))) {
        push(e, "sectors.csv", -1, "dimension", "sector columns have inconsistent lengths");
    } else {
        for (int k = 0; k < K; ++k) {
            long row = 2 + k;
            const std::string& c = s.codes[std::size_t(k)];
            if (!in_unit(s.f_workplace(k)) || !in_unit(s.f_telework(k)))
                push(e, "sectors.csv", row, "fraction-range", c);
            if (s.f_workplace(k) + s.f_telework(k) > 1.0 + 1e-9)
                push(e, "sectors.csv", row, "workplace-plus-telework-le-1", c);
            if (!in_unit(s.lav_c(k)) || !in_unit(s.lav_d(k)) || !in_unit(s.fp(k)))
                push(e, "sectors.csv", row, "fraction-range", c);
            if (!(s.inventory_days(k) > 0.0)) push(e, "sectors.csv", row, "positive-inventory-days", c);
            if (!(s.employee_share(k) >= 0.0)) push(e, "sectors.csv", row, "non-negative-share", c);
        }
        if (K > 0 && std::abs(s.employee_share.sum() - 1.0) > 1e-6)
            push(e, "sectors.csv", -1, "share-sum-1",
                 fmt::format("employee_share sums to {}", s.employee_share.sum()));
        if (K > 0 && !(s.fp.dot(s.f_telework.cwiseProduct(s.employee_share)) > 0.0))
            push(e, "sectors.csv", -1, "willingness-denominator", "FP·f_telework is zero everywhere");
    }
    if (s.criticality.rows() != K || s.criticality.cols() != K) {
        push(e, "criticality.csv", -1, "dimension", "criticality must be K×K");
    } else {
        for (int l = 0; l < K; ++l)
            for (int k = 0; k < K; ++k) {
                double v = s.criticality(l, k);
                if (v != 0.0 && v != 0.5 && v != 1.0)
                    push(e, "criticality.csv", -1, "criticality-level",
                         fmt::format("{} → {} has level {}", s.codes[std::size_t(l)], s.codes[std::size_t(k)], v));
            }
    }
    if (s.lmc.rows() != G || s.lmc.cols() != K) {
        push(e, "lmc.csv", -1, "dimension", fmt::format("lmc must be {}×{}", G, K));
    } else {
        for (int g = 0; g < G; ++g) {
            if ((s.lmc.row(g).array() < 0.0).any())
                push(e, "lmc.csv", 2 + g * K, "non-negative-share", geo.patch_ids[std::size_t(g)]);
            if (std::abs(s.lmc.row(g).sum() - 1.0) > 1e-6)
                push(e, "lmc.csv", 2 + g * K, "lmc-sum-1",
                     fmt::format("patch {} sums to {}", geo.patch_ids[std::size_t(g)], s.lmc.row(g).sum()));
        }
    }

    if (p.Z.rows() != K || p.Z.cols() != K) {
        push(e, "io_z.csv", -1, "dimension", fmt::format("Z must be {}×{}", K, K));
    } else if (p.x0.size() != K || p.c0.size() != K || p.f0.size() != K || p.l0.size() != K) {
        push(e, "io_vectors.csv", -1, "dimension", "IO vectors must have one entry per sector");
    } else {
        for (int k = 0; k < K; ++k) {
            long row = 2 + k;
            const std::string& c = s.codes[std::size_t(k)];
            if ((p.Z.row(k).array() < 0.0).any()) push(e, "io_z.csv", row, "non-negative-flows", c);
            if (!(p.x0(k) > 0.0)) push(e, "io_vectors.csv", row, "positive-gross-output", c);
            if (!(p.l0(k) > 0.0)) push(e, "io_vectors.csv", row, "positive-labor", c);
            if (p.c0(k) < 0.0) push(e, "io_vectors.csv", row, "non-negative-consumption", c);
            double gap = p.x0(k) - p.Z.row(k).sum() - p.c0(k) - p.f0(k);
            if (p.x0(k) > 0.0 && std::abs(gap) / p.x0(k) > 0.01)
                push(e, "io_vectors.csv", row, "accounting-identity",
                     fmt::format("sector {}: x0 − ΣZ − c0 − f0 = {} ({:.2f}% of x0)", c, gap,
                                 100.0 * gap / p.x0(k)));
        }
        for (int l = 0; l < K; ++l)
            if (p.x0(l) > 0.0 && p.Z.col(l).sum() >= p.x0(l))
                push(e, "io_z.csv", -1, "column-sum-lt-1",
                     fmt::format("inputs to {} exceed its gross output", s.codes[std::size_t(l)]));
    }

    if (p.exogenous_shares) {
        const Mat& m = *p.exogenous_shares;
        if (m.rows() != K || m.cols() != ExogenousSplit::kComponents)
            push(e, "exogenous_split.csv", -1, "dimension", "one row of 4 shares per sector");
        else
            for (int k = 0; k < K; ++k)
                if ((m.row(k).array() < 0.0).any() || std::abs(m.row(k).sum() - 1.0) > 1e-6)
                    push(e, "exogenous_split.csv", 2 + k, "share-sum-1", s.codes[std::size_t(k)]);
    }
    return e;
}

CountryDataset build_dataset(DatasetParts p) {
    auto errs = validate_parts(p);
    if (!errs.empty()) throw errs.front();

    CountryDataset ds;
    ds.code = p.code;
    ds.geo = std::move(p.geo);
    ds.mobility.raw = p.commuters;
    ds.mobility.normalized = normalize_mobility(p.commuters, ds.geo.active_population);

    ds.contacts = std::move(p.contacts);
    ds.sectors = std::move(p.sectors);
    const int K = ds.sectors.size();
    ds.contacts.work.assign(std::size_t(K), Mat::Zero(kAgeGroups, kAgeGroups));
    // Exact NACE-64 entries take precedence over NACE-21 letters.
    for (int pass = 0; pass < 2; ++pass)
        for (const auto& [code, m] : ds.contacts.work_source) {
            bool exact = false;
            for (const auto& c : ds.sectors.codes) exact = exact || c == code;
            if ((pass == 1) != exact) continue;
            for (int k : ds.sectors.match(code)) ds.contacts.work[std::size_t(k)] = m;
        }

    ds.sectors.willingness =
        willingness(ds.sectors.fp, ds.sectors.f_telework, ds.sectors.employee_share);

    ds.io.Z = p.Z;
    ds.io.x0 = p.x0;
    ds.io.c0 = p.c0;
    ds.io.f0 = p.f0;
    ds.io.l0 = p.l0;
    ds.io.A = technical_coefficients(p.Z, p.x0);
    ds.io.S0 = p.Z * ds.sectors.inventory_days.asDiagonal();

    ds.exogenous.from_file = p.exogenous_shares.has_value();
    if (p.exogenous_shares) {
        ds.exogenous.shares = *p.exogenous_shares;
    } else {
        ds.exogenous.shares = Mat::Zero(K, ExogenousSplit::kComponents);
        ds.exogenous.shares.col(0).setOnes();
    }
    return ds;
}

namespace {

Mat read_age_matrix(const fs::path& file) {
    auto t = read_csv(file);
    int ci = t.col("age_i"), cj = t.col("age_j"), cr = t.col("rate");
    Mat m = Mat::Zero(kAgeGroups, kAgeGroups);
    const auto& labels = age_bin_labels();
    auto age_index = [&](const std::string& s, std::size_t row) {
        auto it = std::find(labels.begin(), labels.end(), s);
        if (it == labels.end())
            throw DataError(t.path, t.line(row), "age-bin", fmt::format("unknown age bin '{}'", s));
        return int(it - labels.begin());
    };
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        m(age_index(t.str(r, ci), r), age_index(t.str(r, cj), r)) = t.num(r, cr);
    return m;
}

void write_age_matrix(const Mat& m, const fs::path& file) {
    CsvWriter w(file);
    w.header({"age_i", "age_j", "rate"});
    const auto& labels = age_bin_labels();
    for (int i = 0; i < kAgeGroups; ++i)
        for (int j = 0; j < kAgeGroups; ++j) {
            w.field(labels[std::size_t(i)]).field(labels[std::size_t(j)]).field(m(i, j));
            w.end_row();
        }
}

} // namespace

DatasetParts read_dataset_parts(const fs::path& root) {
    if (!fs::is_directory(root))
        throw DataError(root.string(), -1, "missing-directory", "dataset directory not found");
    for (const auto& f : dataset_csv_files())
        if (!fs::exists(root / f)) throw DataError((root / f).string(), -1, "missing-file", "required file absent");

    DatasetParts p;
    p.code = root.filename().string();
    if (p.code.empty()) p.code = root.parent_path().filename().string();

    auto act = read_csv(root / "active_population.csv");
    {
        int cp = act.col("patch"), cn = act.col("name"), ca = act.col("area_km2"),
            cv = act.col("active_population");
        int G = int(act.rows.size());
        p.geo.active_population.resize(G);
        p.geo.area.resize(G);
        for (int g = 0; g < G; ++g) {
            p.geo.patch_ids.push_back(act.str(std::size_t(g), cp));
            p.geo.names.push_back(act.str(std::size_t(g), cn));
            p.geo.area(g) = act.num(std::size_t(g), ca);
            p.geo.active_population(g) = act.num(std::size_t(g), cv);
        }
    }
    const int G = p.geo.size();
    std::unordered_map<std::string, int> pidx;
    for (int g = 0; g < G; ++g) pidx[p.geo.patch_ids[std::size_t(g)]] = g;
    auto patch_of = [&](const CsvTable& t, std::size_t r, int c) {
        auto it = pidx.find(t.str(r, c));
        if (it == pidx.end())
            throw DataError(t.path, t.line(r), "known-patch", fmt::format("unknown patch '{}'", t.str(r, c)));
        return it->second;
    };

    {
        auto t = read_csv(root / "demography.csv");
        int cp = t.col("patch"), ca = t.col("age_bin"), cv = t.col("population");
        p.geo.population = Mat::Constant(kAgeGroups, G, std::nan(""));
        const auto& labels = age_bin_labels();
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            auto it = std::find(labels.begin(), labels.end(), t.str(r, ca));
            if (it == labels.end())
                throw DataError(t.path, t.line(r), "age-bin", fmt::format("unknown age bin '{}'", t.str(r, ca)));
            p.geo.population(int(it - labels.begin()), patch_of(t, r, cp)) = t.num(r, cv);
        }
    }
    {
        auto t = read_csv(root / "mobility.csv");
        int co = t.col("origin"), cd = t.col("destination"), cc = t.col("commuters");
        p.commuters = Mat::Zero(G, G);
        for (std::size_t r = 0; r < t.rows.size(); ++r)
            p.commuters(patch_of(t, r, co), patch_of(t, r, cd)) = t.num(r, cc);
    }
    p.contacts.home = read_age_matrix(root / "contacts_home.csv");
    p.contacts.school = read_age_matrix(root / "contacts_school.csv");
    p.contacts.leisure_public = read_age_matrix(root / "contacts_leisure_public.csv");
    p.contacts.leisure_private = read_age_matrix(root / "contacts_leisure_private.csv");
    {
        auto t = read_csv(root / "contacts_work.csv");
        int cs = t.col("sector"), ci = t.col("age_i"), cj = t.col("age_j"), cr = t.col("rate");
        const auto& labels = age_bin_labels();
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            const std::string& code = t.str(r, cs);
            auto it = std::find_if(p.contacts.work_source.begin(), p.contacts.work_source.end(),
                                   [&](const auto& e) { return e.first == code; });
            if (it == p.contacts.work_source.end()) {
                p.contacts.work_source.emplace_back(code, Mat::Zero(kAgeGroups, kAgeGroups));
                it = std::prev(p.contacts.work_source.end());
            }
            auto ai = std::find(labels.begin(), labels.end(), t.str(r, ci));
            auto aj = std::find(labels.begin(), labels.end(), t.str(r, cj));
            if (ai == labels.end() || aj == labels.end())
                throw DataError(t.path, t.line(r), "age-bin", "unknown age bin");
            it->second(int(ai - labels.begin()), int(aj - labels.begin())) = t.num(r, cr);
        }
    }
    {
        auto t = read_csv(root / "sectors.csv");
        int K = int(t.rows.size());
        auto& s = p.sectors;
        for (Vec* v : {&s.f_workplace, &s.f_telework, &s.lav_c, &s.lav_d, &s.fp, &s.inventory_days,
                       &s.employee_share})
            v->resize(K);
        int cc = t.col("code");
        const std::vector<std::pair<std::string, Vec*>> cols{
            {"f_workplace", &s.f_workplace}, {"f_telework", &s.f_telework}, {"lav_c", &s.lav_c},
            {"lav_d", &s.lav_d},             {"fp", &s.fp},                 {"inventory_days", &s.inventory_days},
            {"employee_share", &s.employee_share}};
        for (int k = 0; k < K; ++k) {
            s.codes.push_back(t.str(std::size_t(k), cc));
            for (const auto& [name, v] : cols) (*v)(k) = t.num(std::size_t(k), t.col(name));
        }
    }
    const int K = p.sectors.size();
    std::unordered_map<std::string, int> kidx;
    for (int k = 0; k < K; ++k) kidx[p.sectors.codes[std::size_t(k)]] = k;
    auto sector_of = [&](const CsvTable& t, std::size_t r, int c) {
        auto it = kidx.find(t.str(r, c));
        if (it == kidx.end())
            throw DataError(t.path, t.line(r), "known-sector", fmt::format("unknown sector '{}'", t.str(r, c)));
        return it->second;
    };
    {
        auto t = read_csv(root / "criticality.csv");
        int cs = t.col("sector"), ci = t.col("input_sector"), cl = t.col("level");
        p.sectors.criticality = Mat::Zero(K, K);
        for (std::size_t r = 0; r < t.rows.size(); ++r)
            p.sectors.criticality(sector_of(t, r, ci), sector_of(t, r, cs)) = t.num(r, cl);
    }
    {
        auto t = read_csv(root / "lmc.csv");
        int cp = t.col("patch"), cs = t.col("sector"), cv = t.col("share");
        p.sectors.lmc = Mat::Zero(G, K);
        for (std::size_t r = 0; r < t.rows.size(); ++r)
            p.sectors.lmc(patch_of(t, r, cp), sector_of(t, r, cs)) = t.num(r, cv);
    }
    {
        auto t = read_csv(root / "io_z.csv");
        if (int(t.header.size()) != K + 1)
            throw DataError(t.path, 1, "dimension", fmt::format("expected {} sector columns", K));
        p.Z = Mat::Zero(K, K);
        std::vector<int> colmap;
        for (int c = 1; c <= K; ++c) {
            auto it = kidx.find(t.header[std::size_t(c)]);
            if (it == kidx.end()) throw DataError(t.path, 1, "known-sector", t.header[std::size_t(c)]);
            colmap.push_back(it->second);
        }
        if (int(t.rows.size()) != K)
            throw DataError(t.path, -1, "dimension", fmt::format("expected {} rows", K));
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            int k = sector_of(t, r, 0);
            for (int c = 1; c <= K; ++c) p.Z(k, colmap[std::size_t(c - 1)]) = t.num(r, c);
        }
    }
    {
        auto t = read_csv(root / "io_vectors.csv");
        int cs = t.col("sector");
        p.x0 = p.c0 = p.f0 = p.l0 = Vec::Constant(K, std::nan(""));
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            int k = sector_of(t, r, cs);
            p.x0(k) = t.num(r, t.col("x0"));
            p.c0(k) = t.num(r, t.col("c0"));
            p.f0(k) = t.num(r, t.col("f0"));
            p.l0(k) = t.num(r, t.col("l0"));
        }
    }
    if (fs::exists(root / "exogenous_split.csv")) {
        auto t = read_csv(root / "exogenous_split.csv");
        Mat m = Mat::Constant(K, ExogenousSplit::kComponents, std::nan(""));
        int cs = t.col("sector");
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
            int k = sector_of(t, r, cs);
            for (int c = 0; c < ExogenousSplit::kComponents; ++c)
                m(k, c) = t.num(r, t.col(ExogenousSplit::names()[std::size_t(c)]));
        }
        p.exogenous_shares = m;
    }
    return p;
}

CountryDataset load_country_dataset(const fs::path& root) {
    auto ds = build_dataset(read_dataset_parts(root));
    ds.root = root;
    return ds;
}

DatasetPtr load_shared_dataset(const fs::path& root) {
    return std::make_shared<const CountryDataset>(load_country_dataset(root));
}

void write_country_dataset(const CountryDataset& ds, const fs::path& root) {
    fs::create_directories(root);
    const int G = ds.patches(), K = ds.sector_count();
    const auto& labels = age_bin_labels();
    const auto& ids = ds.geo.patch_ids;
    const auto& codes = ds.sectors.codes;
    {
        CsvWriter w(root / "demography.csv");
        w.header({"patch", "age_bin", "population"});
        for (int g = 0; g < G; ++g)
            for (int i = 0; i < kAgeGroups; ++i) {
                w.field(ids[std::size_t(g)]).field(labels[std::size_t(i)]).field(ds.geo.population(i, g));
                w.end_row();
            }
    }
    {
        CsvWriter w(root / "active_population.csv");
        w.header({"patch", "name", "area_km2", "active_population"});
        for (int g = 0; g < G; ++g) {
            w.field(ids[std::size_t(g)]).field(ds.geo.names[std::size_t(g)]).field(ds.geo.area(g))
                .field(ds.geo.active_population(g));
            w.end_row();
        }
    }
    {
        CsvWriter w(root / "mobility.csv");
        w.header({"origin", "destination", "commuters"});
        for (int g = 0; g < G; ++g)
            for (int h = 0; h < G; ++h) {
                w.field(ids[std::size_t(g)]).field(ids[std::size_t(h)]).field(ds.mobility.raw(g, h));
                w.end_row();
            }
    }
    write_age_matrix(ds.contacts.home, root / "contacts_home.csv");
    write_age_matrix(ds.contacts.school, root / "contacts_school.csv");
    write_age_matrix(ds.contacts.leisure_public, root / "contacts_leisure_public.csv");
    write_age_matrix(ds.contacts.leisure_private, root / "contacts_leisure_private.csv");
    {
        CsvWriter w(root / "contacts_work.csv");
        w.header({"sector", "age_i", "age_j", "rate"});
        for (const auto& [code, m] : ds.contacts.work_source)
            for (int i = 0; i < kAgeGroups; ++i)
                for (int j = 0; j < kAgeGroups; ++j) {
                    w.field(code).field(labels[std::size_t(i)]).field(labels[std::size_t(j)]).field(m(i, j));
                    w.end_row();
                }
    }
    {
        const auto& s = ds.sectors;
        CsvWriter w(root / "sectors.csv");
        w.header({"code", "f_workplace", "f_telework", "lav_c", "lav_d", "fp", "inventory_days",
                  "employee_share"});
        for (int k = 0; k < K; ++k) {
            w.field(codes[std::size_t(k)]).field(s.f_workplace(k)).field(s.f_telework(k)).field(s.lav_c(k))
                .field(s.lav_d(k)).field(s.fp(k)).field(s.inventory_days(k)).field(s.employee_share(k));
            w.end_row();
        }
    }
    {
        CsvWriter w(root / "criticality.csv");
        w.header({"sector", "input_sector", "level"});
        for (int k = 0; k < K; ++k)
            for (int l = 0; l < K; ++l)
                if (ds.sectors.criticality(l, k) != 0.0) {
                    w.field(codes[std::size_t(k)]).field(codes[std::size_t(l)]).field(ds.sectors.criticality(l, k));
                    w.end_row();
                }
    }
    {
        CsvWriter w(root / "lmc.csv");
        w.header({"patch", "sector", "share"});
        for (int g = 0; g < G; ++g)
            for (int k = 0; k < K; ++k) {
                w.field(ids[std::size_t(g)]).field(codes[std::size_t(k)]).field(ds.sectors.lmc(g, k));
                w.end_row();
            }
    }
    {
        CsvWriter w(root / "io_z.csv");
        std::vector<std::string> h{"sector"};
        h.insert(h.end(), codes.begin(), codes.end());
        w.header(h);
        for (int k = 0; k < K; ++k) {
            w.field(codes[std::size_t(k)]);
            for (int l = 0; l < K; ++l) w.field(ds.io.Z(k, l));
            w.end_row();
        }
    }
    {
        CsvWriter w(root / "io_vectors.csv");
        w.header({"sector", "x0", "c0", "f0", "l0"});
        for (int k = 0; k < K; ++k) {
            w.field(codes[std::size_t(k)]).field(ds.io.x0(k)).field(ds.io.c0(k)).field(ds.io.f0(k)).field(ds.io.l0(k));
            w.end_row();
        }
    }
    if (ds.exogenous.from_file) {
        CsvWriter w(root / "exogenous_split.csv");
        std::vector<std::string> h{"sector"};
        for (const auto& n : ExogenousSplit::names()) h.push_back(n);
        w.header(h);
        for (int k = 0; k < K; ++k) {
            w.field(codes[std::size_t(k)]);
            for (int c = 0; c < ExogenousSplit::kComponents; ++c) w.field(ds.exogenous.shares(k, c));
            w.end_row();
        }
    }
}

CountryDataset aggregate_patches(const CountryDataset& ds, const std::vector<std::vector<int>>& groups,
                                 const std::vector<std::string>& new_ids) {
    if (groups.size() != new_ids.size()) throw Error("aggregate_patches: ids and groups differ in length");
    const int G2 = int(groups.size());
    const int K = ds.sector_count();
    std::vector<int> owner(std::size_t(ds.patches()), -1);
    for (int a = 0; a < G2; ++a)
        for (int g : groups[std::size_t(a)]) {
            if (g < 0 || g >= ds.patches() || owner[std::size_t(g)] >= 0)
                throw Error("aggregate_patches: groups must partition the patches");
            owner[std::size_t(g)] = a;
        }
    for (int o : owner)
        if (o < 0) throw Error("aggregate_patches: groups must partition the patches");

    DatasetParts p;
    p.code = ds.code;
    p.geo.patch_ids = new_ids;
    p.geo.population = Mat::Zero(kAgeGroups, G2);
    p.geo.active_population = Vec::Zero(G2);
    p.geo.area = Vec::Zero(G2);
    p.commuters = Mat::Zero(G2, G2);
    p.sectors = ds.sectors;
    p.sectors.lmc = Mat::Zero(G2, K);
    for (int a = 0; a < G2; ++a) {
        std::string name;
        for (int g : groups[std::size_t(a)]) {
            name += (name.empty() ? "" : "+") + ds.geo.names[std::size_t(g)];
            p.geo.population.col(a) += ds.geo.population.col(g);
            p.geo.active_population(a) += ds.geo.active_population(g);
            p.geo.area(a) += ds.geo.area(g);
            p.sectors.lmc.row(a) += ds.geo.active_population(g) * ds.sectors.lmc.row(g);
        }
        p.sectors.lmc.row(a) /= p.sectors.lmc.row(a).sum();
        p.geo.names.push_back(name);
    }
    for (int g = 0; g < ds.patches(); ++g)
        for (int h = 0; h < ds.patches(); ++h)
            p.commuters(owner[std::size_t(g)], owner[std::size_t(h)]) += ds.mobility.raw(g, h);
    p.contacts = ds.contacts;
    p.Z = ds.io.Z;
    p.x0 = ds.io.x0;
    p.c0 = ds.io.c0;
    p.f0 = ds.io.f0;
    p.l0 = ds.io.l0;
    if (ds.exogenous.from_file) p.exogenous_shares = ds.exogenous.shares;
    auto out = build_dataset(std::move(p));
    out.root = ds.root;
    return out;
}

} // namespace epinomic
