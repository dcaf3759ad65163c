#include "fixtures.hpp"

#include "epinomic/csv.hpp"
#include "epinomic/datahub.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace epinomic;
using namespace epinomic::testing;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

const CountryDataset& be() {
    static const CountryDataset ds = load_country_dataset(packaged("BE"));
    return ds;
}

const CountryDataset& swe() {
    static const CountryDataset ds = load_country_dataset(packaged("SWE"));
    return ds;
}

} // namespace

TEST(Datahub, PackagedBelgiumShape) {
    EXPECT_EQ(be().patches(), 11);
    EXPECT_EQ(be().sector_count(), 63);
    // 11 431 thousand inhabitants in the national total.
    EXPECT_NEAR(be().geo.population.sum() / 1e3, 11431.0, 11431.0 * 0.005);
    EXPECT_EQ(swe().patches(), 21);
    EXPECT_EQ(swe().sector_count(), 63);
}

TEST(Datahub, MissingIoTableNamesFile) {
    auto dir = scratch_dir("missing_io");
    write_country_dataset(synthetic_dataset(), dir);
    fs::remove(dir / "io_z.csv");
    try {
        load_country_dataset(dir);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("io_z.csv"), std::string::npos) << e.what();
    }
}

TEST(Datahub, SyntheticFixtureAccepted) {
    auto parts = synthetic_parts(2, 3);
    EXPECT_TRUE(validate_parts(parts).empty());
    auto ds = build_dataset(parts);
    EXPECT_EQ(ds.patches(), 2);
    EXPECT_EQ(ds.sector_count(), 3);
}

TEST(Datahub, ValidationReportsRowAndInvariant) {
    auto parts = synthetic_parts(2, 3);
    parts.x0(1) *= 1.5;
    auto errs = validate_parts(parts);
    ASSERT_FALSE(errs.empty());
    EXPECT_EQ(errs.front().file(), "io_vectors.csv");
    EXPECT_EQ(errs.front().row(), 3);
    EXPECT_EQ(errs.front().invariant(), "accounting-identity");

    parts = synthetic_parts(2, 3);
    parts.sectors.criticality(0, 1) = 0.3;
    errs = validate_parts(parts);
    ASSERT_EQ(errs.size(), 1u);
    EXPECT_EQ(errs.front().invariant(), "criticality-level");

    parts = synthetic_parts(2, 3);
    parts.sectors.lmc(1, 0) += 0.1;
    errs = validate_parts(parts);
    ASSERT_EQ(errs.size(), 1u);
    EXPECT_EQ(errs.front().invariant(), "lmc-sum-1");

    parts = synthetic_parts(2, 3);
    parts.sectors.f_telework(2) = 1.0 - parts.sectors.f_workplace(2) + 0.01;
    errs = validate_parts(parts);
    ASSERT_EQ(errs.size(), 1u);
    EXPECT_EQ(errs.front().invariant(), "workplace-plus-telework-le-1");

    parts = synthetic_parts(2, 3);
    parts.geo.population(4, 1) = 0.0;
    errs = validate_parts(parts);
    ASSERT_FALSE(errs.empty());
    EXPECT_EQ(errs.front().invariant(), "positive-population");
}

TEST(Datahub, NormalizeMobility) {
    Mat P(2, 2);
    P << 80, 10, 5, 40;
    Vec T(2);
    T << 100, 50;
    Mat expect(2, 2);
    expect << 0.8, 0.1, 0.1, 0.8;
    EXPECT_TRUE(normalize_mobility(P, T).isApprox(expect, 1e-15));
    EXPECT_TRUE(normalize_mobility(Mat::Zero(2, 2), T).isZero(0.0));
    T(1) = 0.0;
    EXPECT_THROW(normalize_mobility(P, T), Error);
}

TEST(Datahub, BelgianOutboundCommuting) {
    const Mat& Pn = be().mobility.normalized;
    const Vec& active = be().geo.active_population;
    double out = 0.0;
    for (int g = 0; g < be().patches(); ++g) out += (Pn.row(g).sum() - Pn(g, g)) * active(g);
    EXPECT_NEAR(out / active.sum(), 0.162, 0.002);
}

TEST(Datahub, MobilityRowsMatchEmployedFraction) {
    const std::vector<std::pair<std::string, double>> employed{
        {"Antwerpen", 68.1}, {"Brabant Wallon", 64.8}, {"Brussels", 57.5},       {"Hainaut", 64.6},
        {"Liège", 64.9},     {"Limburg", 66.4},        {"Luxembourg", 63.6},     {"Namur", 65.5},
        {"Oost-Vlaanderen", 70.4}, {"Vlaams-Brabant", 69.4}, {"West-Vlaanderen", 69.7}};
    for (const auto& [name, pct] : employed) {
        int g = be().geo.index_of(name);
        ASSERT_GE(g, 0) << name;
        EXPECT_NEAR(100.0 * be().mobility.normalized.row(g).sum(), pct, 1.0) << name;
    }
    for (const auto* ds : {&be(), &swe()})
        for (int g = 0; g < ds->patches(); ++g) {
            EXPECT_LE(ds->mobility.normalized.row(g).sum(), 1.0);
            EXPECT_GE(ds->mobility.normalized.row(g).minCoeff(), 0.0);
        }
}

TEST(Datahub, TechnicalCoefficients) {
    Mat Z(2, 2);
    Z << 0, 10, 20, 0;
    Vec x0(2);
    x0 << 100, 50;
    Mat expect(2, 2);
    expect << 0, 0.2, 0.2, 0;
    EXPECT_TRUE(technical_coefficients(Z, x0).isApprox(expect, 1e-15));
    EXPECT_TRUE(technical_coefficients(Mat::Zero(2, 2), x0).isZero(0.0));
    x0(0) = 0.0;
    EXPECT_THROW(technical_coefficients(Z, x0), Error);
}

TEST(Datahub, SwedishColumnSumsBelowOne) {
    const auto& io = swe().io;
    EXPECT_LT(io.A.colwise().sum().maxCoeff(), 1.0);
    for (int l = 0; l < swe().sector_count(); ++l)
        for (int k = 0; k < swe().sector_count(); ++k) EXPECT_DOUBLE_EQ(io.A(k, l), io.Z(k, l) / io.x0(l));
}

TEST(Datahub, Willingness) {
    Vec ones = Vec::Ones(3);
    Vec share = Vec::Constant(3, 1.0 / 3.0);
    Vec w = willingness(Vec::Constant(3, 0.4), Vec::Constant(3, 0.5), share);
    EXPECT_TRUE(w.isApprox(ones, 1e-15));

    Vec fp(2), tel(2), sh(2);
    fp << 0.2, 0.4;
    tel << 1.0, 1.0;
    sh << 0.5, 0.5;
    Vec w2 = willingness(fp, tel, sh);
    EXPECT_NEAR(w2(0), 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(w2(1), 4.0 / 3.0, 1e-12);

    EXPECT_THROW(willingness(Vec::Zero(2), tel, sh), Error);

}

TEST(Datahub, BelgianEducationWillingness) {
    // Inputs are packaged at the printed precision (FP ±0.005, telework ±0.0005, share ±0.0005),
    // so the reference value is only reproducible within the propagated rounding bound.
    const auto& s = be().sectors;
    int p85 = s.index_of("P85");
    double denom = 0.0, ddenom = 0.0;
    for (int k = 0; k < s.size(); ++k) {
        double fp = s.fp(k), tel = s.f_telework(k), sh = s.employee_share(k);
        denom += fp * tel * sh;
        ddenom += sh * (0.005 * tel + 0.0005 * fp) + 0.0005 * fp * tel;
    }
    double w = s.willingness(p85);
    double bound = w * (0.005 / s.fp(p85) + 0.0005 / s.f_telework(p85) + ddenom / denom);
    EXPECT_NEAR(w, 2.57, bound);
    // Rounding FP = 0.66 alone moves W by 0.76 %.
    EXPECT_NEAR(w, 2.57, 0.01 * 2.57);
}

TEST(Datahub, WillingnessIsShareWeightedUnitMean) {
    for (const auto* ds : {&be(), &swe()})
        EXPECT_NEAR(ds->sectors.employee_share.dot(ds->sectors.willingness), 1.0, 1e-12);
    auto ds = synthetic_dataset(3, 5, 11);
    EXPECT_NEAR(ds.sectors.employee_share.dot(ds.sectors.willingness), 1.0, 1e-12);
}

TEST(Datahub, AccountingClosure) {
    for (const auto* ds : {&be(), &swe()}) {
        const auto& io = ds->io;
        for (int k = 0; k < ds->sector_count(); ++k) {
            double gap = io.x0(k) - io.Z.row(k).sum() - io.c0(k) - io.f0(k);
            EXPECT_LE(std::abs(gap) / io.x0(k), 0.01) << ds->code << " " << ds->sectors.codes[std::size_t(k)];
        }
    }
}

TEST(Datahub, DerivedQuantities) {
    auto ds = synthetic_dataset(2, 4);
    for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l)
            EXPECT_DOUBLE_EQ(ds.io.S0(k, l), ds.sectors.inventory_days(l) * ds.io.Z(k, l));
    for (int g = 0; g < 2; ++g) EXPECT_NEAR(ds.sectors.lmc.row(g).sum(), 1.0, 1e-12);
}

TEST(Datahub, WorkContactsBroadcastFromLetter) {
    auto parts = synthetic_parts(1, 3);
    parts.sectors.codes = {"R90-92", "R93", "S94"};
    Mat r = parts.contacts.work_source[0].second;
    Mat s94 = parts.contacts.work_source[2].second;
    parts.contacts.work_source = {{"R", r}, {"S94", s94}};
    auto ds = build_dataset(parts);
    EXPECT_TRUE(ds.contacts.work[0].isApprox(r));
    EXPECT_TRUE(ds.contacts.work[1].isApprox(r));
    EXPECT_TRUE(ds.contacts.work[2].isApprox(s94));

    parts.contacts.work_source = {{"R", r}};
    auto errs = validate_parts(parts);
    ASSERT_EQ(errs.size(), 1u);
    EXPECT_EQ(errs.front().invariant(), "sector-coverage");
}

TEST(Datahub, RoundTripIsByteIdentical) {
    for (const std::string code : {"BE", "SWE"}) {
        auto ds = load_country_dataset(packaged(code));
        auto dir = scratch_dir("roundtrip_" + code);
        write_country_dataset(ds, dir);
        for (const auto& f : dataset_csv_files()) {
            if (!fs::exists(packaged(code) / f)) continue;
            EXPECT_EQ(slurp(packaged(code) / f), slurp(dir / f)) << code << "/" << f;
        }
        auto again = load_country_dataset(dir);
        auto dir2 = scratch_dir("roundtrip2_" + code);
        write_country_dataset(again, dir2);
        for (const auto& f : dataset_csv_files())
            if (fs::exists(dir / f)) EXPECT_EQ(slurp(dir / f), slurp(dir2 / f)) << f;
    }
}

TEST(Datahub, NegativeExogenousDemandAccepted) {
    auto parts = synthetic_parts(1, 3);
    // Move some final demand into consumption so f0 turns negative for one sector.
    parts.c0(0) += parts.f0(0) + 5.0;
    parts.f0(0) = -5.0;
    EXPECT_TRUE(validate_parts(parts).empty());
}

TEST(Datahub, AggregatePatchesKeepsTotals) {
    auto ds = synthetic_dataset(3, 3);
    auto agg = aggregate_patches(ds, {{0}, {1, 2}}, {"A", "B"});
    EXPECT_EQ(agg.patches(), 2);
    EXPECT_NEAR(agg.geo.population.sum(), ds.geo.population.sum(), 1e-6);
    EXPECT_NEAR(agg.mobility.raw.sum(), ds.mobility.raw.sum(), 1e-6);
    for (int g = 0; g < 2; ++g) EXPECT_NEAR(agg.sectors.lmc.row(g).sum(), 1.0, 1e-12);
}
