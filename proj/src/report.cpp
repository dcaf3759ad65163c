#include "epinomic/report.hpp"
#include "epinomic/csv.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

namespace epinomic {

using std::chrono::days;

void Table::write(const std::filesystem::path& file) const {
    CsvWriter w(file);
    w.header(header);
    for (const auto& r : rows) {
        for (const auto& c : r) w.field(c);
        w.end_row();
    }
}

std::string slug(const std::string& name) {
    std::string s = name;
    for (char& c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
    return s;
}

namespace {

template <class T>
bool keep(const std::optional<T>& want, const T& value) {
    return !want || *want == value;
}

const std::vector<std::string>& policies() {
    static const std::vector<std::string> p{"P1", "P2", "P3", "P4a", "P4b"};
    return p;
}

const std::vector<Date>& scenario1_dates() {
    static const std::vector<Date> d{make_date(2020, 3, 3),  make_date(2020, 3, 6),  make_date(2020, 3, 9),
                                     make_date(2020, 3, 12), make_date(2020, 3, 15), make_date(2020, 3, 18)};
    return d;
}

int scenario2_day(const SimulationRecord& rec) {
    // The run spans start … start + 365 + day.
    return rec.days() - 365;
}

} // namespace

std::vector<GridRun> build_grid(const std::string& scenario, const std::vector<CountryInput>& countries,
                                const GridFilter& f) {
    if (countries.empty()) throw Error("build_grid: no dataset given");
    std::vector<GridRun> runs;
    if (scenario == "scenario1") {
        const CountryInput& c = countries.front();
        if (f.policy && std::find(policies().begin(), policies().end(), *f.policy) == policies().end())
            throw Error(fmt::format("unknown policy '{}'", *f.policy));
        for (const auto& p : policies())
            for (Date d : scenario1_dates()) {
                if (!keep(f.policy, p) || !keep(f.date, d)) continue;
                ScenarioVariant v;
                v.policy = p;
                v.date = d;
                runs.push_back({&c, scenario_library("scenario1", v, *c.ds, c.cfg),
                                {{"country", c.ds->code}, {"policy", p}, {"date", format_date(d)}}});
            }
        if (runs.empty()) throw Error("scenario1: the filter matches no grid entry");
        return runs;
    }
    if (scenario == "scenario2") {
        for (const auto& c : countries) {
            int day = f.intervention_day ? *f.intervention_day : scenario2_intervention_day(*c.ds, c.cfg);
            for (int m = 2; m <= 5; ++m) {
                if (!keep(f.release_months, m)) continue;
                ScenarioVariant v;
                v.release_months = m;
                v.intervention_day = day;
                runs.push_back({&c, scenario_library("scenario2", v, *c.ds, c.cfg),
                                {{"country", c.ds->code}, {"release_months", std::to_string(m)}}});
            }
        }
        if (f.release_months && (*f.release_months < 2 || *f.release_months > 5))
            throw Error("scenario2: release_months must be 2, 3, 4 or 5");
        return runs;
    }
    if (scenario == "scenario3") {
        std::vector<double> nus{7.0, 28.0, 62.0};
        if (f.nu) nus = {*f.nu};
        for (const auto& c : countries)
            for (double nu : nus) {
                ScenarioVariant v;
                v.nu = nu;
                runs.push_back({&c, scenario_library("scenario3", v, *c.ds, c.cfg),
                                {{"country", c.ds->code}, {"nu", format_number(nu)}}});
            }
        return runs;
    }
    if (scenario == "scenario4") {
        for (const auto& c : countries) {
            const auto& geo = c.ds->geo;
            for (int g = 0; g < geo.size(); ++g) {
                const std::string& id = geo.patch_ids[std::size_t(g)];
                if (id == c.cfg.capital) continue;
                if (f.second_seed && geo.index_of(*f.second_seed) != g) continue;
                ScenarioVariant v;
                v.second_seed = id;
                double density = geo.population.col(g).sum() / geo.area(g);
                runs.push_back({&c, scenario_library("scenario4", v, *c.ds, c.cfg),
                                {{"country", c.ds->code},
                                 {"second_seed", id},
                                 {"name", geo.names[std::size_t(g)]},
                                 {"density", format_number(std::round(density * 10.0) / 10.0)}}});
            }
        }
        if (runs.empty()) throw Error("scenario4: the filter matches no patch");
        return runs;
    }
    throw Error(fmt::format("unknown scenario '{}' (expected scenario1 … scenario4)", scenario));
}

std::vector<SimulationRecord> run_grid(const std::vector<GridRun>& runs, int workers,
                                       const std::map<std::string, double>& overrides) {
    std::vector<SimulationRecord> out(runs.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex m;
    auto work = [&] {
        for (std::size_t i = next++; i < runs.size(); i = next++) {
            try {
                ScenarioSpec s = runs[i].spec;
                for (const auto& [k, v] : overrides) s.overrides[k] = v;
                out[i] = run(s, *runs[i].country->ds, runs[i].country->cfg);
            } catch (...) {
                std::lock_guard lock(m);
                if (!err) err = std::current_exception();
            }
        }
    };
    const int n = std::max(1, std::min<int>(workers, int(runs.size())));
    if (n == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n; ++i) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (err) std::rethrow_exception(err);
    return out;
}

Table summarize(const std::string& scenario, const std::vector<GridRun>& runs,
                const std::vector<SimulationRecord>& recs) {
    if (runs.size() != recs.size()) throw Error("summarize: runs and records differ in length");
    Table t;
    auto num = [](double v) { return format_number(v); };
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& r = recs[i];
        std::vector<std::string> row;
        if (t.header.empty())
            for (const auto& [k, v] : runs[i].labels) t.header.push_back(k);
        for (const auto& [k, v] : runs[i].labels) row.push_back(v);
        std::vector<std::pair<std::string, double>> vals;
        if (scenario == "scenario1") {
            Date a = make_date(2020, 4, 1), b = make_date(2020, 6, 30);
            vals = {{"output_q2_pct", output_change_pct(r, a, b)},
                    {"labor_q2_pct", labor_change_pct(r, a, b)},
                    {"cumulative_ic_q2", cumulative_ic_patients(r, a, b)}};
        } else if (scenario == "scenario2") {
            Date a = r.dates.front() + days{scenario2_day(r)}, b = r.dates.back();
            row.push_back(format_date(a));
            vals = {{"output_pct", output_change_pct(r, a, b)},
                    {"labor_pct", labor_change_pct(r, a, b)},
                    {"cumulative_ic", cumulative_ic_patients(r, a, b)}};
        } else if (scenario == "scenario3") {
            Vec load = national_ic_load(r);
            const Eigen::Index tail = std::min<Eigen::Index>(180, load.size());
            double late = load.tail(tail).mean();
            vals = {{"local_maxima", double(count_local_maxima(load))},
                    {"peak_ic_load", load.maxCoeff()},
                    {"late_mean_ic_load", late},
                    {"late_fraction_of_beds", late / r.ic_beds},
                    {"output_pct", output_change_pct(r, r.dates.front(), r.dates.back())},
                    {"labor_pct", labor_change_pct(r, r.dates.front(), r.dates.back())}};
        } else if (scenario == "scenario4") {
            Vec labor = 100.0 * (r.l.rowwise().sum().array() / r.l0.sum() - 1.0);
            vals = {{"peak_ic_load", peak_ic_load(r)},
                    {"peak_ic_load_per_100k", 1e5 * peak_ic_load(r) / r.population},
                    {"max_labor_reduction_pct", labor.minCoeff()},
                    {"labor_pct", labor_change_pct(r, r.dates.front(), r.dates.back())}};
        } else {
            throw Error(fmt::format("unknown scenario '{}'", scenario));
        }
        if (i == 0) {
            if (scenario == "scenario2") t.header.push_back("intervention_date");
            for (const auto& [k, v] : vals) t.header.push_back(k);
        }
        for (const auto& [k, v] : vals) row.push_back(num(v));
        t.rows.push_back(std::move(row));
    }
    return t;
}

Table sweep_series(const std::string& parameter, const std::vector<double>& values,
                   const std::vector<SimulationRecord>& recs) {
    if (values.size() != recs.size()) throw Error("sweep_series: values and records differ in length");
    Table t;
    t.header = {parameter, "date", "variable", "value"};
    for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto& r = recs[i];
        Vec load = national_ic_load(r);
        const double x0 = r.x0.sum(), l0 = r.l0.sum();
        for (int d = 0; d < r.days(); ++d) {
            std::string v = format_number(values[i]), date = format_date(r.dates[std::size_t(d)]);
            t.rows.push_back({v, date, "ic_load", format_number(load(d))});
            t.rows.push_back({v, date, "output_pct", format_number(100.0 * r.x.row(d).sum() / x0)});
            t.rows.push_back({v, date, "labor_pct", format_number(100.0 * r.l.row(d).sum() / l0)});
        }
    }
    return t;
}

} // namespace epinomic
