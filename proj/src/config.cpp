#include "epinomic/config.hpp"

#include <fmt/format.h>
#include <toml.hpp>

#include <charconv>

namespace epinomic {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const fs::path& file, const std::string& what) {
    throw Error(fmt::format("{}: {}", file.string(), what));
}

double as_number(const toml::node& n, const fs::path& file, const std::string& key) {
    if (auto v = n.value<double>()) return *v;
    fail(file, fmt::format("'{}' must be a number", key));
}

Date as_date(const toml::node& n, const fs::path& file, const std::string& key) {
    if (auto s = n.value<std::string>()) {
        try {
            return parse_date(*s);
        } catch (const Error& e) {
            fail(file, fmt::format("'{}': {}", key, e.what()));
        }
    }
    if (auto d = n.value<toml::date>()) return make_date(d->year, d->month, d->day);
    fail(file, fmt::format("'{}' must be a date", key));
}

std::optional<double> opt_number(const toml::table& t, const char* key, const fs::path& file) {
    if (auto n = t.get(key)) return as_number(*n, file, key);
    return std::nullopt;
}

std::optional<Date> opt_date(const toml::table& t, const char* key, const fs::path& file) {
    if (auto n = t.get(key)) return as_date(*n, file, key);
    return std::nullopt;
}

const toml::table* opt_table(const toml::table& t, const char* key, const fs::path& file) {
    auto n = t.get(key);
    if (!n) return nullptr;
    if (!n->is_table()) fail(file, fmt::format("'{}' must be a table", key));
    return n->as_table();
}

std::map<std::string, double> number_map(const toml::table& t, const fs::path& file, const std::string& where) {
    std::map<std::string, double> out;
    for (const auto& [k, v] : t) out[std::string(k.str())] = as_number(v, file, where + "." + std::string(k.str()));
    return out;
}

Keyed as_keyed(const toml::node& n, const fs::path& file, const std::string& key) {
    Keyed k;
    if (n.is_table()) {
        for (const auto& [name, v] : *n.as_table()) {
            double x = as_number(v, file, key + "." + std::string(name.str()));
            if (name.str() == "default")
                k.fallback = x;
            else
                k.values[std::string(name.str())] = x;
        }
    } else {
        k.fallback = as_number(n, file, key);
    }
    return k;
}

std::vector<ChangePoint> read_policy(const toml::table& root, const fs::path& file) {
    std::vector<ChangePoint> out;
    auto n = root.get("policy");
    if (!n) return out;
    if (!n->is_array_of_tables()) fail(file, "'policy' must be an array of tables ([[policy]])");
    for (const auto& item : *n->as_array()) {
        const auto& t = *item.as_table();
        ChangePoint cp;
        auto d = opt_date(t, "date", file);
        if (!d) fail(file, "every [[policy]] needs a date");
        cp.date = *d;
        if (auto v = t.get("closure")) cp.closure = as_keyed(*v, file, "closure");
        if (auto v = t.get("telework")) cp.telework = as_keyed(*v, file, "telework");
        if (auto v = t.get("private_ban")) cp.private_ban = as_keyed(*v, file, "private_ban");
        if (auto v = t.get("school_closure")) cp.school_closure = as_keyed(*v, file, "school_closure");
        if (auto v = t.get("exogenous_scale")) {
            auto arr = v->as_array();
            if (!arr || arr->size() != 4) fail(file, "'exogenous_scale' must list 4 numbers");
            for (std::size_t i = 0; i < 4; ++i) cp.exogenous_scale[i] = as_number(*arr->get(i), file, "exogenous_scale");
        }
        for (const auto& [k, v] : t) {
            static const std::vector<std::string> known{"date", "closure", "telework", "private_ban",
                                                        "school_closure", "exogenous_scale"};
            if (std::find(known.begin(), known.end(), std::string(k.str())) == known.end())
                fail(file, fmt::format("unknown [[policy]] key '{}'", k.str()));
        }
        out.push_back(std::move(cp));
    }
    return out;
}

toml::table parse_file(const fs::path& file) {
    if (!fs::exists(file)) throw Error(fmt::format("{}: file not found", file.string()));
    try {
        return toml::parse_file(file.string());
    } catch (const toml::parse_error& e) {
        fail(file, fmt::format("line {}: {}", e.source().begin.line, e.description()));
    }
}

AwarenessMode parse_awareness(const std::string& s, const fs::path& file) {
    if (s == "threshold") return AwarenessMode::threshold;
    if (s == "pre_triggered") return AwarenessMode::pre_triggered;
    if (s == "off") return AwarenessMode::off;
    fail(file, fmt::format("awareness must be threshold, pre_triggered or off (got '{}')", s));
}

} // namespace

CountryConfig load_country_config(const fs::path& file) {
    toml::table root = parse_file(file);
    auto code = root["code"].value<std::string>();
    if (!code) fail(file, "missing 'code'");
    CountryConfig c = CountryConfig::defaults_for(*code);
    if (auto cap = root["capital"].value<std::string>()) c.capital = *cap;

    if (auto t = opt_table(root, "ic", file)) {
        if (auto v = opt_number(*t, "beds", file)) c.ic_beds = *v;
        if (auto v = opt_number(*t, "reference_beds", file)) c.reference_ic_beds = *v;
        if (auto v = opt_number(*t, "reference_population", file)) c.reference_population = *v;
        if (auto v = opt_number(*t, "fraction", file)) c.ic_fraction = *v;
    }
    if (!(c.ic_beds > 0.0 && c.reference_ic_beds > 0.0 && c.reference_population > 0.0))
        fail(file, "[ic] beds and references must be positive");
    if (!(c.ic_fraction > 0.0 && c.ic_fraction <= 1.0)) fail(file, "[ic] fraction must lie in (0, 1]");

    if (auto t = opt_table(root, "epi", file)) {
        if (auto v = opt_number(*t, "beta", file)) c.beta = *v;
        if (auto v = opt_number(*t, "seasonal_amplitude", file)) c.seasonal_amplitude = *v;
        if (auto v = opt_number(*t, "seasonal_shift", file)) c.seasonal_shift = *v;
    }
    if (auto t = opt_table(root, "parameters", file)) c.parameters = number_map(*t, file, "parameters");
    ModelParams probe;
    for (const auto& [k, v] : c.parameters) {
        try {
            probe.set(k, v);
        } catch (const Error& e) {
            fail(file, e.what());
        }
    }

    if (auto t = opt_table(root, "seeds", file)) {
        if (auto d = opt_date(*t, "date", file)) c.seed_date = *d;
        if (auto e = opt_table(*t, "exposed", file)) c.seeds = number_map(*e, file, "seeds.exposed");
    }

    if (auto t = opt_table(root, "exogenous", file)) {
        static const char* names[4] = {"government", "investment", "exports_goods", "exports_services"};
        Date in0 = opt_date(*t, "ramp_in_start", file).value_or(make_date(2020, 3, 1));
        Date in1 = opt_date(*t, "ramp_in_end", file).value_or(make_date(2020, 4, 1));
        Date out0 = opt_date(*t, "ramp_out_start", file).value_or(make_date(2020, 5, 1));
        Date out1 = opt_date(*t, "ramp_out_end", file).value_or(make_date(2020, 9, 1));
        Date svc1 = opt_date(*t, "services_ramp_out_end", file).value_or(out1);
        if (!(in0 <= in1 && in1 <= out0 && out0 <= out1 && out0 <= svc1))
            fail(file, "[exogenous] ramp dates must be ordered");
        for (int i = 0; i < 4; ++i) {
            ShockCourse& s = c.exogenous.components[std::size_t(i)];
            s.magnitude = opt_number(*t, names[i], file).value_or(0.0);
            if (!(s.magnitude >= 0.0 && s.magnitude <= 1.0))
                fail(file, fmt::format("[exogenous] {} must lie in [0, 1]", names[i]));
            s.ramp_in_start = in0;
            s.ramp_in_end = in1;
            s.ramp_out_start = out0;
            s.ramp_out_end = i == 3 ? svc1 : out1;
        }
    }

    if (auto t = opt_table(root, "calendar", file)) {
        if (auto n = t->get("holidays")) {
            auto arr = n->as_array();
            if (!arr) fail(file, "[calendar] holidays must be an array of [start, end] pairs");
            for (const auto& item : *arr) {
                auto pair = item.as_array();
                if (!pair || pair->size() != 2) fail(file, "[calendar] holidays entries must be [start, end]");
                Date a = as_date(*pair->get(0), file, "holidays"), b = as_date(*pair->get(1), file, "holidays");
                if (b < a) fail(file, "[calendar] holiday ends before it starts");
                c.holidays.emplace_back(a, b);
            }
        }
    }
    c.policy = read_policy(root, file);
    for (std::size_t i = 1; i < c.policy.size(); ++i)
        if (!(c.policy[i - 1].date < c.policy[i].date)) fail(file, "[[policy]] dates must be strictly increasing");
    return c;
}

CountryConfig country_config_for(const CountryDataset& ds) {
    fs::path f = ds.root / "country.toml";
    if (!ds.root.empty() && fs::exists(f)) {
        CountryConfig c = load_country_config(f);
        if (c.code != ds.code) fail(f, fmt::format("code '{}' does not match dataset '{}'", c.code, ds.code));
        return c;
    }
    return CountryConfig::defaults_for(ds.code);
}

ScenarioFile load_scenario_file(const fs::path& file) {
    toml::table root = parse_file(file);
    ScenarioFile f;
    ScenarioSpec& s = f.spec;
    if (auto v = root["dataset"].value<std::string>()) {
        fs::path p(*v);
        f.dataset = p.is_absolute() ? p : file.parent_path() / p;
    }
    if (auto v = root["name"].value<std::string>()) s.name = *v;
    if (auto v = root["library"].value<std::string>()) f.library = *v;
    if (auto t = opt_table(root, "variant", file)) {
        ScenarioVariant& var = f.variant;
        if (auto v = (*t)["policy"].value<std::string>()) var.policy = *v;
        var.date = opt_date(*t, "date", file);
        if (auto v = opt_number(*t, "release_months", file)) var.release_months = int(*v);
        var.nu = opt_number(*t, "nu", file);
        if (auto v = (*t)["second_seed"].value<std::string>()) var.second_seed = *v;
        if (auto v = opt_number(*t, "intervention_day", file)) var.intervention_day = int(*v);
    }
    if (auto d = opt_date(root, "start", file)) s.start = *d;
    if (auto d = opt_date(root, "end", file)) s.end = *d;
    if (auto v = root["seasonality"].value<bool>()) s.seasonality = *v;
    if (auto v = root["holidays"].value<bool>()) s.holidays = *v;
    if (auto v = root["exogenous"].value<bool>()) s.exogenous = *v;
    if (auto v = root["awareness"].value<std::string>()) s.awareness = parse_awareness(*v, file);
    s.awareness_date = opt_date(root, "awareness_date", file);
    s.target_R0 = opt_number(root, "target_R0", file);
    if (auto v = opt_number(root, "ramp_days", file)) {
        if (!(*v >= 0.0)) fail(file, "ramp_days must be non-negative");
        s.ramp_days = int(*v);
    }
    if (auto v = root["factual_policy"].value<bool>()) f.factual_policy = *v;
    if (auto t = opt_table(root, "seeds", file)) {
        s.seeds = number_map(*t, file, "seeds");
        f.has_seeds = true;
    }
    if (auto n = root.get("seed_age_weights")) {
        auto arr = n->as_array();
        if (!arr) fail(file, "seed_age_weights must be an array");
        for (const auto& x : *arr) s.seed_age_weights.push_back(as_number(x, file, "seed_age_weights"));
    }
    if (auto t = opt_table(root, "overrides", file)) s.overrides = number_map(*t, file, "overrides");
    s.schedule = read_policy(root, file);
    if (f.library.empty() && (s.start == Date{} || s.end == Date{}))
        fail(file, "explicit scenarios need start and end");
    return f;
}

ScenarioSpec resolve_scenario(const ScenarioFile& f, const CountryDataset& ds, const CountryConfig& cfg) {
    ScenarioSpec s;
    if (!f.library.empty()) {
        s = scenario_library(f.library, f.variant, ds, cfg);
        for (const auto& [k, v] : f.spec.overrides) s.overrides[k] = v;
        if (f.spec.name != "custom") s.name = f.spec.name;
        return s;
    }
    s = f.spec;
    s.country = ds.code;
    if (!f.has_seeds) s.seeds = cfg.seeds;
    if (f.factual_policy) {
        std::vector<ChangePoint> merged = cfg.policy;
        merged.insert(merged.end(), s.schedule.begin(), s.schedule.end());
        std::stable_sort(merged.begin(), merged.end(),
                         [](const ChangePoint& a, const ChangePoint& b) { return a.date < b.date; });
        s.schedule = std::move(merged);
    }
    return s;
}

std::pair<std::string, double> parse_assignment(const std::string& text) {
    auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw Error(fmt::format("expected name=value, got '{}'", text));
    std::string name = text.substr(0, eq), value = text.substr(eq + 1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw Error(fmt::format("'{}' is not a number in '{}'", value, text));
    return {name, v};
}

} // namespace epinomic
