#include "riskalign/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "riskalign/error.hpp"
#include "riskalign/random.hpp"

namespace riskalign {

namespace {

constexpr double kExitProbability = 0.10;  // yearly chance a company stops filing
constexpr std::size_t kPilotCompanies = 4000;
constexpr double kInterceptLow = -40.0;
constexpr double kInterceptHigh = 20.0;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

struct YearState {
    double total_assets, net_worth, gross_income, total_liabilities, current_ratio;
    double cash_liquid_assets, sales, previous_sales, working_capital, net_income;
    double financial_debt, total_current_assets, total_current_liabilities, total_employees;
    double risk_score;  // linear predictor without intercept, before signal scaling
    double u_default;
    double u_exit;
};

struct CompanyPath {
    int entry_year = 0;
    int incorporation_year = 0;
    std::size_t country = 0;
    std::vector<YearState> years;  // entry_year .. last year of the range
};

std::size_t weighted_pick(Rng& rng, std::span<const double> weights) {
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    double u = rng.uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (u < weights[i]) return i;
        u -= weights[i];
    }
    return weights.size() - 1;
}

CompanyPath simulate_path(const GeneratorConfig& cfg, std::size_t company) {
    Rng rng(derive_seed(cfg.seed, company));
    CompanyPath path;
    const int span = cfg.year_range.last - cfg.year_range.first;  // entry never in the last year
    if (cfg.entry_year_weights.empty()) {
        path.entry_year = cfg.year_range.first + static_cast<int>(rng.below(static_cast<std::uint64_t>(span)));
    } else {
        path.entry_year = cfg.year_range.first + static_cast<int>(weighted_pick(rng, cfg.entry_year_weights));
    }
    path.country = weighted_pick(rng, cfg.country_weights);
    const double age = std::min(80.0, std::floor(std::exp(rng.normal(2.3, 0.8))));
    path.incorporation_year = path.entry_year - static_cast<int>(age);
    const double size_level = rng.normal(14.0, 1.5);
    double health = rng.normal();
    const bool gb = cfg.countries[path.country] == "GB";
    double last_sales = 0.0;

    for (int year = path.entry_year; year <= cfg.year_range.last; ++year) {
        const int k = year - path.entry_year;
        if (k > 0) health = 0.8 * health + 0.6 * rng.normal();
        YearState s{};
        const double log_assets = size_level + 0.05 * k + 0.1 * rng.normal();
        s.total_assets = std::exp(log_assets);
        const double solvency_logit = 0.8 * health + 0.4 * rng.normal();
        s.net_worth = s.total_assets * sigmoid(solvency_logit);
        s.total_liabilities = s.total_assets - s.net_worth;
        const double log_return = -1.6 + 0.35 * health + 0.3 * rng.normal();
        s.gross_income = s.total_assets * std::exp(log_return);
        const double log_debt = 0.3 - 0.4 * health + 0.5 * rng.normal();
        s.financial_debt = s.gross_income * std::exp(log_debt);
        s.total_current_assets = s.total_assets * sigmoid(0.3 * rng.normal());
        const double log_current = 0.25 + 0.3 * health + 0.3 * rng.normal();
        s.total_current_liabilities = s.total_current_assets / std::exp(log_current);
        s.current_ratio = s.total_current_assets / s.total_current_liabilities;
        s.sales = s.total_assets * std::exp(0.1 + 0.2 * health + 0.3 * rng.normal());
        s.previous_sales = k == 0 ? s.sales * std::exp(0.1 * rng.normal()) : last_sales;
        if (k > 0) rng.normal();  // keep the draw count per year fixed
        last_sales = s.sales;
        const double log_cash = -2.3 + 0.3 * health + 0.5 * rng.normal();
        s.cash_liquid_assets = s.sales * std::exp(log_cash);
        s.working_capital = s.total_current_assets - s.total_current_liabilities;
        s.net_income = s.gross_income * (0.15 + 0.25 * health + 0.2 * rng.normal());
        s.total_employees = std::max(1.0, std::round(s.total_assets / 1e5 * std::exp(0.3 * rng.normal())));

        const double years_in_business = year - path.incorporation_year;
        s.risk_score = -1.0 * (log_return + 1.6) / 0.46 - 0.6 * solvency_logit / 0.894 -
                       0.4 * (log_current - 0.25) / 0.42 - 0.3 * (log_cash + 2.3) / 0.58 +
                       0.3 * (log_debt - 0.3) / 0.64 + (years_in_business < 3 ? 0.5 : 0.0) +
                       (gb ? 0.3 : 0.0);
        s.u_default = rng.uniform();
        s.u_exit = rng.uniform();
        path.years.push_back(s);
    }
    return path;
}

// Expected default rate over labeled transitions for a given intercept.
double expected_rate(std::span<const CompanyPath> pilot, double intercept, double signal) {
    double defaults = 0.0;
    double rows = 0.0;
    for (const auto& p : pilot) {
        for (std::size_t k = 0; k + 1 < p.years.size(); ++k) {
            const double pd = sigmoid(intercept + signal * p.years[k].risk_score);
            const double stays = p.years[k].u_exit >= kExitProbability ? 1.0 : 0.0;
            defaults += pd;
            rows += stays + (1.0 - stays) * pd;
            if (stays == 0.0) break;
        }
    }
    return rows > 0.0 ? defaults / rows : 0.0;
}

double calibrate_intercept(const GeneratorConfig& cfg) {
    const std::size_t n_pilot = std::min(cfg.n_companies, kPilotCompanies);
    std::vector<CompanyPath> pilot;
    pilot.reserve(n_pilot);
    for (std::size_t c = 0; c < n_pilot; ++c) pilot.push_back(simulate_path(cfg, c));

    const double target = cfg.target_default_rate();
    const double lo_rate = expected_rate(pilot, kInterceptLow, cfg.signal_strength);
    const double hi_rate = expected_rate(pilot, kInterceptHigh, cfg.signal_strength);
    if (!(target > lo_rate && target < hi_rate))
        throw Error("default rate " + std::to_string(target) + " unreachable at signal_strength " +
                    std::to_string(cfg.signal_strength) + "; achievable range is (" +
                    std::to_string(lo_rate) + ", " + std::to_string(hi_rate) + ")");
    double lo = kInterceptLow;
    double hi = kInterceptHigh;
    for (int it = 0; it < 100 && hi - lo > 1e-10; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (expected_rate(pilot, mid, cfg.signal_strength) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

void apply_missingness(const GeneratorConfig& cfg, std::size_t company, std::vector<CompanyRecord>& records,
                       std::size_t first) {
    if (cfg.missing_rates.empty()) return;
    Rng rng(derive_seed(derive_seed(cfg.seed, "missing"), company));
    auto rate = [&](std::string_view name) {
        const auto it = cfg.missing_rates.find(std::string(name));
        return it == cfg.missing_rates.end() ? 0.0 : it->second;
    };
    const double country_rate = rate("country_code");
    const double inc_rate = rate("incorporation_year");
    for (std::size_t i = first; i < records.size(); ++i) {
        auto& rec = records[i];
        for (const auto& [name, field] : kNumericFields)
            if (rng.uniform() < rate(name)) rec.*field = std::nullopt;
        if (rng.uniform() < country_rate) rec.country_code = std::nullopt;
        if (rng.uniform() < inc_rate) rec.incorporation_year = std::nullopt;
    }
}

CompanyRecord make_record(const GeneratorConfig& cfg, const CompanyPath& path, std::size_t company,
                          std::size_t k, bool out_of_business) {
    const auto& s = path.years[k];
    CompanyRecord r;
    r.company_id = "C" + std::to_string(company);
    r.statement_year = path.entry_year + static_cast<int>(k);
    r.out_of_business = out_of_business;
    r.country_code = cfg.countries[path.country];
    r.incorporation_year = path.incorporation_year;
    r.total_employees = s.total_employees;
    r.net_worth = s.net_worth;
    r.total_assets = s.total_assets;
    r.gross_income = s.gross_income;
    r.total_liabilities = s.total_liabilities;
    r.current_ratio = s.current_ratio;
    r.cash_liquid_assets = s.cash_liquid_assets;
    r.sales = s.sales;
    r.working_capital = s.working_capital;
    r.net_income = s.net_income;
    r.previous_sales = s.previous_sales;
    r.financial_debt = s.financial_debt;
    r.total_current_assets = s.total_current_assets;
    r.total_current_liabilities = s.total_current_liabilities;
    return r;
}

}  // namespace

void GeneratorConfig::validate() const {
    if (n_companies < 1) throw Error("n_companies must be at least 1");
    if (year_range.last <= year_range.first) throw Error("year_range must span at least two years");
    if (!(imbalance_ratio >= 1.0)) throw Error("imbalance_ratio must be at least 1");
    if (!std::isfinite(signal_strength) || signal_strength < 0.0)
        throw Error("signal_strength must be finite and non-negative");
    for (const auto& [field, rate] : missing_rates) {
        if (!(rate >= 0.0 && rate <= 1.0)) throw Error("missing rate for '" + field + "' outside [0,1]");
        const bool known = field == "country_code" || field == "incorporation_year" ||
                           std::any_of(kNumericFields.begin(), kNumericFields.end(),
                                       [&](const auto& f) { return f.first == field; });
        if (!known) throw Error("missing rate given for unknown field '" + field + "'");
    }
    if (countries.empty() || countries.size() != country_weights.size())
        throw Error("country list and country weights must be non-empty and of equal length");
    if (!entry_year_weights.empty() &&
        entry_year_weights.size() != static_cast<std::size_t>(year_range.last - year_range.first))
        throw Error("entry_year_weights needs one weight per year except the last");
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
    c.n_companies = j.value("n_companies", c.n_companies);
    if (j.contains("year_range")) {
        c.year_range.first = j.at("year_range").at(0).get<int>();
        c.year_range.last = j.at("year_range").at(1).get<int>();
    }
    c.imbalance_ratio = j.value("imbalance_ratio", c.imbalance_ratio);
    c.missing_rates = j.value("missing_rates", c.missing_rates);
    c.signal_strength = j.value("signal_strength", c.signal_strength);
    c.seed = j.value("seed", c.seed);
    c.entry_year_weights = j.value("entry_year_weights", c.entry_year_weights);
    c.countries = j.value("countries", c.countries);
    c.country_weights = j.value("country_weights", c.country_weights);
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
    j = nlohmann::json{{"n_companies", c.n_companies},
                       {"year_range", {c.year_range.first, c.year_range.last}},
                       {"imbalance_ratio", c.imbalance_ratio},
                       {"missing_rates", c.missing_rates},
                       {"signal_strength", c.signal_strength},
                       {"seed", c.seed},
                       {"entry_year_weights", c.entry_year_weights},
                       {"countries", c.countries},
                       {"country_weights", c.country_weights}};
}

GeneratedPanel generate_panel(const GeneratorConfig& config) {
    config.validate();
    GeneratedPanel panel;
    panel.intercept = calibrate_intercept(config);

    for (std::size_t c = 0; c < config.n_companies; ++c) {
        const auto path = simulate_path(config, c);
        const std::size_t first = panel.records.size();
        for (std::size_t k = 0; k < path.years.size(); ++k) {
            const auto& s = path.years[k];
            const double pd = sigmoid(panel.intercept + config.signal_strength * s.risk_score);
            panel.records.push_back(make_record(config, path, c, k, false));
            panel.true_pd.push_back(pd);
            if (k + 1 == path.years.size()) break;
            if (s.u_default < pd) {
                panel.records.push_back(make_record(config, path, c, k + 1, true));
                panel.true_pd.push_back(sigmoid(panel.intercept + config.signal_strength *
                                                                      path.years[k + 1].risk_score));
                break;
            }
            if (s.u_exit < kExitProbability) break;
        }
        apply_missingness(config, c, panel.records, first);
    }
    return panel;
}

std::vector<CompanyRecord> generate(const GeneratorConfig& config) { return generate_panel(config).records; }

std::vector<YearDefaultRate> default_rate_report(std::span<const LabeledRecord> labeled) {
    std::map<int, YearDefaultRate> by_year;
    for (const auto& lr : labeled) {
        auto& row = by_year[lr.record.statement_year];
        row.year = lr.record.statement_year;
        ++row.companies;
        row.defaults += static_cast<std::size_t>(lr.label);
    }
    std::vector<YearDefaultRate> out;
    for (auto& [_, row] : by_year) {
        row.rate = static_cast<double>(row.defaults) / static_cast<double>(row.companies);
        out.push_back(row);
    }
    return out;
}

std::vector<ReferenceGrade> synthesize_reference_grades(const GeneratedPanel& panel, std::uint64_t seed) {
    constexpr std::array<double, kGradeCount - 1> kCumulative{0.30, 0.55, 0.75, 0.88, 0.96};
    Rng rng(derive_seed(seed, "reference-grades"));
    const std::size_t n = panel.records.size();
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double pd = std::clamp(panel.true_pd[i], 1e-12, 1.0 - 1e-12);
        score[i] = logit(pd) + rng.normal(0.0, 0.6);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return score[a] < score[b]; });

    std::vector<ReferenceGrade> out(n);
    for (std::size_t rank = 0; rank < n; ++rank) {
        const double q = (static_cast<double>(rank) + 0.5) / static_cast<double>(n);
        std::size_t g = 0;
        while (g < kCumulative.size() && q >= kCumulative[g]) ++g;
        const auto i = order[rank];
        out[i] = {panel.records[i].company_id, panel.records[i].statement_year, kGrades[g]};
    }
    return out;
}

}  // namespace riskalign
