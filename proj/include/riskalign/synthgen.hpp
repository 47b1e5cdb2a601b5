#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskalign/dataprep.hpp"
#include "riskalign/grading.hpp"

namespace riskalign {

struct GeneratorConfig {
    std::size_t n_companies = 20000;
    YearRange year_range{2004, 2018};
    double imbalance_ratio = 114.75;        // non-defaulted per defaulted
    std::map<std::string, double> missing_rates;  // raw field -> probability
    double signal_strength = 1.0;
    std::uint64_t seed = 0;
    // Relative weight of each year as a company's first statement year; empty = uniform.
    std::vector<double> entry_year_weights;
    std::vector<std::string> countries = default_countries();
    std::vector<double> country_weights{0.35, 0.20, 0.12, 0.15, 0.10, 0.08};

    void validate() const;
    double target_default_rate() const { return 1.0 / (1.0 + imbalance_ratio); }
};

void from_json(const nlohmann::json& j, GeneratorConfig& c);
void to_json(nlohmann::json& j, const GeneratorConfig& c);

struct GeneratedPanel {
    std::vector<CompanyRecord> records;
    // Probability that the company is out of business the year after each record.
    std::vector<double> true_pd;
    double intercept = 0.0;
};

/// Simulate a company panel.
///
/// Every company gets consecutive yearly statements whose log-scale
/// financials follow an AR(1) health factor. The next-year default flag is a
/// logistic draw on the current year's ratios scaled by signal_strength; the
/// intercept is found by bisection on a pilot sample so the expected default
/// rate matches 1 / (1 + imbalance_ratio). Throws Error when the rate is not
/// reachable. Output is a pure function of the config.
GeneratedPanel generate_panel(const GeneratorConfig& config);
std::vector<CompanyRecord> generate(const GeneratorConfig& config);

struct YearDefaultRate {
    int year = 0;
    std::size_t companies = 0;
    std::size_t defaults = 0;
    double rate = 0.0;
};

std::vector<YearDefaultRate> default_rate_report(std::span<const LabeledRecord> labeled);

// Stand-in for an external scorecard: noisy true-risk quantile buckets per record.
std::vector<ReferenceGrade> synthesize_reference_grades(const GeneratedPanel& panel, std::uint64_t seed);

}  // namespace riskalign
