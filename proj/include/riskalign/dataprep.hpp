#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "riskalign/matrix.hpp"

namespace riskalign {

// One raw yearly financial statement. Any field besides the identity may be missing.
struct CompanyRecord {
    std::string company_id;
    int statement_year = 0;
    std::optional<bool> out_of_business;
    std::optional<std::string> country_code;
    std::optional<double> total_employees;
    std::optional<double> net_worth;
    std::optional<double> total_assets;
    std::optional<double> gross_income;
    std::optional<double> total_liabilities;
    std::optional<double> current_ratio;
    std::optional<double> cash_liquid_assets;
    std::optional<double> sales;
    std::optional<double> working_capital;
    std::optional<double> net_income;
    std::optional<int> incorporation_year;
    std::optional<double> previous_sales;
    std::optional<double> financial_debt;
    std::optional<double> total_current_assets;
    std::optional<double> total_current_liabilities;

    friend bool operator==(const CompanyRecord&, const CompanyRecord&) = default;
};

using NumericField = std::optional<double> CompanyRecord::*;

// Currency/count columns of CompanyRecord, in CSV order.
inline constexpr std::array<std::pair<std::string_view, NumericField>, 14> kNumericFields{{
    {"total_employees", &CompanyRecord::total_employees},
    {"net_worth", &CompanyRecord::net_worth},
    {"total_assets", &CompanyRecord::total_assets},
    {"gross_income", &CompanyRecord::gross_income},
    {"total_liabilities", &CompanyRecord::total_liabilities},
    {"current_ratio", &CompanyRecord::current_ratio},
    {"cash_liquid_assets", &CompanyRecord::cash_liquid_assets},
    {"sales", &CompanyRecord::sales},
    {"working_capital", &CompanyRecord::working_capital},
    {"net_income", &CompanyRecord::net_income},
    {"previous_sales", &CompanyRecord::previous_sales},
    {"financial_debt", &CompanyRecord::financial_debt},
    {"total_current_assets", &CompanyRecord::total_current_assets},
    {"total_current_liabilities", &CompanyRecord::total_current_liabilities},
}};

// Full raw CSV header, in the order written by write_records.
std::vector<std::string> record_columns();

std::vector<CompanyRecord> read_records(const std::filesystem::path& path);
std::vector<CompanyRecord> read_records(std::istream& in);
void write_records(std::ostream& out, std::span<const CompanyRecord> records);
void write_records(const std::filesystem::path& path, std::span<const CompanyRecord> records);

struct LabeledRecord {
    CompanyRecord record;
    int label = 0;  // 1 = out of business in the following year
};

/// Attach one-year-ahead default labels.
///
/// A statement for year t of a company that is still in business yields a
/// labeled row when the same company has a statement for t + 1; the label is
/// that statement's out-of-business flag. Other statements are dropped.
/// Output follows the input order of the year-t statements.
/// Throws Error on a duplicate (company_id, statement_year).
std::vector<LabeledRecord> label_records(std::span<const CompanyRecord> records);

// Names of the continuous model inputs, in matrix column order.
inline constexpr std::array<std::string_view, 9> kRatioNames{
    "r1_solvency",      "r2_solvency",      "r1_liquidity",
    "r2_liquidity",     "r1_profitability", "r2_profitability",
    "r3_profitability", "time_in_business", "sales_evolution"};

inline constexpr std::string_view kCountryPrefix = "country_";
inline constexpr std::string_view kCountryPlayer = "country_code";

std::vector<std::string> default_countries();

struct FeatureVector {
    std::string company_id;
    int statement_year = 0;
    std::array<double, kRatioNames.size()> ratios{};
    std::vector<double> country_onehot;
    int label = 0;

    double r1_solvency() const { return ratios[0]; }
    double time_in_business() const { return ratios[7]; }
    double sales_evolution() const { return ratios[8]; }
};

enum class RejectReason {
    missing_field,
    zero_denominator,
    non_finite,
    unknown_country,
    invalid_years,
};

std::string_view to_string(RejectReason reason);

struct Rejection {
    RejectReason reason;
    std::string detail;  // offending field or value
};

using RatioResult = std::variant<FeatureVector, Rejection>;

RatioResult compute_ratios(const LabeledRecord& labeled, std::span<const std::string> countries);

// Feature matrix with labels and row provenance.
struct Dataset {
    std::vector<std::string> feature_names;
    Matrix x;
    std::vector<int> labels;
    std::vector<std::string> company_ids;
    std::vector<int> years;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t positives() const;
    Dataset subset(std::span<const std::size_t> indices) const;
    void append(const Dataset& other);
};

std::vector<std::string> feature_names(std::span<const std::string> countries);
Dataset to_dataset(std::span<const FeatureVector> rows, std::span<const std::string> countries);

// CSV layout: company_id,statement_year,<features...>,label
void write_dataset(std::ostream& out, const Dataset& data);
void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);

struct YearRange {
    int first = 0;
    int last = 0;
    bool contains(int year) const noexcept { return year >= first && year <= last; }
};

struct SplitSpec {
    YearRange train_years{2004, 2012};
    YearRange validation_years{2013, 2018};
    double test_fraction = 0.3;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
    std::vector<std::size_t> validation;
    std::size_t out_of_range = 0;
};

// Partition rows by statement year; train-range rows are shuffled with the
// spec seed and cut into train/test. Indices within each part are sorted.
SplitIndices split(std::span<const int> years, const SplitSpec& spec);

struct ScalerParams {
    std::vector<std::string> columns;
    std::vector<double> mean;
    std::vector<double> std;  // 1.0 for constant columns
    std::vector<bool> constant;

    friend bool operator==(const ScalerParams&, const ScalerParams&) = default;
};

// Population-std standardisation fitted on the continuous columns present in data.
ScalerParams fit_scaler(const Dataset& data);
// Throws Error when a scaler column is absent from data.
Dataset apply_scaler(const ScalerParams& params, Dataset data);

void to_json(nlohmann::json& j, const ScalerParams& p);
void from_json(const nlohmann::json& j, ScalerParams& p);

struct PrepareConfig {
    SplitSpec split;
    std::vector<std::string> countries = default_countries();
};

struct PreparedData {
    Dataset train;
    Dataset test;
    Dataset validation;
    ScalerParams scaler;
    std::vector<std::string> countries;
    std::size_t input_records = 0;
    std::size_t labeled_rows = 0;
    std::size_t out_of_range = 0;
    std::map<std::string, std::size_t> rejections;  // reason code -> count

    nlohmann::json sidecar() const;
};

// label -> ratios -> split -> scale (fit on train only).
PreparedData prepare(std::span<const CompanyRecord> records, const PrepareConfig& config);

}  // namespace riskalign
