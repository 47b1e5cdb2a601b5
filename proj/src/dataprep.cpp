#include "riskalign/dataprep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "riskalign/csv.hpp"
#include "riskalign/error.hpp"
#include "riskalign/random.hpp"

namespace riskalign {

std::vector<std::string> record_columns() {
    std::vector<std::string> cols{"company_id", "statement_year", "out_of_business",
                                  "country_code", "incorporation_year"};
    for (const auto& [name, _] : kNumericFields) cols.emplace_back(name);
    return cols;
}

namespace {

std::optional<bool> parse_flag(const std::string& cell, std::string_view context) {
    if (cell.empty()) return std::nullopt;
    if (cell == "1" || cell == "true" || cell == "yes" || cell == "Yes") return true;
    if (cell == "0" || cell == "false" || cell == "no" || cell == "No") return false;
    throw Error("invalid boolean '" + cell + "' in " + std::string(context));
}

std::string opt_cell(const std::optional<double>& v) {
    return v ? csv::format_double(*v) : std::string{};
}

}  // namespace

std::vector<CompanyRecord> read_records(std::istream& in) {
    const auto table = csv::parse(in);
    const int c_id = table.require_column("company_id");
    const int c_year = table.require_column("statement_year");
    const int c_oob = table.column("out_of_business");
    const int c_country = table.column("country_code");
    const int c_inc = table.column("incorporation_year");
    std::vector<int> c_num;
    for (const auto& [name, _] : kNumericFields) c_num.push_back(table.column(name));

    std::vector<CompanyRecord> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string ctx = "record row " + std::to_string(r + 1);
        CompanyRecord rec;
        rec.company_id = row[c_id];
        if (rec.company_id.empty()) throw Error(ctx + ": empty company_id");
        if (row[c_year].empty()) throw Error(ctx + ": missing statement_year");
        rec.statement_year = static_cast<int>(csv::parse_int(row[c_year], ctx));
        if (c_oob >= 0) rec.out_of_business = parse_flag(row[c_oob], ctx);
        if (c_country >= 0 && !row[c_country].empty()) rec.country_code = row[c_country];
        if (c_inc >= 0 && !row[c_inc].empty())
            rec.incorporation_year = static_cast<int>(csv::parse_int(row[c_inc], ctx));
        for (std::size_t f = 0; f < kNumericFields.size(); ++f) {
            if (c_num[f] < 0 || row[c_num[f]].empty()) continue;
            rec.*(kNumericFields[f].second) = csv::parse_double(row[c_num[f]], ctx);
        }
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<CompanyRecord> read_records(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return read_records(in);
}

void write_records(std::ostream& out, std::span<const CompanyRecord> records) {
    csv::write_row(out, record_columns());
    std::vector<std::string> cells;
    for (const auto& rec : records) {
        cells.clear();
        cells.push_back(rec.company_id);
        cells.push_back(std::to_string(rec.statement_year));
        cells.push_back(rec.out_of_business ? (*rec.out_of_business ? "1" : "0") : "");
        cells.push_back(rec.country_code.value_or(""));
        cells.push_back(rec.incorporation_year ? std::to_string(*rec.incorporation_year) : "");
        for (const auto& [_, field] : kNumericFields) cells.push_back(opt_cell(rec.*field));
        csv::write_row(out, cells);
    }
}

void write_records(const std::filesystem::path& path, std::span<const CompanyRecord> records) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    write_records(out, records);
}

std::vector<LabeledRecord> label_records(std::span<const CompanyRecord> records) {
    // (company, year) -> record index
    std::unordered_map<std::string, std::unordered_map<int, std::size_t>> by_company;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& rec = records[i];
        auto [it, inserted] = by_company[rec.company_id].emplace(rec.statement_year, i);
        if (!inserted)
            throw Error("duplicate statement for company '" + rec.company_id + "' year " +
                        std::to_string(rec.statement_year));
    }

    std::vector<LabeledRecord> out;
    for (const auto& rec : records) {
        if (!rec.out_of_business || *rec.out_of_business) continue;
        const auto& years = by_company.at(rec.company_id);
        const auto next = years.find(rec.statement_year + 1);
        if (next == years.end()) continue;
        const auto& following = records[next->second];
        if (!following.out_of_business) continue;
        out.push_back({rec, *following.out_of_business ? 1 : 0});
    }
    return out;
}

std::vector<std::string> default_countries() { return {"FR", "GB", "BE", "ES", "NL", "PT"}; }

std::string_view to_string(RejectReason reason) {
    switch (reason) {
        case RejectReason::missing_field: return "missing_field";
        case RejectReason::zero_denominator: return "zero_denominator";
        case RejectReason::non_finite: return "non_finite";
        case RejectReason::unknown_country: return "unknown_country";
        case RejectReason::invalid_years: return "invalid_years";
    }
    return "unknown";
}

RatioResult compute_ratios(const LabeledRecord& labeled, std::span<const std::string> countries) {
    const auto& rec = labeled.record;

    struct Input {
        std::string_view name;
        const std::optional<double>* value;
    };
    const std::array<Input, 11> inputs{{
        {"net_worth", &rec.net_worth},
        {"total_assets", &rec.total_assets},
        {"financial_debt", &rec.financial_debt},
        {"gross_income", &rec.gross_income},
        {"total_current_assets", &rec.total_current_assets},
        {"total_current_liabilities", &rec.total_current_liabilities},
        {"cash_liquid_assets", &rec.cash_liquid_assets},
        {"sales", &rec.sales},
        {"working_capital", &rec.working_capital},
        {"net_income", &rec.net_income},
        {"previous_sales", &rec.previous_sales},
    }};
    for (const auto& in : inputs) {
        if (!in.value->has_value()) return Rejection{RejectReason::missing_field, std::string(in.name)};
        if (!std::isfinite(**in.value)) return Rejection{RejectReason::non_finite, std::string(in.name)};
    }
    if (!rec.incorporation_year) return Rejection{RejectReason::missing_field, "incorporation_year"};
    if (!rec.country_code) return Rejection{RejectReason::missing_field, "country_code"};

    for (const auto& [name, value] : {std::pair{"total_assets", *rec.total_assets},
                                      std::pair{"gross_income", *rec.gross_income},
                                      std::pair{"total_current_liabilities", *rec.total_current_liabilities},
                                      std::pair{"sales", *rec.sales}}) {
        if (value == 0.0) return Rejection{RejectReason::zero_denominator, name};
    }
    if (rec.statement_year < *rec.incorporation_year)
        return Rejection{RejectReason::invalid_years, "incorporation_year"};

    const auto country = std::find(countries.begin(), countries.end(), *rec.country_code);
    if (country == countries.end()) return Rejection{RejectReason::unknown_country, *rec.country_code};

    FeatureVector fv;
    fv.company_id = rec.company_id;
    fv.statement_year = rec.statement_year;
    fv.label = labeled.label;
    fv.ratios = {
        *rec.net_worth / *rec.total_assets,
        *rec.financial_debt / *rec.gross_income,
        *rec.total_current_assets / *rec.total_current_liabilities,
        *rec.cash_liquid_assets / *rec.sales,
        *rec.working_capital / *rec.sales,
        *rec.net_income,
        *rec.gross_income / *rec.total_assets,
        static_cast<double>(rec.statement_year - *rec.incorporation_year),
        *rec.sales - *rec.previous_sales,
    };
    for (std::size_t i = 0; i < fv.ratios.size(); ++i)
        if (!std::isfinite(fv.ratios[i])) return Rejection{RejectReason::non_finite, std::string(kRatioNames[i])};
    fv.country_onehot.assign(countries.size(), 0.0);
    fv.country_onehot[static_cast<std::size_t>(country - countries.begin())] = 1.0;
    return fv;
}

std::size_t Dataset::positives() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.feature_names = feature_names;
    out.x = x.select_rows(indices);
    out.labels.reserve(indices.size());
    out.company_ids.reserve(indices.size());
    out.years.reserve(indices.size());
    for (auto i : indices) {
        out.labels.push_back(labels[i]);
        out.company_ids.push_back(company_ids[i]);
        out.years.push_back(years[i]);
    }
    return out;
}

void Dataset::append(const Dataset& other) {
    if (feature_names.empty() && size() == 0) {
        *this = other;
        return;
    }
    if (other.feature_names != feature_names) throw Error("cannot append datasets with different columns");
    for (std::size_t r = 0; r < other.size(); ++r) x.append_row(other.x.row(r));
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
    company_ids.insert(company_ids.end(), other.company_ids.begin(), other.company_ids.end());
    years.insert(years.end(), other.years.begin(), other.years.end());
}

std::vector<std::string> feature_names(std::span<const std::string> countries) {
    std::vector<std::string> names(kRatioNames.begin(), kRatioNames.end());
    for (const auto& c : countries) names.push_back(std::string(kCountryPrefix) + c);
    return names;
}

Dataset to_dataset(std::span<const FeatureVector> rows, std::span<const std::string> countries) {
    Dataset out;
    out.feature_names = feature_names(countries);
    const std::size_t width = out.feature_names.size();
    std::vector<double> values;
    values.reserve(rows.size() * width);
    for (const auto& fv : rows) {
        if (fv.country_onehot.size() != countries.size())
            throw Error("one-hot width does not match the country list");
        values.insert(values.end(), fv.ratios.begin(), fv.ratios.end());
        values.insert(values.end(), fv.country_onehot.begin(), fv.country_onehot.end());
        out.labels.push_back(fv.label);
        out.company_ids.push_back(fv.company_id);
        out.years.push_back(fv.statement_year);
    }
    out.x = Matrix(rows.size(), width, std::move(values));
    return out;
}

void write_dataset(std::ostream& out, const Dataset& data) {
    std::vector<std::string> header{"company_id", "statement_year"};
    header.insert(header.end(), data.feature_names.begin(), data.feature_names.end());
    header.emplace_back("label");
    csv::write_row(out, header);
    std::vector<std::string> cells;
    for (std::size_t r = 0; r < data.size(); ++r) {
        cells.clear();
        cells.push_back(data.company_ids[r]);
        cells.push_back(std::to_string(data.years[r]));
        for (double v : data.x.row(r)) cells.push_back(csv::format_double(v));
        cells.push_back(std::to_string(data.labels[r]));
        csv::write_row(out, cells);
    }
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    write_dataset(out, data);
}

Dataset read_dataset(std::istream& in) {
    const auto table = csv::parse(in);
    if (table.header.size() < 3 || table.header.front() != "company_id" ||
        table.header[1] != "statement_year" || table.header.back() != "label")
        throw Error("feature CSV must have columns company_id,statement_year,...,label");
    Dataset out;
    out.feature_names.assign(table.header.begin() + 2, table.header.end() - 1);
    const std::size_t width = out.feature_names.size();
    std::vector<double> values;
    values.reserve(table.rows.size() * width);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::string ctx = "feature row " + std::to_string(r + 1);
        out.company_ids.push_back(row[0]);
        out.years.push_back(static_cast<int>(csv::parse_int(row[1], ctx)));
        for (std::size_t c = 0; c < width; ++c) values.push_back(csv::parse_double(row[c + 2], ctx));
        const auto label = csv::parse_int(row.back(), ctx);
        if (label != 0 && label != 1) throw Error(ctx + ": label must be 0 or 1");
        out.labels.push_back(static_cast<int>(label));
    }
    out.x = Matrix(table.rows.size(), width, std::move(values));
    return out;
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return read_dataset(in);
}

void SplitSpec::validate() const {
    if (train_years.first > train_years.last || validation_years.first > validation_years.last)
        throw Error("split year range is inverted");
    if (train_years.last >= validation_years.first && validation_years.last >= train_years.first)
        throw Error("train and validation year ranges overlap");
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw Error("test_fraction must lie strictly between 0 and 1");
}

SplitIndices split(std::span<const int> years, const SplitSpec& spec) {
    spec.validate();
    SplitIndices out;
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < years.size(); ++i) {
        if (spec.train_years.contains(years[i]))
            pool.push_back(i);
        else if (spec.validation_years.contains(years[i]))
            out.validation.push_back(i);
        else
            ++out.out_of_range;
    }
    Rng rng(derive_seed(spec.seed, "split"));
    rng.shuffle(pool.begin(), pool.end());
    const auto n_test = static_cast<std::size_t>(
        std::llround(static_cast<double>(pool.size()) * spec.test_fraction));
    out.test.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.assign(pool.begin() + static_cast<std::ptrdiff_t>(n_test), pool.end());
    if (out.train.empty()) throw Error("split produced an empty train set");
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

ScalerParams fit_scaler(const Dataset& data) {
    if (data.size() == 0) throw Error("cannot fit a scaler on an empty dataset");
    ScalerParams p;
    const double n = static_cast<double>(data.size());
    for (std::size_t c = 0; c < data.feature_names.size(); ++c) {
        const auto& name = data.feature_names[c];
        if (std::find(kRatioNames.begin(), kRatioNames.end(), name) == kRatioNames.end()) continue;
        double sum = 0.0;
        for (std::size_t r = 0; r < data.size(); ++r) sum += data.x(r, c);
        const double mean = sum / n;
        double ss = 0.0;
        for (std::size_t r = 0; r < data.size(); ++r) {
            const double d = data.x(r, c) - mean;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / n);
        const bool constant = !(sd > 0.0) || !std::isfinite(sd);
        p.columns.push_back(name);
        p.mean.push_back(mean);
        p.std.push_back(constant ? 1.0 : sd);
        p.constant.push_back(constant);
    }
    return p;
}

Dataset apply_scaler(const ScalerParams& params, Dataset data) {
    for (std::size_t k = 0; k < params.columns.size(); ++k) {
        const auto it = std::find(data.feature_names.begin(), data.feature_names.end(), params.columns[k]);
        if (it == data.feature_names.end())
            throw Error("scaler column '" + params.columns[k] + "' not present in rows");
        const auto c = static_cast<std::size_t>(it - data.feature_names.begin());
        for (std::size_t r = 0; r < data.size(); ++r)
            data.x(r, c) = (data.x(r, c) - params.mean[k]) / params.std[k];
    }
    for (const auto& name : data.feature_names) {
        const bool continuous = std::find(kRatioNames.begin(), kRatioNames.end(), name) != kRatioNames.end();
        if (continuous && std::find(params.columns.begin(), params.columns.end(), name) == params.columns.end())
            throw Error("rows carry continuous column '" + name + "' unknown to the scaler");
    }
    return data;
}

void to_json(nlohmann::json& j, const ScalerParams& p) {
    j = nlohmann::json{{"columns", p.columns}, {"mean", p.mean}, {"std", p.std}, {"constant", p.constant}};
}

void from_json(const nlohmann::json& j, ScalerParams& p) {
    j.at("columns").get_to(p.columns);
    j.at("mean").get_to(p.mean);
    j.at("std").get_to(p.std);
    j.at("constant").get_to(p.constant);
    if (p.mean.size() != p.columns.size() || p.std.size() != p.columns.size() ||
        p.constant.size() != p.columns.size())
        throw Error("scaler parameters have inconsistent lengths");
}

nlohmann::json PreparedData::sidecar() const {
    auto membership = [](const Dataset& d) {
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t i = 0; i < d.size(); ++i) rows.push_back({d.company_ids[i], d.years[i]});
        return rows;
    };
    return {
        {"scaler", scaler},
        {"countries", countries},
        {"counts",
         {{"input_records", input_records},
          {"labeled_rows", labeled_rows},
          {"out_of_range", out_of_range},
          {"train", train.size()},
          {"test", test.size()},
          {"validation", validation.size()}}},
        {"rejections", rejections},
        {"split", {{"train", membership(train)}, {"test", membership(test)}, {"validation", membership(validation)}}},
    };
}

PreparedData prepare(std::span<const CompanyRecord> records, const PrepareConfig& config) {
    PreparedData out;
    out.countries = config.countries;
    out.input_records = records.size();

    const auto labeled = label_records(records);
    out.labeled_rows = labeled.size();

    std::vector<FeatureVector> rows;
    rows.reserve(labeled.size());
    for (const auto& lr : labeled) {
        auto result = compute_ratios(lr, config.countries);
        if (auto* fv = std::get_if<FeatureVector>(&result))
            rows.push_back(std::move(*fv));
        else
            ++out.rejections[std::string(to_string(std::get<Rejection>(result).reason))];
    }
    const Dataset all = to_dataset(rows, config.countries);
    const auto parts = split(all.years, config.split);
    out.out_of_range = parts.out_of_range;

    const Dataset train = all.subset(parts.train);
    out.scaler = fit_scaler(train);
    out.train = apply_scaler(out.scaler, train);
    out.test = apply_scaler(out.scaler, all.subset(parts.test));
    out.validation = apply_scaler(out.scaler, all.subset(parts.validation));
    return out;
}

}  // namespace riskalign
