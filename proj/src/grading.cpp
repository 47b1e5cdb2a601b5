#include "riskalign/grading.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "riskalign/csv.hpp"
#include "riskalign/error.hpp"

namespace riskalign {

char to_char(Grade g) noexcept { return static_cast<char>('A' + static_cast<int>(g)); }

Grade parse_grade(std::string_view text) {
    if (text.size() == 1 && text[0] >= 'A' && text[0] <= 'F') return static_cast<Grade>(text[0] - 'A');
    throw Error("invalid grade '" + std::string(text) + "' (expected A-F)");
}

GradeCalibration calibrate(std::span<const Grade> reference, std::span<const double> probabilities) {
    if (reference.size() != probabilities.size())
        throw Error("reference grades and probabilities differ in length");
    std::array<double, kGradeCount> sum{};
    GradeCalibration cal;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double p = probabilities[i];
        if (!(p >= 0.0 && p <= 1.0)) throw Error("probability outside [0,1]");
        sum[index(reference[i])] += p;
        ++cal.count[index(reference[i])];
    }
    std::string absent;
    for (auto g : kGrades)
        if (cal.count[index(g)] == 0) absent += std::string(absent.empty() ? "" : ",") + to_char(g);
    if (!absent.empty()) throw Error("calibration needs every grade A-F; absent: " + absent);

    std::array<double, kGradeCount> mean{};
    for (std::size_t g = 0; g < kGradeCount; ++g) mean[g] = sum[g] / static_cast<double>(cal.count[g]);
    for (std::size_t g = 1; g < kGradeCount; ++g)
        if (!(mean[g] > mean[g - 1]))
            throw Error(std::string("grade means are not strictly increasing at ") + to_char(kGrades[g - 1]) +
                        "->" + to_char(kGrades[g]));
    cal.mean = mean;
    cal.bounds.front() = 0.0;
    cal.bounds.back() = 1.0;
    for (std::size_t g = 1; g < kGradeCount; ++g) cal.bounds[g] = 0.5 * (mean[g - 1] + mean[g]);
    return cal;
}

GradeCalibration fixed_intervals(std::span<const double> bounds) {
    if (bounds.size() != kGradeCount + 1) throw Error("fixed intervals need exactly 7 bounds");
    if (bounds.front() != 0.0 || bounds.back() != 1.0) throw Error("fixed intervals must start at 0 and end at 1");
    GradeCalibration cal;
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        if (i > 0 && !(bounds[i] > bounds[i - 1])) throw Error("fixed interval bounds must increase");
        cal.bounds[i] = bounds[i];
    }
    return cal;
}

GradeCalibration load_fixed_intervals(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    const auto j = nlohmann::json::parse(in);
    return fixed_intervals(j.at("bounds").get<std::vector<double>>());
}

Grade assign_grade(double probability, const GradeCalibration& calibration) {
    if (!(probability >= 0.0 && probability <= 1.0)) throw Error("probability outside [0,1]");
    for (std::size_t g = 0; g + 1 < kGradeCount; ++g)
        if (probability <= calibration.bounds[g + 1]) return kGrades[g];
    return Grade::F;
}

Grade assign_grade_nearest_mean(double probability, std::span<const double, kGradeCount> means) {
    if (!(probability >= 0.0 && probability <= 1.0)) throw Error("probability outside [0,1]");
    std::size_t best = 0;
    double best_distance = std::abs(probability - means[0]);
    for (std::size_t g = 1; g < kGradeCount; ++g) {
        const double d = std::abs(probability - means[g]);
        if (d < best_distance) {
            best = g;
            best_distance = d;
        }
    }
    return kGrades[best];
}

GradeConfusion grade_confusion(std::span<const Grade> reference, std::span<const Grade> mapped) {
    if (reference.size() != mapped.size()) throw Error("reference and mapped grade streams differ in length");
    GradeConfusion out;
    out.total = reference.size();
    std::size_t riskier = 0;
    std::size_t safer = 0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const auto r = index(reference[i]);
        const auto m = index(mapped[i]);
        ++out.counts[r][m];
        if (m > r) ++riskier;
        if (m < r) ++safer;
        if (r >= index(Grade::E) && m <= index(Grade::B)) ++out.critical_underestimation;
    }
    if (out.total > 0) {
        const double n = static_cast<double>(out.total);
        out.riskier_fraction = static_cast<double>(riskier) / n;
        out.safer_fraction = static_cast<double>(safer) / n;
        out.equal_fraction = static_cast<double>(out.total - riskier - safer) / n;
    }
    return out;
}

std::vector<ReferenceGrade> read_reference_grades(std::istream& in) {
    const auto table = csv::parse(in);
    const int c_id = table.require_column("company_id");
    const int c_grade = table.require_column("grade");
    const int c_year = table.column("statement_year");
    std::vector<ReferenceGrade> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        ReferenceGrade g;
        g.company_id = row[c_id];
        if (c_year >= 0 && !row[c_year].empty())
            g.statement_year = static_cast<int>(csv::parse_int(row[c_year], "reference grades"));
        g.grade = parse_grade(row[c_grade]);
        out.push_back(std::move(g));
    }
    return out;
}

std::vector<ReferenceGrade> read_reference_grades(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    return read_reference_grades(in);
}

void write_reference_grades(std::ostream& out, std::span<const ReferenceGrade> grades) {
    csv::write_row(out, {"company_id", "statement_year", "grade"});
    for (const auto& g : grades)
        csv::write_row(out, {g.company_id, g.statement_year ? std::to_string(*g.statement_year) : "",
                             std::string(1, to_char(g.grade))});
}

void to_json(nlohmann::json& j, const GradeCalibration& c) {
    j = nlohmann::json::object();
    j["bounds"] = c.bounds;
    nlohmann::json intervals = nlohmann::json::array();
    for (auto g : kGrades)
        intervals.push_back({{"grade", std::string(1, to_char(g))},
                             {"lower", c.bounds[index(g)]},
                             {"upper", c.bounds[index(g) + 1]}});
    j["intervals"] = intervals;
    if (c.mean) {
        j["mean"] = *c.mean;
        j["count"] = c.count;
    }
}

void to_json(nlohmann::json& j, const GradeConfusion& c) {
    j = nlohmann::json{{"grades", {"A", "B", "C", "D", "E", "F"}},
                       {"counts", c.counts},
                       {"total", c.total},
                       {"riskier_fraction", c.riskier_fraction},
                       {"safer_fraction", c.safer_fraction},
                       {"equal_fraction", c.equal_fraction},
                       {"critical_underestimation", c.critical_underestimation}};
}

}  // namespace riskalign
