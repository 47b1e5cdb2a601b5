#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace riskalign {

// Rating scale, least to most risky. X (excluded for missing data) is never
// produced by the mapper and is not part of this enum.
enum class Grade { A = 0, B, C, D, E, F };

inline constexpr std::size_t kGradeCount = 6;
inline constexpr std::array<Grade, kGradeCount> kGrades{Grade::A, Grade::B, Grade::C,
                                                        Grade::D, Grade::E, Grade::F};

constexpr std::size_t index(Grade g) noexcept { return static_cast<std::size_t>(g); }
char to_char(Grade g) noexcept;
Grade parse_grade(std::string_view text);

/// Probability-to-grade mapping.
///
/// bounds[g] and bounds[g + 1] delimit grade g; bounds[0] == 0 and
/// bounds[6] == 1. A probability lying exactly on a shared bound belongs to
/// the less risky grade. When built by calibrate(), `mean` holds the
/// per-grade mean probabilities and `count` the number of companies in each.
struct GradeCalibration {
    std::optional<std::array<double, kGradeCount>> mean;
    std::array<std::size_t, kGradeCount> count{};
    std::array<double, kGradeCount + 1> bounds{};

    friend bool operator==(const GradeCalibration&, const GradeCalibration&) = default;
};

// Mean model probability per reference grade, with midpoint decision bounds.
GradeCalibration calibrate(std::span<const Grade> reference, std::span<const double> probabilities);

// Build a calibration from published interval bounds (7 increasing values from 0 to 1).
GradeCalibration fixed_intervals(std::span<const double> bounds);
GradeCalibration load_fixed_intervals(const std::filesystem::path& path);

// Interval lookup over the calibration bounds.
Grade assign_grade(double probability, const GradeCalibration& calibration);
// argmin_R |p - mean(R)|, ties to the less risky grade. Requires calibration means.
Grade assign_grade_nearest_mean(double probability, std::span<const double, kGradeCount> means);

struct GradeConfusion {
    // counts[reference][mapped]
    std::array<std::array<std::size_t, kGradeCount>, kGradeCount> counts{};
    std::size_t total = 0;
    double riskier_fraction = 0.0;
    double safer_fraction = 0.0;
    double equal_fraction = 0.0;
    std::size_t critical_underestimation = 0;  // reference E/F mapped to A/B
};

GradeConfusion grade_confusion(std::span<const Grade> reference, std::span<const Grade> mapped);

struct ReferenceGrade {
    std::string company_id;
    std::optional<int> statement_year;
    Grade grade = Grade::A;
};

// CSV columns: company_id[,statement_year],grade
std::vector<ReferenceGrade> read_reference_grades(const std::filesystem::path& path);
std::vector<ReferenceGrade> read_reference_grades(std::istream& in);
void write_reference_grades(std::ostream& out, std::span<const ReferenceGrade> grades);

void to_json(nlohmann::json& j, const GradeCalibration& c);
void to_json(nlohmann::json& j, const GradeConfusion& c);

}  // namespace riskalign
