#pragma once
// Change-point timing against recorded interventions: inferred dates from
// the largest log-R step near each intervention, offsets and their summary
// statistics, and the Poisson fluctuation check.

#include "epideconv/date.hpp"
#include "epideconv/epi_model.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace epideconv {

enum class NpiKind { implement, lift };

std::string to_string(NpiKind kind);
std::optional<NpiKind> parse_npi_kind(std::string_view text);

struct NpiRecord {
    std::string location;
    Date date{};
    std::string label;
    NpiKind kind = NpiKind::implement;
};

/// Records of the same location and kind whose dates are at most `max_gap`
/// days apart (chained) collapse into one at the middle date, rounded down
/// on half days. Messages describing each merge are appended to `log`.
std::vector<NpiRecord> merge_consecutive(std::vector<NpiRecord> npis, long max_gap = 3,
                                         std::vector<std::string>* log = nullptr);

inline constexpr std::size_t kNpiWindow = 9;
inline constexpr double kChangeThreshold = 1e-3;

struct NpiDetection {
    bool detected = false;
    /// 0-based day index the largest transition is attributed to (the later day).
    std::size_t inferred_index = 0;
    long offset = 0;
    double magnitude = 0.0;
    /// The window reached past either end of the series.
    bool truncated = false;
};

/// Largest |ln R_{t+1} - ln R_t| among transitions attributed (to day t+1)
/// inside the odd-width window centered on `npi_index` (0-based). Ties go to
/// the transition closest to the NPI, then to the earlier one. Not detected
/// when every candidate is below `threshold`.
NpiDetection infer_npi_date(const ReproductionSeries& r, long npi_index, std::size_t window = kNpiWindow,
                            double threshold = kChangeThreshold);

struct OffsetStats {
    double mean = 0.0;
    double sd = 0.0;  // population
    double fraction_within_one = 0.0;
    std::size_t count = 0;
};

/// Throws NoData on an empty list.
OffsetStats offset_stats(std::span<const long> offsets);

/// Mean of (n_t - lambda_t)^2 / (lambda_t + guard).
double fluctuation_statistic(std::span<const std::int64_t> counts, std::span<const double> lambda,
                             double guard = kLogGuard);

struct OffsetHistogram {
    long min_offset = -4;
    std::vector<std::size_t> counts;  // counts[i] for offset min_offset + i
    std::size_t detected = 0;

    std::size_t at(long offset) const;
};

/// Integer-day histogram over [-(window-1)/2, (window-1)/2].
OffsetHistogram offset_histogram(std::span<const long> offsets, std::size_t window = kNpiWindow);

struct NpiOffset {
    NpiRecord npi;
    bool detected = false;
    bool truncated = false;
    bool in_range = true;
    Date inferred{};
    long offset = 0;
    double magnitude = 0.0;
};

/// Inferred R series of one location, anchored at its first calendar date.
struct LocationSeries {
    std::string location;
    Date start_date{};
    ReproductionSeries reproduction;
};

struct OffsetReport {
    std::vector<NpiOffset> rows;
    std::map<std::string, OffsetStats> per_location;
    std::optional<OffsetStats> overall;
    OffsetHistogram histogram;
    std::size_t not_detected = 0;
    std::size_t out_of_range = 0;

    std::vector<long> detected_offsets() const;
};

OffsetReport evaluate_offsets(std::span<const LocationSeries> series, std::span<const NpiRecord> npis,
                              std::size_t window = kNpiWindow, double threshold = kChangeThreshold);

std::string offset_report_to_json(const OffsetReport& report);
/// "offset_day,count".
std::string histogram_to_csv(const OffsetHistogram& histogram);

}  // namespace epideconv
