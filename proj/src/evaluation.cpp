#include "epideconv/evaluation.hpp"

#include "epideconv/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace epideconv {

std::string to_string(NpiKind kind) {
    return kind == NpiKind::implement ? "implement" : "lift";
}

std::optional<NpiKind> parse_npi_kind(std::string_view text) {
    if (text == "implement") {
        return NpiKind::implement;
    }
    if (text == "lift") {
        return NpiKind::lift;
    }
    return std::nullopt;
}

std::vector<NpiRecord> merge_consecutive(std::vector<NpiRecord> npis, long max_gap,
                                         std::vector<std::string>* log) {
    std::stable_sort(npis.begin(), npis.end(), [](const NpiRecord& a, const NpiRecord& b) {
        if (a.location != b.location) {
            return a.location < b.location;
        }
        if (a.kind != b.kind) {
            return a.kind < b.kind;
        }
        return a.date < b.date;
    });
    std::vector<NpiRecord> out;
    std::size_t i = 0;
    while (i < npis.size()) {
        std::size_t end = i + 1;
        while (end < npis.size() && npis[end].location == npis[i].location && npis[end].kind == npis[i].kind &&
               days_between(npis[end - 1].date, npis[end].date) <= max_gap) {
            ++end;
        }
        NpiRecord merged = npis[i];
        if (end - i > 1) {
            const long span = days_between(npis[i].date, npis[end - 1].date);
            merged.date = add_days(npis[i].date, span / 2);
            for (std::size_t k = i + 1; k < end; ++k) {
                merged.label += "+" + npis[k].label;
            }
            if (log) {
                log->push_back("merged " + std::to_string(end - i) + " " + to_string(merged.kind) + " NPIs for " +
                               merged.location + " from " + format_date(npis[i].date) + " to " +
                               format_date(npis[end - 1].date) + " into " + format_date(merged.date));
            }
        }
        out.push_back(std::move(merged));
        i = end;
    }
    std::stable_sort(out.begin(), out.end(), [](const NpiRecord& a, const NpiRecord& b) {
        return a.location != b.location ? a.location < b.location : a.date < b.date;
    });
    return out;
}

NpiDetection infer_npi_date(const ReproductionSeries& r, long npi_index, std::size_t window, double threshold) {
    if (window % 2 == 0) {
        throw InvalidParameter("NPI window must be odd");
    }
    const long half = static_cast<long>(window / 2);
    const long n = static_cast<long>(r.size());
    NpiDetection det;
    long lo = npi_index - half;
    long hi = npi_index + half;
    // A transition (t, t+1) is attributed to day t+1, so valid attributed days are 1..n-1.
    if (lo < 1 || hi > n - 1) {
        det.truncated = true;
    }
    lo = std::max(lo, 1L);
    hi = std::min(hi, n - 1);
    double best = -1.0;
    long best_day = -1;
    for (long day = lo; day <= hi; ++day) {
        const auto t = static_cast<std::size_t>(day - 1);
        if (!r.is_defined(t) || !r.is_defined(t + 1) || !(r.values[t] > 0.0) || !(r.values[t + 1] > 0.0)) {
            continue;
        }
        const double change = std::abs(std::log(r.values[t + 1]) - std::log(r.values[t]));
        if (change > best) {
            best = change;
            best_day = day;
        } else if (change == best && std::abs(day - npi_index) < std::abs(best_day - npi_index)) {
            best_day = day;
        }
    }
    if (best_day < 0 || best < threshold) {
        return det;
    }
    det.detected = true;
    det.inferred_index = static_cast<std::size_t>(best_day);
    det.offset = best_day - npi_index;
    det.magnitude = best;
    return det;
}

OffsetStats offset_stats(std::span<const long> offsets) {
    if (offsets.empty()) {
        throw NoData("offset_stats: no offsets");
    }
    OffsetStats s;
    s.count = offsets.size();
    double sum = 0.0;
    std::size_t within = 0;
    for (long o : offsets) {
        sum += static_cast<double>(o);
        within += std::abs(o) <= 1 ? 1 : 0;
    }
    s.mean = sum / static_cast<double>(s.count);
    double var = 0.0;
    for (long o : offsets) {
        const double d = static_cast<double>(o) - s.mean;
        var += d * d;
    }
    s.sd = std::sqrt(var / static_cast<double>(s.count));
    s.fraction_within_one = static_cast<double>(within) / static_cast<double>(s.count);
    return s;
}

double fluctuation_statistic(std::span<const std::int64_t> counts, std::span<const double> lambda, double guard) {
    if (counts.size() != lambda.size() || counts.empty()) {
        throw InvalidInput("fluctuation_statistic: length mismatch or empty series");
    }
    double acc = 0.0;
    for (std::size_t t = 0; t < counts.size(); ++t) {
        const double d = static_cast<double>(counts[t]) - lambda[t];
        acc += d * d / (lambda[t] + guard);
    }
    return acc / static_cast<double>(counts.size());
}

std::size_t OffsetHistogram::at(long offset) const {
    const long i = offset - min_offset;
    if (i < 0 || i >= static_cast<long>(counts.size())) {
        return 0;
    }
    return counts[static_cast<std::size_t>(i)];
}

OffsetHistogram offset_histogram(std::span<const long> offsets, std::size_t window) {
    OffsetHistogram h;
    const long half = static_cast<long>(window / 2);
    h.min_offset = -half;
    h.counts.assign(static_cast<std::size_t>(2 * half + 1), 0);
    for (long o : offsets) {
        if (o < -half || o > half) {
            throw InvalidInput("offset " + std::to_string(o) + " outside the histogram window");
        }
        ++h.counts[static_cast<std::size_t>(o + half)];
        ++h.detected;
    }
    return h;
}

std::vector<long> OffsetReport::detected_offsets() const {
    std::vector<long> out;
    for (const auto& row : rows) {
        if (row.detected) {
            out.push_back(row.offset);
        }
    }
    return out;
}

OffsetReport evaluate_offsets(std::span<const LocationSeries> series, std::span<const NpiRecord> npis,
                              std::size_t window, double threshold) {
    OffsetReport report;
    std::map<std::string, std::vector<long>> by_location;
    for (const auto& npi : npis) {
        auto it = std::find_if(series.begin(), series.end(),
                               [&](const LocationSeries& s) { return s.location == npi.location; });
        if (it == series.end()) {
            continue;
        }
        NpiOffset row;
        row.npi = npi;
        const long index = days_between(it->start_date, npi.date);
        if (index < 0 || index >= static_cast<long>(it->reproduction.size())) {
            row.in_range = false;
            ++report.out_of_range;
            report.rows.push_back(row);
            continue;
        }
        const auto det = infer_npi_date(it->reproduction, index, window, threshold);
        row.detected = det.detected;
        row.truncated = det.truncated;
        if (det.detected) {
            row.offset = det.offset;
            row.magnitude = det.magnitude;
            row.inferred = add_days(it->start_date, static_cast<long>(det.inferred_index));
            by_location[npi.location].push_back(det.offset);
        } else {
            ++report.not_detected;
        }
        report.rows.push_back(row);
    }
    for (const auto& [loc, offs] : by_location) {
        report.per_location[loc] = offset_stats(offs);
    }
    const auto all = report.detected_offsets();
    if (!all.empty()) {
        report.overall = offset_stats(all);
    }
    report.histogram = offset_histogram(all, window);
    return report;
}

namespace {

nlohmann::ordered_json stats_json(const OffsetStats& s) {
    return {{"count", s.count}, {"mean", s.mean}, {"sd", s.sd}, {"fraction_within_one", s.fraction_within_one}};
}

}  // namespace

std::string offset_report_to_json(const OffsetReport& report) {
    nlohmann::ordered_json j;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& r : report.rows) {
        nlohmann::ordered_json row{{"location", r.npi.location},
                                   {"date", format_date(r.npi.date)},
                                   {"label", r.npi.label},
                                   {"kind", to_string(r.npi.kind)},
                                   {"in_range", r.in_range},
                                   {"detected", r.detected}};
        if (r.detected) {
            row["inferred_date"] = format_date(r.inferred);
            row["offset"] = r.offset;
            row["log_r_change"] = r.magnitude;
        }
        row["window_truncated"] = r.truncated;
        rows.push_back(std::move(row));
    }
    j["npis"] = std::move(rows);
    nlohmann::ordered_json summary;
    summary["detected"] = report.histogram.detected;
    summary["not_detected"] = report.not_detected;
    summary["out_of_range"] = report.out_of_range;
    summary["overall"] = report.overall ? stats_json(*report.overall) : nlohmann::ordered_json(nullptr);
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (const auto& [loc, s] : report.per_location) {
        per[loc] = stats_json(s);
    }
    summary["per_location"] = std::move(per);
    j["summary"] = std::move(summary);
    return j.dump(2) + "\n";
}

std::string histogram_to_csv(const OffsetHistogram& histogram) {
    std::string out = "offset_day,count\n";
    for (std::size_t i = 0; i < histogram.counts.size(); ++i) {
        out += std::to_string(histogram.min_offset + static_cast<long>(i)) + "," +
               std::to_string(histogram.counts[i]) + "\n";
    }
    return out;
}

}  // namespace epideconv
