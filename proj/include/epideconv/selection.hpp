#pragma once
// Regularization-strength sweep and the two ways of choosing gamma from it.

#include "epideconv/evaluation.hpp"
#include "epideconv/fitter.hpp"
#include "epideconv/kernels.hpp"

#include <optional>
#include <string>
#include <vector>

namespace epideconv {

struct GammaGrid {
    std::vector<double> values;

    /// `count` points log-spaced from `min` to `max` inclusive.
    static GammaGrid log_spaced(double min = 0.1, double max = 10.0, std::size_t count = 41);
    std::size_t size() const noexcept { return values.size(); }
};

struct RegimeChangeCount {
    std::size_t changes = 0;
    /// Transitions skipped because an endpoint R was undefined or non-positive.
    std::size_t skipped = 0;
};

/// Number of transitions (t, t+1), t >= 2 (1-based), with
/// |ln R_{t+1} - ln R_t| >= threshold.
RegimeChangeCount count_regime_changes(const ReproductionSeries& r, double threshold = kChangeThreshold);

enum class AicMode {
    /// sum over locations of 2k + 2T L_data, minimized.
    default_form,
    /// sum over locations of 2k - 2T L_data, maximized.
    literal_form,
};

enum class SelectionMode { aic, aic_literal, retrospective };

std::string to_string(SelectionMode mode);
std::optional<SelectionMode> parse_selection_mode(std::string_view text);

struct SweepCell {
    std::optional<FitResult> fit;
    std::string error;
    std::size_t k = 0;
    std::size_t skipped = 0;
    /// Mean unweighted Poisson log-likelihood per day (log guard applied).
    double poisson_loglik = 0.0;
};

struct AicScore {
    double default_form = 0.0;
    double literal_form = 0.0;
    /// Locations whose fits failed or did not converge; they are left out.
    std::size_t excluded = 0;
    std::size_t included = 0;
};

struct SweepResult {
    GammaGrid grid;
    std::vector<std::string> locations;
    std::vector<Date> start_dates;
    /// cells[g][l] for grid value g and location l.
    std::vector<std::vector<SweepCell>> cells;
    std::vector<AicScore> aic;
    std::vector<std::string> warnings;
};

AicScore aic_score(const std::vector<SweepCell>& cells_at_gamma);

/// Fits every (location, gamma) pair on up to `threads` workers (0 picks the
/// hardware concurrency). A failing fit is recorded in its cell and does not
/// stop the sweep. Results do not depend on the thread count.
SweepResult sweep(const std::vector<DeathSeries>& series, const GammaGrid& grid, const KernelPair& kernels,
                  const FitConfig& base, unsigned threads = 0);

/// Grid index chosen by the AIC form among the grid values that keep the
/// most locations; throws NoSelection when no grid value has a usable fit.
std::size_t select_aic(const SweepResult& sweep, AicMode mode);

struct RetrospectiveSelection {
    std::size_t index = 0;
    /// offset_mse per grid value.
    std::vector<double> mse;
};

/// Offset charged to an in-range NPI with no detected change: one day past
/// the window edge.
long miss_offset(std::size_t window = kNpiWindow);

/// Mean squared offset over every in-range NPI, misses charged miss_offset();
/// NaN when nothing was detected.
double offset_mse(const OffsetReport& report, std::size_t window = kNpiWindow);

/// Minimizes the mean squared NPI offset over the grid. Exact ties resolve to
/// the median (lower middle) of the tied grid indices. Throws NoSelection
/// when no NPI is detected at any grid value.
RetrospectiveSelection retrospective_select(const std::vector<double>& mse);
RetrospectiveSelection retrospective_select(const SweepResult& sweep, const std::vector<NpiRecord>& npis,
                                            std::size_t window = kNpiWindow);

/// Per-grid-value offset report over all locations with a successful fit.
OffsetReport sweep_offsets(const SweepResult& sweep, std::size_t grid_index, const std::vector<NpiRecord>& npis,
                           std::size_t window = kNpiWindow);

/// Series anchored at each location's start date for evaluate_offsets.
std::vector<LocationSeries> location_series(const SweepResult& sweep, std::size_t grid_index);

}  // namespace epideconv
