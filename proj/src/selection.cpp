#include "epideconv/selection.hpp"

#include "epideconv/errors.hpp"
#include "epideconv/format.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace epideconv {

GammaGrid GammaGrid::log_spaced(double min, double max, std::size_t count) {
    if (!(min > 0.0) || !(max >= min) || !std::isfinite(max) || count == 0) {
        throw InvalidParameter("gamma grid needs 0 < min <= max and count >= 1");
    }
    if (count > 1 && max == min) {
        throw InvalidParameter("gamma grid with several points needs min < max");
    }
    GammaGrid g;
    g.values.resize(count);
    g.values[0] = min;
    const double lmin = std::log10(min);
    const double lmax = std::log10(max);
    const double steps = static_cast<double>(count - 1);
    for (std::size_t i = 1; i < count; ++i) {
        const double x = static_cast<double>(i);
        g.values[i] = std::pow(10.0, (lmin * (steps - x) + lmax * x) / steps);
    }
    if (count > 1) {
        g.values[count - 1] = max;
    }
    return g;
}

RegimeChangeCount count_regime_changes(const ReproductionSeries& r, double threshold) {
    RegimeChangeCount c;
    for (std::size_t t = 1; t + 1 < r.size(); ++t) {
        if (!r.is_defined(t) || !r.is_defined(t + 1) || !(r.values[t] > 0.0) || !(r.values[t + 1] > 0.0)) {
            ++c.skipped;
            continue;
        }
        if (std::abs(std::log(r.values[t + 1]) - std::log(r.values[t])) >= threshold) {
            ++c.changes;
        }
    }
    return c;
}

std::string to_string(SelectionMode mode) {
    switch (mode) {
        case SelectionMode::aic:
            return "aic_default";
        case SelectionMode::aic_literal:
            return "aic_literal";
        case SelectionMode::retrospective:
            return "retrospective";
    }
    return "aic_default";
}

std::optional<SelectionMode> parse_selection_mode(std::string_view text) {
    if (text == "aic_default" || text == "aic") {
        return SelectionMode::aic;
    }
    if (text == "aic_literal") {
        return SelectionMode::aic_literal;
    }
    if (text == "retrospective") {
        return SelectionMode::retrospective;
    }
    return std::nullopt;
}

AicScore aic_score(const std::vector<SweepCell>& cells_at_gamma) {
    AicScore s;
    for (const auto& cell : cells_at_gamma) {
        if (!cell.fit || !cell.fit->converged) {
            ++s.excluded;
            continue;
        }
        const double k = static_cast<double>(cell.k);
        const double t = static_cast<double>(cell.fit->incidence.size());
        s.default_form += 2.0 * k + 2.0 * t * cell.fit->losses.data;
        s.literal_form += 2.0 * k - 2.0 * t * cell.fit->losses.data;
        ++s.included;
    }
    return s;
}

SweepResult sweep(const std::vector<DeathSeries>& series, const GammaGrid& grid, const KernelPair& kernels,
                  const FitConfig& base, unsigned threads) {
    if (series.empty()) {
        throw NoData("sweep: no locations");
    }
    if (grid.values.empty()) {
        throw InvalidInput("sweep: empty gamma grid");
    }
    base.validate();
    SweepResult out;
    out.grid = grid;
    for (const auto& s : series) {
        validate(s);
        out.locations.push_back(s.location);
        out.start_dates.push_back(s.start_date);
    }
    const std::size_t nl = series.size();
    const std::size_t total = grid.size() * nl;
    out.cells.assign(grid.size(), std::vector<SweepCell>(nl));

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t job = next.fetch_add(1); job < total; job = next.fetch_add(1)) {
            const std::size_t g = job / nl;
            const std::size_t l = job % nl;
            SweepCell& cell = out.cells[g][l];
            FitConfig cfg = base;
            cfg.gamma = grid.values[g];
            try {
                cell.fit = fit(series[l], kernels.death_delay, kernels.generation, cfg);
                const auto k = count_regime_changes(cell.fit->reproduction);
                cell.k = k.changes;
                cell.skipped = k.skipped;
                double ll = 0.0;
                for (std::size_t t = 0; t < series[l].size(); ++t) {
                    ll += poisson_loglik(series[l].counts[t], cell.fit->lambda[t], cfg.log_guard);
                }
                cell.poisson_loglik = ll / static_cast<double>(series[l].size());
            } catch (const std::exception& e) {
                cell.error = e.what();
            }
        }
    };
    if (threads == 0) {
        threads = std::max(1u, std::thread::hardware_concurrency());
    }
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, total));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned i = 0; i < threads; ++i) {
            pool.emplace_back(worker);
        }
    }

    for (std::size_t g = 0; g < grid.size(); ++g) {
        out.aic.push_back(aic_score(out.cells[g]));
        for (std::size_t l = 0; l < nl; ++l) {
            const auto& cell = out.cells[g][l];
            const std::string where = out.locations[l] + " at gamma=" + format_double(grid.values[g]);
            if (!cell.fit) {
                out.warnings.push_back("fit failed for " + where + ": " + cell.error);
            } else if (!cell.fit->converged) {
                out.warnings.push_back("fit did not converge for " + where + "; excluded from AIC");
            }
            if (cell.skipped > 0) {
                out.warnings.push_back(std::to_string(cell.skipped) + " undefined R transitions skipped for " +
                                       where);
            }
        }
    }
    return out;
}

std::size_t select_aic(const SweepResult& sweep, AicMode mode) {
    std::size_t most = 0;
    for (const auto& a : sweep.aic) {
        most = std::max(most, a.included);
    }
    if (most == 0) {
        throw NoSelection("no grid value has a converged fit");
    }
    // Sums over different location sets are not comparable; only grid values
    // that keep the largest number of locations compete.
    std::optional<std::size_t> best;
    for (std::size_t g = 0; g < sweep.aic.size(); ++g) {
        const auto& a = sweep.aic[g];
        if (a.included != most) {
            continue;
        }
        if (!best) {
            best = g;
            continue;
        }
        const auto& b = sweep.aic[*best];
        if (mode == AicMode::default_form ? a.default_form < b.default_form : a.literal_form > b.literal_form) {
            best = g;
        }
    }
    return *best;
}

RetrospectiveSelection retrospective_select(const std::vector<double>& mse) {
    RetrospectiveSelection sel;
    sel.mse = mse;
    double best = std::numeric_limits<double>::infinity();
    for (double m : mse) {
        if (!std::isnan(m)) {
            best = std::min(best, m);
        }
    }
    std::vector<std::size_t> tied;
    for (std::size_t g = 0; g < mse.size(); ++g) {
        if (mse[g] == best) {
            tied.push_back(g);
        }
    }
    if (tied.empty()) {
        throw NoSelection("no NPI detected at any grid value");
    }
    sel.index = tied[(tied.size() - 1) / 2];
    return sel;
}

std::vector<LocationSeries> location_series(const SweepResult& sweep, std::size_t grid_index) {
    std::vector<LocationSeries> out;
    for (std::size_t l = 0; l < sweep.locations.size(); ++l) {
        const auto& cell = sweep.cells.at(grid_index)[l];
        if (cell.fit) {
            out.push_back({sweep.locations[l], sweep.start_dates[l], cell.fit->reproduction});
        }
    }
    return out;
}

OffsetReport sweep_offsets(const SweepResult& sweep, std::size_t grid_index, const std::vector<NpiRecord>& npis,
                           std::size_t window) {
    const auto series = location_series(sweep, grid_index);
    return evaluate_offsets(series, npis, window);
}

long miss_offset(std::size_t window) {
    return static_cast<long>(window / 2) + 1;
}

double offset_mse(const OffsetReport& report, std::size_t window) {
    if (report.histogram.detected == 0) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    const double miss = static_cast<double>(miss_offset(window));
    double acc = 0.0;
    std::size_t n = 0;
    for (const auto& row : report.rows) {
        if (!row.in_range) {
            continue;
        }
        const double d = row.detected ? static_cast<double>(row.offset) : miss;
        acc += d * d;
        ++n;
    }
    return acc / static_cast<double>(n);
}

RetrospectiveSelection retrospective_select(const SweepResult& sweep, const std::vector<NpiRecord>& npis,
                                            std::size_t window) {
    std::vector<double> mse(sweep.grid.size());
    for (std::size_t g = 0; g < sweep.grid.size(); ++g) {
        mse[g] = offset_mse(sweep_offsets(sweep, g, npis, window), window);
    }
    return retrospective_select(mse);
}

}  // namespace epideconv
