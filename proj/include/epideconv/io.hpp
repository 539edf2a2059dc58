#pragma once
// File formats: deaths and NPI CSV ingestion, series/sweep/kernel exports,
// and the flat JSON run configuration.

#include "epideconv/evaluation.hpp"
#include "epideconv/fitter.hpp"
#include "epideconv/selection.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace epideconv {

struct LoadedDeaths {
    DeathSeries series;
    std::vector<std::string> warnings;
};

/// Header `date,deaths`. Rows may come in any order; interior gaps are filled
/// with zeros and reported. Duplicate dates, negative or malformed counts
/// raise ParseError with the 1-based line number; no rows raises NoData.
LoadedDeaths parse_deaths_csv(const std::string& text, std::string location);
/// Location is the file stem.
LoadedDeaths load_deaths_csv(const std::filesystem::path& path);
std::string deaths_to_csv(const DeathSeries& series);

struct LoadedNpis {
    std::vector<NpiRecord> records;
    /// One line per merge performed.
    std::vector<std::string> merges;
};

/// Header `location,date,label,kind`; kind is implement or lift.
/// Consecutive records are merged with merge_consecutive(.., 3).
LoadedNpis parse_npi_csv(const std::string& text);
LoadedNpis load_npi_csv(const std::filesystem::path& path);
std::string npis_to_csv(const std::vector<NpiRecord>& npis);

/// `date,n,lambda,j,R`; undefined R is written as nan.
std::string series_to_csv(const DeathSeries& series, const FitResult& fit);

struct SeriesTable {
    DeathSeries series;
    std::vector<double> lambda;
    std::vector<double> incidence;
    ReproductionSeries reproduction;
};
SeriesTable parse_series_csv(const std::string& text, std::string location);
SeriesTable load_series_csv(const std::filesystem::path& path);

/// One row per (gamma, location): gamma,location,k,data_loss,dynamics_loss,
/// aic_default,aic_literal,converged,poisson_loglik. The AIC columns are the
/// location's term; failed cells have empty numeric fields.
std::string sweep_to_csv(const SweepResult& sweep);

/// Offsets of every NPI at every grid value:
/// gamma,location,npi_date,kind,detected,offset. Lets retrospective selection
/// run from files alone.
std::string sweep_offsets_to_csv(const SweepResult& sweep, const std::vector<NpiRecord>& npis,
                                 std::size_t window = kNpiWindow);
/// offset_mse per value of `grid` rebuilt from those rows.
std::vector<double> offset_mse_from_csv(const std::string& text, const GammaGrid& grid,
                                        std::size_t window = kNpiWindow);

struct SweepRow {
    double gamma = 0.0;
    std::string location;
    std::size_t k = 0;
    double data_loss = 0.0;
    double dynamics_loss = 0.0;
    double aic_default = 0.0;
    double aic_literal = 0.0;
    bool converged = false;
    bool failed = false;
};
std::vector<SweepRow> parse_sweep_csv(const std::string& text);

/// Per-gamma AIC totals rebuilt from sweep rows (grid in file order), ready
/// for select_aic. Fit results themselves are not restored.
SweepResult sweep_from_rows(const std::vector<SweepRow>& rows);

struct RunConfig {
    std::vector<std::filesystem::path> deaths;
    std::filesystem::path npis;
    std::filesystem::path out = "out";
    double death_mean = kDeathDelayMean;
    double death_sd = kDeathDelaySd;
    std::size_t death_length = kDeathDelayLength;
    double gen_mean = kGenerationMean;
    double gen_sd = kGenerationSd;
    std::size_t gen_length = kGenerationLength;
    double grid_min = 0.1;
    double grid_max = 10.0;
    std::size_t grid_count = 41;
    /// Set: a single fit at this value, no sweep.
    std::optional<double> gamma;
    FitConfig fit;
    SelectionMode selection = SelectionMode::aic;
    unsigned parallelism = 0;
    std::size_t npi_window = kNpiWindow;

    /// Throws ConfigError on out-of-range values, missing inputs, or
    /// retrospective selection without an NPI file.
    void validate() const;
};

/// Flat object; unknown keys raise ConfigError. `deaths` is a path or list
/// of paths, relative paths resolve against `base_dir`.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace epideconv
