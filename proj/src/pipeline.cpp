#include "epideconv/pipeline.hpp"

#include "epideconv/format.hpp"

#include <json.hpp>

#include <chrono>
#include <ctime>
#include <set>

namespace epideconv {

namespace {

class Run {
public:
    Run(const RunConfig& config, std::ostream* sink) : config_(config), sink_(sink) {}

    PipelineResult execute();

private:
    template <class F>
    auto stage(const std::string& name, F&& body) {
        current_ = name;
        try {
            return body();
        } catch (const StageError&) {
            throw;
        } catch (const std::exception& e) {
            throw StageError(name, e.what());
        }
    }

    void note(const std::string& line) {
        result_.log.push_back("[" + current_ + "] " + line);
        if (sink_) {
            *sink_ << result_.log.back() << "\n";
        }
    }

    void emit(const std::string& name, const std::string& contents) {
        const auto path = config_.out / name;
        write_file(path, contents);
        result_.written.push_back(path);
    }

    std::string summary_json(const std::optional<RetrospectiveSelection>& retro) const;

    const RunConfig& config_;
    std::ostream* sink_;
    std::string current_;
    PipelineResult result_;
    std::vector<DeathSeries> series_;
    std::vector<NpiRecord> npis_;
    std::optional<KernelPair> kernels_;
};

PipelineResult Run::execute() {
    stage("config", [&] { config_.validate(); });

    stage("ingest", [&] {
        std::set<std::string> seen;
        for (const auto& path : config_.deaths) {
            auto loaded = load_deaths_csv(path);
            if (!seen.insert(loaded.series.location).second) {
                throw InvalidInput("duplicate location '" + loaded.series.location + "'");
            }
            validate(loaded.series);
            for (const auto& w : loaded.warnings) {
                note(loaded.series.location + ": " + w);
            }
            note("loaded " + loaded.series.location + ": " + std::to_string(loaded.series.size()) + " days from " +
                 format_date(loaded.series.start_date));
            series_.push_back(std::move(loaded.series));
        }
        if (!config_.npis.empty()) {
            auto loaded = load_npi_csv(config_.npis);
            for (const auto& m : loaded.merges) {
                note(m);
            }
            npis_ = std::move(loaded.records);
            note("loaded " + std::to_string(npis_.size()) + " NPI records");
        }
    });

    stage("kernels", [&] {
        kernels_ = default_kernels(config_.death_mean, config_.death_sd, config_.gen_mean, config_.gen_sd,
                                   config_.death_length, config_.gen_length);
        for (const auto* k : {&kernels_->death_delay, &kernels_->generation}) {
            if (k->truncation_warning()) {
                note("kernel truncated: captured mass " + format_double(k->captured_mass()));
            }
        }
    });

    stage("sweep", [&] {
        const auto grid = config_.gamma ? GammaGrid{{*config_.gamma}}
                                        : GammaGrid::log_spaced(config_.grid_min, config_.grid_max,
                                                                config_.grid_count);
        note("fitting " + std::to_string(series_.size()) + " location(s) at " + std::to_string(grid.size()) +
             " gamma value(s)");
        result_.sweep = sweep(series_, grid, *kernels_, config_.fit, config_.parallelism);
        for (const auto& w : result_.sweep.warnings) {
            note(w);
        }
    });

    std::optional<RetrospectiveSelection> retro;
    stage("selection", [&] {
        const auto& sw = result_.sweep;
        if (!npis_.empty() && (sw.grid.size() > 1 || config_.selection == SelectionMode::retrospective)) {
            try {
                retro = retrospective_select(sw, npis_, config_.npi_window);
            } catch (const NoSelection& e) {
                if (config_.selection == SelectionMode::retrospective) {
                    throw;
                }
                note(std::string("retrospective selection unavailable: ") + e.what());
            }
        }
        if (sw.grid.size() == 1) {
            result_.selected_index = 0;
        } else if (config_.selection == SelectionMode::retrospective) {
            result_.selected_index = retro->index;
        } else {
            result_.selected_index = select_aic(
                sw, config_.selection == SelectionMode::aic ? AicMode::default_form : AicMode::literal_form);
        }
        result_.selected_gamma = sw.grid.values[result_.selected_index];
        note("selected gamma " + format_double(result_.selected_gamma) + " (" + to_string(config_.selection) + ")");
    });

    stage("evaluation", [&] {
        if (npis_.empty()) {
            note("no NPI file; offsets not evaluated");
            return;
        }
        result_.offsets = sweep_offsets(result_.sweep, result_.selected_index, npis_, config_.npi_window);
        const auto& rep = *result_.offsets;
        note(std::to_string(rep.histogram.detected) + " NPI(s) detected, " + std::to_string(rep.not_detected) +
             " not detected");
        for (const auto& row : rep.rows) {
            if (row.truncated) {
                note("window truncated at series edge for " + row.npi.location + " " + format_date(row.npi.date));
            }
        }
    });

    stage("output", [&] {
        std::filesystem::create_directories(config_.out);
        const auto& sw = result_.sweep;
        for (std::size_t l = 0; l < series_.size(); ++l) {
            const auto& cell = sw.cells[result_.selected_index][l];
            if (!cell.fit) {
                note("no series for " + series_[l].location + ": " + cell.error);
                continue;
            }
            emit(series_[l].location + "_series.csv", series_to_csv(series_[l], *cell.fit));
        }
        emit("sweep.csv", sweep_to_csv(sw));
        if (!npis_.empty()) {
            emit("sweep_offsets.csv", sweep_offsets_to_csv(sw, npis_, config_.npi_window));
        }
        emit("death_delay_kernel.csv", kernel_to_csv(kernels_->death_delay));
        emit("generation_kernel.csv", kernel_to_csv(kernels_->generation));
        if (result_.offsets) {
            emit("offsets.json", offset_report_to_json(*result_.offsets));
            emit("histogram.csv", histogram_to_csv(result_.offsets->histogram));
        }
        emit("summary.json", summary_json(retro));
    });

    if (!config_.out.empty()) {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        std::string text = std::string("run at ") + stamp + "\n";
        for (const auto& line : result_.log) {
            text += line + "\n";
        }
        write_file(config_.out / "run.log", text);
    }
    return std::move(result_);
}

std::string Run::summary_json(const std::optional<RetrospectiveSelection>& retro) const {
    const auto& sw = result_.sweep;
    nlohmann::ordered_json j;
    j["selection_mode"] = to_string(config_.selection);
    j["selected_gamma"] = result_.selected_gamma;
    nlohmann::ordered_json grid = nlohmann::ordered_json::array();
    for (std::size_t g = 0; g < sw.grid.size(); ++g) {
        nlohmann::ordered_json row{{"gamma", sw.grid.values[g]},
                                   {"aic_default", sw.aic[g].default_form},
                                   {"aic_literal", sw.aic[g].literal_form},
                                   {"included", sw.aic[g].included},
                                   {"excluded", sw.aic[g].excluded}};
        if (retro) {
            const double m = retro->mse[g];
            row["offset_mse"] = std::isnan(m) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(m);
        }
        grid.push_back(std::move(row));
    }
    j["grid"] = std::move(grid);
    auto pick = [&](AicMode mode) -> nlohmann::ordered_json {
        try {
            return sw.grid.values[select_aic(sw, mode)];
        } catch (const NoSelection&) {
            return nullptr;
        }
    };
    j["gamma_aic_default"] = pick(AicMode::default_form);
    j["gamma_aic_literal"] = pick(AicMode::literal_form);
    j["gamma_retrospective"] = retro ? nlohmann::ordered_json(sw.grid.values[retro->index]) : nullptr;
    nlohmann::ordered_json locs = nlohmann::ordered_json::object();
    for (std::size_t l = 0; l < series_.size(); ++l) {
        const auto& cell = sw.cells[result_.selected_index][l];
        nlohmann::ordered_json e;
        if (cell.fit) {
            e["converged"] = cell.fit->converged;
            e["iterations"] = cell.fit->iterations_used;
            e["k"] = cell.k;
            e["data_loss"] = cell.fit->losses.data;
            e["dynamics_loss"] = cell.fit->losses.dynamics;
            e["fluctuation"] = fluctuation_statistic(series_[l].counts, cell.fit->lambda, config_.fit.log_guard);
            e["trend_cutoff_day"] = cell.fit->cutoff_index;
        } else {
            e["error"] = cell.error;
        }
        locs[series_[l].location] = std::move(e);
    }
    j["locations"] = std::move(locs);
    return j.dump(2) + "\n";
}

}  // namespace

PipelineResult execute_pipeline(const RunConfig& config, std::ostream* log) {
    return Run(config, log).execute();
}

int run_pipeline(const RunConfig& config, std::ostream& err) {
    try {
        execute_pipeline(config, &err);
        return 0;
    } catch (const StageError& e) {
        err << "error " << e.what() << "\n";
        return e.stage() == "config" ? 2 : 1;
    } catch (const std::exception& e) {
        err << "error [output] " << e.what() << "\n";
        return 1;
    }
}

}  // namespace epideconv
