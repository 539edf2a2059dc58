// Command-line front end: fit, sweep, select, evaluate, simulate, report.

#include "epideconv/evaluation.hpp"
#include "epideconv/format.hpp"
#include "epideconv/io.hpp"
#include "epideconv/pipeline.hpp"
#include "epideconv/simulator.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <iostream>

namespace fs = std::filesystem;
using namespace epideconv;

namespace {

struct PipelineFlags {
    std::string config;
    std::vector<std::string> deaths;
    std::string npis;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<double> gamma;
    std::optional<double> grid_min, grid_max;
    std::optional<std::size_t> grid_count;
    std::string selection_mode;
    std::optional<unsigned> threads;
    std::optional<std::size_t> max_iterations;
};

void add_common(CLI::App* cmd, PipelineFlags& f) {
    cmd->add_option("--config", f.config, "Flat JSON run configuration")->check(CLI::ExistingFile);
    cmd->add_option("--deaths", f.deaths, "Deaths CSV (date,deaths); repeat for several locations");
    cmd->add_option("--npis", f.npis, "NPI CSV (location,date,label,kind)");
    cmd->add_option("--out", f.out, "Output directory");
    cmd->add_option("--seed", f.seed, "Seed recorded with the fits");
    cmd->add_option("--threads", f.threads, "Worker threads for the sweep (0: all cores)");
    cmd->add_option("--max-iterations", f.max_iterations, "Optimizer iteration cap");
}

RunConfig build_config(const PipelineFlags& f) {
    RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
    if (!f.deaths.empty()) {
        c.deaths.assign(f.deaths.begin(), f.deaths.end());
    }
    if (!f.npis.empty()) {
        c.npis = f.npis;
    }
    if (!f.out.empty()) {
        c.out = f.out;
    }
    if (f.seed) {
        c.fit.rng_seed = *f.seed;
    }
    if (f.gamma) {
        c.gamma = *f.gamma;
    }
    if (f.grid_min) {
        c.grid_min = *f.grid_min;
    }
    if (f.grid_max) {
        c.grid_max = *f.grid_max;
    }
    if (f.grid_count) {
        c.grid_count = *f.grid_count;
    }
    if (!f.selection_mode.empty()) {
        const auto mode = parse_selection_mode(f.selection_mode);
        if (!mode) {
            throw ConfigError("--selection-mode must be aic_default, aic_literal or retrospective");
        }
        c.selection = *mode;
    }
    if (f.threads) {
        c.parallelism = *f.threads;
    }
    if (f.max_iterations) {
        c.fit.max_iterations = *f.max_iterations;
    }
    return c;
}

int run_with(const PipelineFlags& f, bool single_fit) {
    RunConfig c;
    try {
        c = build_config(f);
    } catch (const std::exception& e) {
        std::cerr << "error [config] " << e.what() << "\n";
        return 2;
    }
    if (single_fit && !c.gamma) {
        c.gamma = FitConfig{}.gamma;
    }
    if (!single_fit && f.gamma) {
        c.gamma = f.gamma;
    }
    return run_pipeline(c, std::cerr);
}

int cmd_select(const std::string& sweep_path, const std::string& offsets_path, const std::string& mode_text,
               const std::string& out) {
    const auto mode = parse_selection_mode(mode_text);
    if (!mode) {
        std::cerr << "error [config] --selection-mode must be aic_default, aic_literal or retrospective\n";
        return 2;
    }
    if (*mode == SelectionMode::retrospective && offsets_path.empty()) {
        std::cerr << "error [config] retrospective selection needs --offsets (sweep_offsets.csv)\n";
        return 2;
    }
    try {
        const auto sweep = sweep_from_rows(parse_sweep_csv(read_file(sweep_path)));
        std::size_t index = 0;
        if (*mode == SelectionMode::retrospective) {
            index = retrospective_select(offset_mse_from_csv(read_file(offsets_path), sweep.grid)).index;
        } else {
            index = select_aic(sweep, *mode == SelectionMode::aic ? AicMode::default_form : AicMode::literal_form);
        }
        const auto gamma = format_double(sweep.grid.values[index]);
        std::cout << gamma << "\n";
        if (!out.empty()) {
            fs::create_directories(out);
            write_file(fs::path(out) / "selection.txt", to_string(*mode) + "," + gamma + "\n");
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error [selection] " << e.what() << "\n";
        return 1;
    }
}

int cmd_evaluate(const std::vector<std::string>& series_paths, const std::string& npi_path, std::size_t window,
                 const std::string& out) {
    try {
        const auto npis = load_npi_csv(npi_path);
        for (const auto& m : npis.merges) {
            std::cerr << "[ingest] " << m << "\n";
        }
        std::vector<LocationSeries> series;
        for (const auto& p : series_paths) {
            auto table = load_series_csv(p);
            std::cout << table.series.location << " fluctuation "
                      << format_double(fluctuation_statistic(table.series.counts, table.lambda)) << "\n";
            series.push_back({table.series.location, table.series.start_date, std::move(table.reproduction)});
        }
        const auto report = evaluate_offsets(series, npis.records, window);
        if (report.overall) {
            std::cout << "offset mean " << format_double(report.overall->mean) << " sd "
                      << format_double(report.overall->sd) << " within1 "
                      << format_double(report.overall->fraction_within_one) << " detected "
                      << report.overall->count << "\n";
        }
        std::cout << "not detected " << report.not_detected << "\n";
        fs::create_directories(out);
        write_file(fs::path(out) / "offsets.json", offset_report_to_json(report));
        write_file(fs::path(out) / "histogram.csv", histogram_to_csv(report.histogram));
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error [evaluation] " << e.what() << "\n";
        return 1;
    }
}

int cmd_simulate(const std::string& name, const std::string& file, std::optional<std::uint64_t> seed,
                 std::string location, const std::string& out) {
    try {
        Scenario sc = file.empty() ? benchmark_scenario(name) : scenario_from_json(read_file(file));
        if (seed) {
            sc.rng_seed = *seed;
        }
        if (location.empty()) {
            location = sc.name;
        }
        const auto truth = ground_truth(sc);
        const auto kernels = sc.kernels();
        const auto deaths = sample_deaths(truth.incidence, kernels.death_delay, sc.rng_seed, sc.start_date, location);

        std::string truth_csv = "date,j,lambda,R\n";
        for (std::size_t t = 0; t < deaths.size(); ++t) {
            truth_csv += format_date(deaths.date_of(t)) + "," + format_double(truth.incidence[t]) + "," +
                         format_double(truth.lambda[t]) + "," + format_double(truth.r[t]) + "\n";
        }
        std::vector<NpiRecord> npis;
        std::size_t i = 0;
        for (auto day : truth.change_days) {
            const bool down = sc.r_on(day) < sc.r_on(day - 1);
            npis.push_back({location, deaths.date_of(day - 1), "change-" + std::to_string(++i),
                            down ? NpiKind::implement : NpiKind::lift});
        }
        fs::create_directories(out);
        const fs::path dir(out);
        write_file(dir / (location + ".csv"), deaths_to_csv(deaths));
        write_file(dir / (location + "_truth.csv"), truth_csv);
        write_file(dir / (location + "_npis.csv"), npis_to_csv(npis));
        write_file(dir / (location + "_scenario.json"), scenario_to_json(sc));
        std::cout << (dir / (location + ".csv")).string() << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error [simulate] " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deconvolution of daily deaths into incidence and reproduction number"};
    app.require_subcommand(1);

    PipelineFlags fit_flags;
    auto* fit_cmd = app.add_subcommand("fit", "Single-gamma fit of every location");
    add_common(fit_cmd, fit_flags);
    fit_cmd->add_option("--gamma", fit_flags.gamma, "Regularization strength (default 2.51)");

    PipelineFlags sweep_flags;
    auto* sweep_cmd = app.add_subcommand("sweep", "Fit over the gamma grid, select, evaluate");
    add_common(sweep_cmd, sweep_flags);
    sweep_cmd->add_option("--grid-min", sweep_flags.grid_min, "Smallest gamma (default 0.1)");
    sweep_cmd->add_option("--grid-max", sweep_flags.grid_max, "Largest gamma (default 10)");
    sweep_cmd->add_option("--grid-count", sweep_flags.grid_count, "Grid size (default 41)");
    sweep_cmd->add_option("--selection-mode", sweep_flags.selection_mode,
                          "aic_default, aic_literal or retrospective");

    PipelineFlags report_flags;
    auto* report_cmd = app.add_subcommand("report", "Run the whole pipeline from a config file");
    add_common(report_cmd, report_flags);
    report_cmd->add_option("--gamma", report_flags.gamma, "Single gamma instead of the grid");
    report_cmd->add_option("--grid-min", report_flags.grid_min);
    report_cmd->add_option("--grid-max", report_flags.grid_max);
    report_cmd->add_option("--grid-count", report_flags.grid_count);
    report_cmd->add_option("--selection-mode", report_flags.selection_mode);

    std::string sel_sweep, sel_offsets, sel_mode = "aic_default", sel_out;
    auto* select_cmd = app.add_subcommand("select", "Choose gamma from a sweep summary");
    select_cmd->add_option("--sweep", sel_sweep, "sweep.csv")->required()->check(CLI::ExistingFile);
    select_cmd->add_option("--offsets", sel_offsets, "sweep_offsets.csv (retrospective mode)")
        ->check(CLI::ExistingFile);
    select_cmd->add_option("--selection-mode", sel_mode, "aic_default, aic_literal or retrospective");
    select_cmd->add_option("--out", sel_out, "Directory for selection.txt");

    std::vector<std::string> ev_series;
    std::string ev_npis, ev_out = "out";
    std::size_t ev_window = kNpiWindow;
    auto* eval_cmd = app.add_subcommand("evaluate", "NPI offsets from fitted series CSVs");
    eval_cmd->add_option("--series", ev_series, "<location>_series.csv; repeatable")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--npis", ev_npis, "NPI CSV")->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--window", ev_window, "Odd window width in days");
    eval_cmd->add_option("--out", ev_out, "Output directory");

    std::string sim_name = "single_step", sim_file, sim_location, sim_out = "out";
    std::optional<std::uint64_t> sim_seed;
    auto* sim_cmd = app.add_subcommand("simulate", "Synthetic deaths with known R steps");
    sim_cmd->add_option("--scenario", sim_name, "single_step, double_step or low_incidence");
    sim_cmd->add_option("--scenario-file", sim_file, "Scenario JSON")->check(CLI::ExistingFile);
    sim_cmd->add_option("--seed", sim_seed, "Sampling seed");
    sim_cmd->add_option("--location", sim_location, "Location name (default: scenario name)");
    sim_cmd->add_option("--out", sim_out, "Output directory");

    CLI11_PARSE(app, argc, argv);

    if (*fit_cmd) {
        return run_with(fit_flags, true);
    }
    if (*sweep_cmd) {
        return run_with(sweep_flags, false);
    }
    if (*report_cmd) {
        if (report_flags.config.empty()) {
            std::cerr << "error [config] report needs --config\n";
            return 2;
        }
        return run_with(report_flags, false);
    }
    if (*select_cmd) {
        return cmd_select(sel_sweep, sel_offsets, sel_mode, sel_out);
    }
    if (*eval_cmd) {
        return cmd_evaluate(ev_series, ev_npis, ev_window, ev_out);
    }
    return cmd_simulate(sim_name, sim_file, sim_seed, sim_location, sim_out);
}
