#include "epideconv/io.hpp"
#include "epideconv/pipeline.hpp"
#include "epideconv/simulator.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <sys/wait.h>

using namespace epideconv;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("epideconv_pipe_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// One simulated location plus its NPI file.
RunConfig small_run(const fs::path& dir, const std::string& scenario = "single_step") {
    auto sc = benchmark_scenario(scenario);
    sc.rng_seed = 4;
    auto deaths = simulate_deaths(sc);
    std::vector<NpiRecord> npis;
    for (auto day : sc.change_days()) {
        const bool up = sc.r_on(day) > sc.r_on(day - 1);
        npis.push_back({"alpha", deaths.date_of(day - 1), "change", up ? NpiKind::lift : NpiKind::implement});
    }
    write_file(dir / "alpha.csv", deaths_to_csv(deaths));
    write_file(dir / "npis.csv", npis_to_csv(npis));
    RunConfig c;
    c.deaths = {dir / "alpha.csv"};
    c.npis = dir / "npis.csv";
    c.out = dir / "out";
    c.grid_min = 1.0;
    c.grid_max = 4.0;
    c.grid_count = 3;
    c.parallelism = 1;
    return c;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + EPIDECONV_CLI + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("pipeline") {
    TEST_CASE("end to end run writes every artifact") {
        const auto dir = scratch_dir("e2e");
        auto c = small_run(dir);
        std::ostringstream log;
        const auto r = execute_pipeline(c, &log);
        CHECK(r.sweep.grid.size() == 3);
        CHECK(r.selected_gamma == r.sweep.grid.values[r.selected_index]);
        REQUIRE(r.offsets);
        CHECK(r.offsets->rows.size() == 1);
        for (const char* name : {"alpha_series.csv", "sweep.csv", "sweep_offsets.csv", "offsets.json", "histogram.csv",
                                 "summary.json", "run.log", "death_delay_kernel.csv", "generation_kernel.csv"}) {
            CHECK_MESSAGE(fs::exists(c.out / name), name);
        }
        const auto series = load_series_csv(c.out / "alpha_series.csv");
        CHECK(series.series.location == "alpha");
        CHECK(series.series.size() == benchmark_scenario("single_step").days);
        const auto offsets = nlohmann::json::parse(read_file(c.out / "offsets.json"));
        CHECK(offsets.contains("npis"));
        CHECK(offsets.contains("summary"));
        CHECK(read_file(c.out / "histogram.csv").rfind("offset_day,count\n", 0) == 0);
        CHECK(read_file(c.out / "run.log").rfind("run at ", 0) == 0);
        CHECK(read_file(c.out / "run.log").find("[ingest]") != std::string::npos);
    }

    TEST_CASE("repeat runs are byte identical") {
        const auto dir = scratch_dir("det");
        auto c = small_run(dir);
        c.out = dir / "a";
        execute_pipeline(c);
        c.out = dir / "b";
        c.parallelism = 3;
        execute_pipeline(c);
        for (const auto& entry : fs::directory_iterator(dir / "a")) {
            const auto name = entry.path().filename();
            if (name == "run.log") {
                continue;
            }
            CHECK_MESSAGE(read_file(entry.path()) == read_file(dir / "b" / name), name.string());
        }
    }

    TEST_CASE("single gamma fit") {
        const auto dir = scratch_dir("single");
        auto c = small_run(dir);
        c.gamma = 2.51;
        const auto r = execute_pipeline(c);
        CHECK(r.sweep.grid.size() == 1);
        CHECK(r.selected_gamma == 2.51);
    }

    TEST_CASE("retrospective mode without NPIs fails before fitting") {
        const auto dir = scratch_dir("retro");
        auto c = small_run(dir);
        c.npis.clear();
        c.selection = SelectionMode::retrospective;
        c.fit.max_iterations = 1u << 30;
        std::ostringstream err;
        CHECK(run_pipeline(c, err) == 2);
        CHECK(err.str().find("[config]") != std::string::npos);
        CHECK_FALSE(fs::exists(c.out / "sweep.csv"));
    }

    TEST_CASE("errors name their stage") {
        const auto dir = scratch_dir("stage");
        auto c = small_run(dir);
        write_file(dir / "alpha.csv", "date,deaths\n2020-03-01,4\n2020-03-02,-1\n");
        try {
            execute_pipeline(c);
            FAIL("expected a stage error");
        } catch (const StageError& e) {
            CHECK(e.stage() == "ingest");
            CHECK(std::string(e.what()).rfind("[ingest]", 0) == 0);
        }
        std::ostringstream err;
        CHECK(run_pipeline(c, err) == 1);
    }

    TEST_CASE("command line") {
        const auto dir = scratch_dir("cli");
        const auto d = dir.string();
        REQUIRE(run_cli("simulate --scenario single_step --seed 5 --location alpha --out \"" + d + "/sim\"") == 0);
        CHECK(fs::exists(dir / "sim" / "alpha.csv"));
        CHECK(fs::exists(dir / "sim" / "alpha_truth.csv"));
        CHECK(fs::exists(dir / "sim" / "alpha_npis.csv"));
        REQUIRE(run_cli("fit --deaths \"" + d + "/sim/alpha.csv\" --out \"" + d + "/fit\" --threads 1") == 0);
        CHECK(fs::exists(dir / "fit" / "alpha_series.csv"));
        REQUIRE(run_cli("sweep --deaths \"" + d + "/sim/alpha.csv\" --npis \"" + d +
                        "/sim/alpha_npis.csv\" --grid-min 1 --grid-max 4 --grid-count 3 --selection-mode retrospective "
                        "--threads 1 --out \"" + d + "/sweep\"") == 0);
        CHECK(fs::exists(dir / "sweep" / "offsets.json"));
        CHECK(run_cli("select --sweep \"" + d + "/sweep/sweep.csv\" --out \"" + d + "/sel\"") == 0);
        CHECK(fs::exists(dir / "sel" / "selection.txt"));
        CHECK(run_cli("select --sweep \"" + d + "/sweep/sweep.csv\" --offsets \"" + d +
                      "/sweep/sweep_offsets.csv\" --selection-mode retrospective --out \"" + d + "/sel2\"") == 0);
        CHECK(run_cli("evaluate --series \"" + d + "/fit/alpha_series.csv\" --npis \"" + d +
                      "/sim/alpha_npis.csv\" --out \"" + d + "/ev\"") == 0);
        CHECK(fs::exists(dir / "ev" / "histogram.csv"));

        CHECK(run_cli("sweep --deaths \"" + d + "/sim/alpha.csv\" --selection-mode retrospective --out \"" + d +
                      "/bad\"") == 2);
        CHECK(run_cli("fit --deaths \"" + d + "/missing.csv\" --out \"" + d + "/bad\"") == 2);
        CHECK(run_cli("sweep --grid-count many") != 0);
        CHECK(run_cli("simulate --scenario nope --out \"" + d + "/bad\"") != 0);
    }
}
