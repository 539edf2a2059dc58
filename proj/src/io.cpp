#include "epideconv/io.hpp"

#include "epideconv/errors.hpp"
#include "epideconv/format.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace epideconv {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos) {
            return out;
        }
        start = comma + 1;
    }
}

struct Line {
    std::size_t number;
    std::string_view text;
};

/// Non-blank lines with their 1-based numbers.
std::vector<Line> lines_of(const std::string& text) {
    std::vector<Line> out;
    std::string_view rest = text;
    std::size_t number = 0;
    while (!rest.empty()) {
        ++number;
        const auto nl = rest.find('\n');
        const auto line = trim(rest.substr(0, nl));
        if (!line.empty()) {
            out.push_back({number, line});
        }
        if (nl == std::string_view::npos) {
            break;
        }
        rest.remove_prefix(nl + 1);
    }
    return out;
}

void expect_header(const std::vector<Line>& lines, std::string_view header) {
    if (lines.empty()) {
        throw NoData("empty file");
    }
    auto got = std::string(lines.front().text);
    if (got.size() >= 3 && got.compare(0, 3, "\xEF\xBB\xBF") == 0) {
        got.erase(0, 3);
    }
    if (got != header) {
        throw ParseError("expected header '" + std::string(header) + "', got '" + got + "'", lines.front().number);
    }
}

std::int64_t parse_count(std::string_view s, std::size_t line) {
    std::int64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ParseError("malformed count '" + std::string(s) + "'", line);
    }
    if (v < 0) {
        throw ParseError("negative count " + std::to_string(v), line);
    }
    return v;
}

double parse_real(std::string_view s, std::size_t line) {
    if (s == "nan") {
        return std::numeric_limits<double>::quiet_NaN();
    }
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw ParseError("malformed number '" + std::string(s) + "'", line);
    }
    return v;
}

Date parse_date_field(std::string_view s, std::size_t line) {
    const auto d = parse_date(s);
    if (!d) {
        throw ParseError("malformed date '" + std::string(s) + "'", line);
    }
    return *d;
}

std::vector<std::string_view> fields(const Line& line, std::size_t expected) {
    auto f = split(line.text);
    if (f.size() != expected) {
        throw ParseError("expected " + std::to_string(expected) + " fields, got " + std::to_string(f.size()),
                         line.number);
    }
    return f;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidInput("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InvalidInput("cannot write " + path.string());
    }
    out << contents;
    if (!out) {
        throw InvalidInput("write failed for " + path.string());
    }
}

LoadedDeaths parse_deaths_csv(const std::string& text, std::string location) {
    const auto lines = lines_of(text);
    expect_header(lines, "date,deaths");
    if (lines.size() < 2) {
        throw NoData("no data rows");
    }
    std::map<Date, std::int64_t> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = fields(lines[i], 2);
        const Date d = parse_date_field(f[0], lines[i].number);
        const auto n = parse_count(f[1], lines[i].number);
        if (!rows.emplace(d, n).second) {
            throw ParseError("duplicate date " + std::string(f[0]), lines[i].number);
        }
    }
    LoadedDeaths out;
    out.series.location = std::move(location);
    out.series.start_date = rows.begin()->first;
    Date expected = out.series.start_date;
    for (const auto& [d, n] : rows) {
        if (d != expected) {
            const long missing = days_between(expected, d);
            out.warnings.push_back("gap of " + std::to_string(missing) + " day(s) from " + format_date(expected) +
                                   " filled with zeros");
            out.series.counts.insert(out.series.counts.end(), static_cast<std::size_t>(missing), 0);
        }
        out.series.counts.push_back(n);
        expected = add_days(d, 1);
    }
    return out;
}

LoadedDeaths load_deaths_csv(const std::filesystem::path& path) {
    try {
        return parse_deaths_csv(read_file(path), path.stem().string());
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.line());
    } catch (const NoData& e) {
        throw NoData(path.string() + ": " + e.what());
    }
}

std::string deaths_to_csv(const DeathSeries& series) {
    std::string out = "date,deaths\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        out += format_date(series.date_of(i)) + "," + std::to_string(series.counts[i]) + "\n";
    }
    return out;
}

LoadedNpis parse_npi_csv(const std::string& text) {
    const auto lines = lines_of(text);
    expect_header(lines, "location,date,label,kind");
    std::vector<NpiRecord> records;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = fields(lines[i], 4);
        NpiRecord r;
        r.location = std::string(f[0]);
        if (r.location.empty()) {
            throw ParseError("empty location", lines[i].number);
        }
        r.date = parse_date_field(f[1], lines[i].number);
        r.label = std::string(f[2]);
        const auto kind = parse_npi_kind(f[3]);
        if (!kind) {
            throw ParseError("unknown NPI kind '" + std::string(f[3]) + "'", lines[i].number);
        }
        r.kind = *kind;
        records.push_back(std::move(r));
    }
    LoadedNpis out;
    out.records = merge_consecutive(std::move(records), 3, &out.merges);
    return out;
}

LoadedNpis load_npi_csv(const std::filesystem::path& path) {
    try {
        return parse_npi_csv(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.line());
    } catch (const NoData& e) {
        throw NoData(path.string() + ": " + e.what());
    }
}

std::string npis_to_csv(const std::vector<NpiRecord>& npis) {
    std::string out = "location,date,label,kind\n";
    for (const auto& r : npis) {
        out += r.location + "," + format_date(r.date) + "," + r.label + "," + to_string(r.kind) + "\n";
    }
    return out;
}

std::string series_to_csv(const DeathSeries& series, const FitResult& fit) {
    if (fit.incidence.size() != series.size()) {
        throw InvalidInput("series_to_csv: fit and series lengths differ");
    }
    std::string out = "date,n,lambda,j,R\n";
    for (std::size_t t = 0; t < series.size(); ++t) {
        const double r = fit.reproduction.is_defined(t) ? fit.reproduction.values[t]
                                                        : std::numeric_limits<double>::quiet_NaN();
        out += format_date(series.date_of(t)) + "," + std::to_string(series.counts[t]) + "," +
               format_double(fit.lambda[t]) + "," + format_double(fit.incidence[t]) + "," + format_double(r) +
               "\n";
    }
    return out;
}

SeriesTable parse_series_csv(const std::string& text, std::string location) {
    const auto lines = lines_of(text);
    expect_header(lines, "date,n,lambda,j,R");
    if (lines.size() < 2) {
        throw NoData("no data rows");
    }
    SeriesTable out;
    out.series.location = std::move(location);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = fields(lines[i], 5);
        const Date d = parse_date_field(f[0], lines[i].number);
        if (i == 1) {
            out.series.start_date = d;
        } else if (d != out.series.date_of(i - 1)) {
            throw ParseError("series dates must be consecutive", lines[i].number);
        }
        out.series.counts.push_back(parse_count(f[1], lines[i].number));
        out.lambda.push_back(parse_real(f[2], lines[i].number));
        out.incidence.push_back(parse_real(f[3], lines[i].number));
        const double r = parse_real(f[4], lines[i].number);
        out.reproduction.values.push_back(r);
        out.reproduction.defined.push_back(std::isnan(r) ? 0 : 1);
    }
    return out;
}

SeriesTable load_series_csv(const std::filesystem::path& path) {
    auto stem = path.stem().string();
    const std::string suffix = "_series";
    if (stem.size() > suffix.size() && stem.compare(stem.size() - suffix.size(), suffix.size(), suffix) == 0) {
        stem.erase(stem.size() - suffix.size());
    }
    try {
        return parse_series_csv(read_file(path), stem);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what(), e.line());
    }
}

std::string sweep_to_csv(const SweepResult& sweep) {
    std::string out = "gamma,location,k,data_loss,dynamics_loss,aic_default,aic_literal,converged,poisson_loglik\n";
    for (std::size_t g = 0; g < sweep.grid.size(); ++g) {
        for (std::size_t l = 0; l < sweep.locations.size(); ++l) {
            const auto& cell = sweep.cells[g][l];
            out += format_double(sweep.grid.values[g]) + "," + sweep.locations[l] + ",";
            if (!cell.fit) {
                out += ",,,,,false,\n";
                continue;
            }
            const auto& fit = *cell.fit;
            const double t = static_cast<double>(fit.incidence.size());
            const double k = static_cast<double>(cell.k);
            out += std::to_string(cell.k) + "," + format_double(fit.losses.data) + "," +
                   format_double(fit.losses.dynamics) + "," + format_double(2.0 * k + 2.0 * t * fit.losses.data) +
                   "," + format_double(2.0 * k - 2.0 * t * fit.losses.data) + "," +
                   (fit.converged ? "true" : "false") + "," + format_double(cell.poisson_loglik) + "\n";
        }
    }
    return out;
}

std::vector<SweepRow> parse_sweep_csv(const std::string& text) {
    const auto lines = lines_of(text);
    expect_header(lines, "gamma,location,k,data_loss,dynamics_loss,aic_default,aic_literal,converged,poisson_loglik");
    std::vector<SweepRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = fields(lines[i], 9);
        const auto line = lines[i].number;
        SweepRow r;
        r.gamma = parse_real(f[0], line);
        r.location = std::string(f[1]);
        if (f[7] != "true" && f[7] != "false") {
            throw ParseError("converged must be true or false", line);
        }
        r.converged = f[7] == "true";
        r.failed = f[2].empty();
        if (!r.failed) {
            r.k = static_cast<std::size_t>(parse_count(f[2], line));
            r.data_loss = parse_real(f[3], line);
            r.dynamics_loss = parse_real(f[4], line);
            r.aic_default = parse_real(f[5], line);
            r.aic_literal = parse_real(f[6], line);
        }
        rows.push_back(std::move(r));
    }
    if (rows.empty()) {
        throw NoData("no sweep rows");
    }
    return rows;
}

SweepResult sweep_from_rows(const std::vector<SweepRow>& rows) {
    SweepResult out;
    for (const auto& r : rows) {
        if (out.grid.values.empty() || out.grid.values.back() != r.gamma) {
            if (std::find(out.grid.values.begin(), out.grid.values.end(), r.gamma) != out.grid.values.end()) {
                throw InvalidInput("sweep rows are not grouped by gamma");
            }
            out.grid.values.push_back(r.gamma);
            out.aic.emplace_back();
        }
        if (out.grid.values.size() == 1) {
            out.locations.push_back(r.location);
        }
        auto& a = out.aic.back();
        if (r.failed || !r.converged) {
            ++a.excluded;
            continue;
        }
        a.default_form += r.aic_default;
        a.literal_form += r.aic_literal;
        ++a.included;
    }
    return out;
}

namespace {

using Json = nlohmann::json;

double get_real(const Json& v, const std::string& key) {
    if (!v.is_number()) {
        throw ConfigError("config key '" + key + "' must be a number");
    }
    return v.get<double>();
}

std::size_t get_count(const Json& v, const std::string& key) {
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
        throw ConfigError("config key '" + key + "' must be an integer");
    }
    const auto x = v.get<std::int64_t>();
    if (x < 0) {
        throw ConfigError("config key '" + key + "' must be non-negative");
    }
    return static_cast<std::size_t>(x);
}

std::string get_string(const Json& v, const std::string& key) {
    if (!v.is_string()) {
        throw ConfigError("config key '" + key + "' must be a string");
    }
    return v.get<std::string>();
}

bool get_bool(const Json& v, const std::string& key) {
    if (!v.is_boolean()) {
        throw ConfigError("config key '" + key + "' must be true or false");
    }
    return v.get<bool>();
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    RunConfig c;
    for (const auto& [key, v] : j.items()) {
        if (key == "deaths") {
            if (v.is_string()) {
                c.deaths.push_back(resolve(base_dir, v.get<std::string>()));
            } else if (v.is_array()) {
                for (const auto& item : v) {
                    c.deaths.push_back(resolve(base_dir, get_string(item, key)));
                }
            } else {
                throw ConfigError("config key 'deaths' must be a path or a list of paths");
            }
        } else if (key == "npis") {
            c.npis = resolve(base_dir, get_string(v, key));
        } else if (key == "out") {
            c.out = resolve(base_dir, get_string(v, key));
        } else if (key == "death_mean") {
            c.death_mean = get_real(v, key);
        } else if (key == "death_sd") {
            c.death_sd = get_real(v, key);
        } else if (key == "death_length") {
            c.death_length = get_count(v, key);
        } else if (key == "gen_mean") {
            c.gen_mean = get_real(v, key);
        } else if (key == "gen_sd") {
            c.gen_sd = get_real(v, key);
        } else if (key == "gen_length") {
            c.gen_length = get_count(v, key);
        } else if (key == "grid_min") {
            c.grid_min = get_real(v, key);
        } else if (key == "grid_max") {
            c.grid_max = get_real(v, key);
        } else if (key == "grid_count") {
            c.grid_count = get_count(v, key);
        } else if (key == "gamma") {
            if (!v.is_null()) {
                c.gamma = get_real(v, key);
            }
        } else if (key == "max_iterations") {
            c.fit.max_iterations = get_count(v, key);
        } else if (key == "step_size") {
            c.fit.step_size = get_real(v, key);
        } else if (key == "final_step_size") {
            c.fit.final_step_size = get_real(v, key);
        } else if (key == "convergence_tol") {
            c.fit.convergence_tol = get_real(v, key);
        } else if (key == "convergence_window") {
            c.fit.convergence_window = get_count(v, key);
        } else if (key == "seed") {
            c.fit.rng_seed = get_count(v, key);
        } else if (key == "smooth_abs_epsilon") {
            c.fit.smooth_abs_epsilon = get_real(v, key);
        } else if (key == "log_guard") {
            c.fit.log_guard = get_real(v, key);
        } else if (key == "likelihood") {
            const auto s = get_string(v, key);
            if (s == "saturated") {
                c.fit.likelihood = Likelihood::saturated;
            } else if (s == "exact") {
                c.fit.likelihood = Likelihood::exact;
            } else {
                throw ConfigError("likelihood must be saturated or exact");
            }
        } else if (key == "early_trend_constraint") {
            c.fit.early_trend_constraint = get_bool(v, key);
        } else if (key == "trend_window") {
            c.fit.trend_window = get_count(v, key);
        } else if (key == "selection_mode") {
            const auto mode = parse_selection_mode(get_string(v, key));
            if (!mode) {
                throw ConfigError("selection_mode must be aic_default, aic_literal or retrospective");
            }
            c.selection = *mode;
        } else if (key == "parallelism") {
            c.parallelism = static_cast<unsigned>(get_count(v, key));
        } else if (key == "npi_window") {
            c.npi_window = get_count(v, key);
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    return parse_run_config(read_file(path), path.parent_path());
}

void RunConfig::validate() const {
    if (deaths.empty()) {
        throw ConfigError("no deaths CSV given");
    }
    for (const auto& p : deaths) {
        if (!std::filesystem::is_regular_file(p)) {
            throw ConfigError("deaths file not found: " + p.string());
        }
    }
    if (selection == SelectionMode::retrospective && !gamma && npis.empty()) {
        throw ConfigError("retrospective selection needs an NPI file");
    }
    if (!npis.empty() && !std::filesystem::is_regular_file(npis)) {
        throw ConfigError("NPI file not found: " + npis.string());
    }
    if (npi_window % 2 == 0) {
        throw ConfigError("npi_window must be odd");
    }
    if (out.empty()) {
        throw ConfigError("output directory is empty");
    }
    try {
        fit.validate();
        if (gamma) {
            FitConfig probe = fit;
            probe.gamma = *gamma;
            probe.validate();
        } else {
            GammaGrid::log_spaced(grid_min, grid_max, grid_count);
        }
        gamma_from_moments(death_mean, death_sd);
        gamma_from_moments(gen_mean, gen_sd);
    } catch (const InvalidParameter& e) {
        throw ConfigError(e.what());
    }
    if (death_length < 1 || gen_length < 1) {
        throw ConfigError("kernel lengths must be at least 1");
    }
}

std::string sweep_offsets_to_csv(const SweepResult& sweep, const std::vector<NpiRecord>& npis,
                                 std::size_t window) {
    std::string out = "gamma,location,npi_date,kind,detected,offset\n";
    for (std::size_t g = 0; g < sweep.grid.size(); ++g) {
        const auto report = sweep_offsets(sweep, g, npis, window);
        for (const auto& row : report.rows) {
            if (!row.in_range) {
                continue;
            }
            out += format_double(sweep.grid.values[g]) + "," + row.npi.location + "," + format_date(row.npi.date) +
                   "," + to_string(row.npi.kind) + "," + (row.detected ? "true," + std::to_string(row.offset)
                                                                       : std::string("false,")) +
                   "\n";
        }
    }
    return out;
}

std::vector<double> offset_mse_from_csv(const std::string& text, const GammaGrid& grid, std::size_t window) {
    const auto lines = lines_of(text);
    expect_header(lines, "gamma,location,npi_date,kind,detected,offset");
    std::vector<double> sum(grid.size(), 0.0);
    std::vector<std::size_t> count(grid.size(), 0);
    std::vector<std::size_t> detected(grid.size(), 0);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = fields(lines[i], 6);
        const double gamma = parse_real(f[0], lines[i].number);
        const auto it = std::find(grid.values.begin(), grid.values.end(), gamma);
        if (it == grid.values.end()) {
            throw ParseError("gamma " + std::string(f[0]) + " is not in the sweep grid", lines[i].number);
        }
        const auto g = static_cast<std::size_t>(it - grid.values.begin());
        ++count[g];
        if (f[4] != "true") {
            const auto miss = static_cast<double>(miss_offset(window));
            sum[g] += miss * miss;
            continue;
        }
        ++detected[g];
        long offset = 0;
        const auto res = std::from_chars(f[5].data(), f[5].data() + f[5].size(), offset);
        if (f[5].empty() || res.ec != std::errc() || res.ptr != f[5].data() + f[5].size()) {
            throw ParseError("malformed offset '" + std::string(f[5]) + "'", lines[i].number);
        }
        sum[g] += static_cast<double>(offset * offset);
    }
    std::vector<double> mse(grid.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (detected[g] > 0) {
            mse[g] = sum[g] / static_cast<double>(count[g]);
        }
    }
    return mse;
}

}  // namespace epideconv
