#pragma once
// ingest -> kernels -> sweep (or single fit) -> selection -> evaluation -> output.

#include "epideconv/errors.hpp"
#include "epideconv/io.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace epideconv {

class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct PipelineResult {
    double selected_gamma = 0.0;
    std::size_t selected_index = 0;
    SweepResult sweep;
    std::optional<OffsetReport> offsets;
    std::vector<std::filesystem::path> written;
    std::vector<std::string> log;
};

/// Runs every stage and writes artifacts into config.out. Failures surface
/// as StageError naming the stage. Progress lines go to `log` when given.
PipelineResult execute_pipeline(const RunConfig& config, std::ostream* log = nullptr);

/// execute_pipeline with errors reported on `err`; returns a process exit code.
int run_pipeline(const RunConfig& config, std::ostream& err);

}  // namespace epideconv
