#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cointerest/pipeline.hpp"

namespace cointerest::artifacts {

/// Writes `content` to `path` through a sibling temporary file and rename.
void write_atomic(const std::filesystem::path& path, std::string_view content);

nlohmann::json provenance(const PipelineConfig& config);
/// `# version=... seed=... config_hash=...` line for CSV artifacts.
std::string csv_provenance(const PipelineConfig& config);

/// Data rows of a CSV artifact: `#` lines and the header row are skipped.
std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);

/// Exclusive lock on an output directory, released on destruction.
class OutputLock {
public:
    explicit OutputLock(const std::filesystem::path& dir);
    ~OutputLock();
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    std::filesystem::path path_;
};

}  // namespace cointerest::artifacts
