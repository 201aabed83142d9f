#pragma once

// CSV/JSON artifact helpers shared by the CLI and tests: fixed 17-digit float
// formatting and fixed row order keep re-runs byte-identical.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace dgw {

std::string fmt17(double v);

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    void row(const std::vector<std::string>& cells);
    void row_values(const std::vector<double>& vals);

private:
    std::ofstream os_;
    size_t ncols_;
};

uint64_t fnv1a(const std::string& s);

// provenance sidecar: config + config hash + tool version + free-form extras
void write_sidecar(const std::string& path, const nlohmann::json& config,
                   const nlohmann::json& extra = {});

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dgw
