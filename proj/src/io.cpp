#include "dgw/io.hpp"

#include <cstdio>
#include <stdexcept>

namespace dgw {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : os_(path), ncols_(header.size()) {
    if (!os_) throw std::runtime_error("CsvWriter: cannot open " + path);
    for (size_t i = 0; i < header.size(); ++i)
        os_ << header[i] << (i + 1 < header.size() ? "," : "\n");
}

void CsvWriter::row(const std::vector<std::string>& cells) {
    if (cells.size() != ncols_)
        throw std::invalid_argument("CsvWriter: wrong number of cells");
    for (size_t i = 0; i < cells.size(); ++i)
        os_ << cells[i] << (i + 1 < cells.size() ? "," : "\n");
}

void CsvWriter::row_values(const std::vector<double>& vals) {
    std::vector<std::string> cells;
    cells.reserve(vals.size());
    for (double v : vals) cells.push_back(fmt17(v));
    row(cells);
}

uint64_t fnv1a(const std::string& s) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void write_sidecar(const std::string& path, const nlohmann::json& config,
                   const nlohmann::json& extra) {
    nlohmann::json j;
    j["config"] = config;
    char hex[20];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(fnv1a(config.dump())));
    j["config_hash"] = hex;
    j["generator"] = "dgw";
    j["version"] = kVersion;
    if (!extra.is_null()) j["run"] = extra;
    std::ofstream os(path);
    if (!os) throw std::runtime_error("write_sidecar: cannot open " + path);
    os << j.dump(2) << "\n";
}

}  // namespace dgw
