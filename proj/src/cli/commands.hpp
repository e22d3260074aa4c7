#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>

namespace microfarm::cli {

struct Globals {
    std::uint64_t seed = 42;
    bool seed_given = false;
    std::string out;
    bool quiet = false;
};

struct PipelineOptions {
    std::size_t devices = 2;
    std::uint32_t readings = 100;
    std::size_t soils = 2000;
    double sparsity = 0.4;
    std::size_t retrain_period = 100;
    std::size_t top_n = 3;
    std::string kind = "gradient_boost";
};

int cmd_pipeline_demo(const Globals& g, const PipelineOptions& opt, std::ostream& out);

std::filesystem::path out_dir(const Globals& g, const char* fallback);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace microfarm::cli
