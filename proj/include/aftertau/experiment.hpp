#pragma once

#include "aftertau/decomposition.hpp"

#include <filesystem>
#include <string>

namespace aftertau {

struct TauConfig {
    TauKind kind = TauKind::independent;
    double rate = 1.0;  // independent: exponential rate
    double phi_m1 = 0.0, psi_m1 = 0.0, G_minus = 0.5;
    double phi_m1_singular = 0.0;  // synthetic: adds c / sqrt(T - t) to phi_m1
};

struct ExperimentConfig {
    MarketParams market;
    TauConfig tau;
    double T = 1.0;
    int n_steps = 1000;
    long n_paths = 1000;
    std::uint64_t seed = 42;
    double guard_epsilon = 0.0;  // 0: max(2 dt, 1e-4 T)
    double clamp_floor = 1e-8;
    long chunk_paths = 1000;
    std::string output_dir = "out";
    long solve_table_paths = 5;
    std::vector<double> checkpoints;  // empty: quartiles of [0, T]
    std::vector<double> candidate_multipliers{0.0, 0.5, 2.0};
    bool decompose_force = false;

    double guard() const;
    bool operator==(const ExperimentConfig&) const;
};

struct config_error : std::runtime_error {
    int line;
    std::string field;
    config_error(int line, std::string field, const std::string& what)
        : std::runtime_error(what), line(line), field(std::move(field)) {}
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& file);
std::string serialize_config(const ExperimentConfig& cfg);
std::uint64_t fnv1a64(const std::string& s);

HonestTimeModel make_model(const ExperimentConfig& cfg, const PathBundle& b);

// Each chunk is simulated from global path ids, so results do not depend on the chunk size.
void for_each_chunk(const ExperimentConfig& cfg, const std::function<void(const PathBundle&)>& f);

enum class Subcommand { simulate, solve, verify, decompose, existence };
Subcommand parse_subcommand(const std::string& s);
const char* to_string(Subcommand s);

// Returns the process exit status: 0 ok, 1 verdict fail.
int run(Subcommand sub, const ExperimentConfig& cfg, std::ostream& log);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace aftertau
