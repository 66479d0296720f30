#ifndef RHOTRAJ_SCENARIO_HPP
#define RHOTRAJ_SCENARIO_HPP

#include "rhotraj/errors.hpp"

#include <Eigen/Core>

#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rhotraj {

using Vec2 = Eigen::Vector2d;

struct GroundNode {
    Vec2 position = Vec2::Zero();  // m
    double transmit_power = 0.01;  // W
};

struct ChannelParams {
    double beta0_db = -40.0;
    double noise_psd_dbm_per_hz = -169.0;
    double capacity_gap_db = 0.0;   // Gamma
    double pathloss_exponent = 2.0; // alpha tilde; the rate model uses alpha = alpha tilde / 2
    double bandwidth_hz = 1e6;

    double alpha() const { return 0.5 * pathloss_exponent; }
    /// Total receiver noise power over the bandwidth, in watts.
    double noise_power_w() const;
};

struct UavParams {
    double altitude_m = 100.0;
    double v_min = 5.0;
    double v_max = 30.0;
    double a_max = 3.0;
    double c1 = 0.03125;
    double c2 = 1500.0;
    double mass_kg = 0.0;
    double gravity = 9.8;
};

/// Receding-horizon discretization settings.
struct RhoConfig {
    double delta1_m = 30.0;  // fine segment length
    double delta2_m = 120.0; // coarse segment length, integer multiple of delta1_m
    double window_s = 120.0;
    double execute_s = 80.0;

    int coarse_ratio() const { return static_cast<int>(std::lround(delta2_m / delta1_m)); }
};

struct Scenario {
    std::vector<GroundNode> nodes;
    ChannelParams channel;
    UavParams uav;
    double period_s = 600.0;
    std::optional<RhoConfig> rho;

    std::size_t node_count() const { return nodes.size(); }
};

void validate(const ChannelParams& channel);
void validate(const UavParams& uav);
void validate(const GroundNode& node, std::size_t index);
/// Checks the RHO settings against a horizon of `period_s`.
void validate(const RhoConfig& cfg, double period_s);
/// Validates every field, including the optional RHO block.
void validate(const Scenario& scenario);

Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(const std::string& text);
std::string dump_scenario(const Scenario& scenario);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

/// Reference SNR at 1 m: P * beta0 / (sigma^2 * Gamma), linear scale.
double reference_snr(const GroundNode& node, const ChannelParams& channel);

} // namespace rhotraj

#endif
