#include "rhotraj/scenario.hpp"

#include <doctest.h>

#include <cmath>
#include <string>

using namespace rhotraj;

namespace {

const char* kScenario = R"({
  "nodes": [{"x_m": 100.0, "y_m": -50.0, "tx_power_w": 0.01}, {"x_m": -20.0, "y_m": 300.0, "tx_power_w": 0.02}],
  "channel": {"beta0_db": -40.0, "noise_psd_dbm_per_hz": -169.0, "alpha": 2.0, "bandwidth_hz": 1e6},
  "uav": {"h_m": 100.0, "vmin_mps": 5.0, "vmax_mps": 30.0, "amax_mps2": 3.0, "c1": 0.03125, "c2": 1500.0},
  "horizon": {"t_s": 600.0},
  "rho": {"delta1_m": 30.0, "delta2_m": 120.0, "window_s": 120.0, "execute_s": 80.0}
})";

std::string replace(std::string text, const std::string& from, const std::string& to) {
    text.replace(text.find(from), from.size(), to);
    return text;
}

} // namespace

TEST_CASE("scenario parses and round-trips") {
    const Scenario s = parse_scenario(kScenario);
    CHECK(s.node_count() == 2);
    CHECK(s.nodes[1].position.y() == 300.0);
    CHECK(s.channel.capacity_gap_db == 0.0);
    CHECK(s.uav.gravity == 9.8);
    REQUIRE(s.rho.has_value());
    CHECK(s.rho->coarse_ratio() == 4);

    const Scenario again = parse_scenario(dump_scenario(s));
    CHECK(dump_scenario(again) == dump_scenario(s));
}

TEST_CASE("reference SNR from dB quantities") {
    const Scenario s = parse_scenario(kScenario);
    // P beta0 / (N0 B): 0.01 * 1e-4 / (10^(-169/10) mW/Hz * 1e6 Hz)
    const double noise_w = std::pow(10.0, -16.9) * 1e-3 * 1e6;
    CHECK(reference_snr(s.nodes[0], s.channel) == doctest::Approx(1e-6 / noise_w).epsilon(1e-12));
    CHECK(s.channel.alpha() == 1.0);
}

TEST_CASE("missing and mistyped fields are parse errors") {
    CHECK_THROWS_AS(parse_scenario(replace(kScenario, "\"h_m\": 100.0, ", "")), ParseError);
    CHECK_THROWS_AS(parse_scenario(replace(kScenario, "\"t_s\": 600.0", "\"t_s\": \"long\"")), ParseError);
    CHECK_THROWS_AS(parse_scenario("{ not json"), ParseError);
}

TEST_CASE("invariant violations name the field") {
    auto field_of = [](const std::string& text) {
        try {
            parse_scenario(text);
        } catch (const InvariantError& e) {
            return e.field();
        }
        return std::string("none");
    };
    CHECK(field_of(replace(kScenario, "\"vmin_mps\": 5.0", "\"vmin_mps\": 0.0")) == "uav.vmin_mps");
    CHECK(field_of(replace(kScenario, "\"vmax_mps\": 30.0", "\"vmax_mps\": 4.0")) == "uav.vmax_mps");
    CHECK(field_of(replace(kScenario, "\"delta2_m\": 120.0", "\"delta2_m\": 100.0")) == "rho.delta2_m");
    CHECK(field_of(replace(kScenario, "\"window_s\": 120.0", "\"window_s\": 60.0")) == "rho.window_s");
    CHECK(field_of(replace(kScenario, "\"tx_power_w\": 0.02", "\"tx_power_w\": -1")) == "nodes[1].tx_power_w");
}
