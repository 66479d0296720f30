#include "rhotraj/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace rhotraj {

using nlohmann::json;

namespace {

void require(bool ok, const std::string& field, const std::string& message) {
    if (!ok) {
        throw InvariantError(field, message);
    }
}

bool finite(double x) { return std::isfinite(x); }

const json& child(const json& parent, const std::string& key, const std::string& path) {
    auto it = parent.find(key);
    if (it == parent.end()) {
        throw ParseError("missing field '" + path + key + "'");
    }
    return *it;
}

double number(const json& parent, const std::string& key, const std::string& path) {
    const json& value = child(parent, key, path);
    if (!value.is_number()) {
        throw ParseError("field '" + path + key + "' must be a number");
    }
    return value.get<double>();
}

double number_or(const json& parent, const std::string& key, const std::string& path, double fallback) {
    if (!parent.contains(key)) {
        return fallback;
    }
    return number(parent, key, path);
}

const json& object(const json& parent, const std::string& key) {
    const json& value = child(parent, key, "");
    if (!value.is_object()) {
        throw ParseError("field '" + key + "' must be an object");
    }
    return value;
}

std::size_t line_of(const std::string& text, std::size_t byte) {
    byte = std::min(byte, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(byte), '\n'));
}

} // namespace

double ChannelParams::noise_power_w() const {
    // dBm/Hz integrated over the band, then dBm -> W
    const double total_dbm = noise_psd_dbm_per_hz + 10.0 * std::log10(bandwidth_hz);
    return std::pow(10.0, (total_dbm - 30.0) / 10.0);
}

double reference_snr(const GroundNode& node, const ChannelParams& channel) {
    const double gamma = db_to_linear(channel.capacity_gap_db);
    return node.transmit_power * db_to_linear(channel.beta0_db) / (channel.noise_power_w() * gamma);
}

void validate(const ChannelParams& channel) {
    require(finite(channel.beta0_db), "channel.beta0_db", "must be finite");
    require(finite(channel.noise_psd_dbm_per_hz), "channel.noise_psd_dbm_per_hz", "must be finite");
    require(finite(channel.capacity_gap_db) && channel.capacity_gap_db >= 0.0, "channel.gamma_db",
            "capacity gap must be >= 0 dB");
    require(finite(channel.pathloss_exponent) && channel.pathloss_exponent > 0.0, "channel.alpha",
            "path-loss exponent must be > 0");
    require(finite(channel.bandwidth_hz) && channel.bandwidth_hz > 0.0, "channel.bandwidth_hz",
            "bandwidth must be > 0");
}

void validate(const UavParams& uav) {
    require(finite(uav.altitude_m) && uav.altitude_m > 0.0, "uav.h_m", "altitude must be > 0");
    require(finite(uav.v_min) && uav.v_min > 0.0, "uav.vmin_mps", "fixed-wing minimum speed must be > 0");
    require(finite(uav.v_max) && uav.v_max > uav.v_min, "uav.vmax_mps", "must exceed vmin_mps");
    require(finite(uav.a_max) && uav.a_max > 0.0, "uav.amax_mps2", "must be > 0");
    require(finite(uav.c1) && uav.c1 > 0.0, "uav.c1", "must be > 0");
    require(finite(uav.c2) && uav.c2 > 0.0, "uav.c2", "must be > 0");
    require(finite(uav.mass_kg) && uav.mass_kg >= 0.0, "uav.mass_kg", "must be >= 0");
    require(finite(uav.gravity) && uav.gravity > 0.0, "uav.g", "must be > 0");
}

void validate(const GroundNode& node, std::size_t index) {
    const std::string prefix = "nodes[" + std::to_string(index) + "]";
    require(node.position.allFinite(), prefix + ".x_m/y_m", "position must be finite");
    require(finite(node.transmit_power) && node.transmit_power > 0.0, prefix + ".tx_power_w",
            "transmit power must be > 0");
}

void validate(const RhoConfig& cfg, double period_s) {
    require(finite(cfg.delta1_m) && cfg.delta1_m > 0.0, "rho.delta1_m", "must be > 0");
    require(finite(cfg.delta2_m) && cfg.delta2_m >= cfg.delta1_m, "rho.delta2_m", "must be >= delta1_m");
    const double ratio = cfg.delta2_m / cfg.delta1_m;
    require(std::abs(ratio - std::round(ratio)) <= 1e-9 * ratio, "rho.delta2_m",
            "must be an integer multiple of delta1_m");
    require(finite(cfg.execute_s) && cfg.execute_s > 0.0, "rho.execute_s", "must be > 0");
    require(finite(cfg.window_s) && cfg.window_s >= cfg.execute_s, "rho.window_s", "must be >= execute_s");
    require(cfg.window_s <= period_s * (1.0 + 1e-12), "rho.window_s", "must not exceed the period");
}

void validate(const Scenario& scenario) {
    require(!scenario.nodes.empty(), "nodes", "at least one ground node is required");
    for (std::size_t i = 0; i < scenario.nodes.size(); ++i) {
        validate(scenario.nodes[i], i);
    }
    validate(scenario.channel);
    validate(scenario.uav);
    require(finite(scenario.period_s) && scenario.period_s > 0.0, "horizon.t_s", "period must be > 0");
    if (scenario.rho) {
        validate(*scenario.rho, scenario.period_s);
    }
}

Scenario parse_scenario(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError("line " + std::to_string(line_of(text, e.byte)) + ": " + e.what());
    }
    if (!doc.is_object()) {
        throw ParseError("top level must be an object");
    }

    Scenario s;
    const json& nodes = child(doc, "nodes", "");
    if (!nodes.is_array()) {
        throw ParseError("field 'nodes' must be an array");
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string path = "nodes[" + std::to_string(i) + "].";
        GroundNode node;
        node.position = Vec2(number(nodes[i], "x_m", path), number(nodes[i], "y_m", path));
        node.transmit_power = number(nodes[i], "tx_power_w", path);
        s.nodes.push_back(node);
    }

    const json& ch = object(doc, "channel");
    s.channel.beta0_db = number(ch, "beta0_db", "channel.");
    s.channel.noise_psd_dbm_per_hz = number(ch, "noise_psd_dbm_per_hz", "channel.");
    s.channel.capacity_gap_db = number_or(ch, "gamma_db", "channel.", 0.0);
    s.channel.pathloss_exponent = number(ch, "alpha", "channel.");
    s.channel.bandwidth_hz = number(ch, "bandwidth_hz", "channel.");

    const json& uav = object(doc, "uav");
    s.uav.altitude_m = number(uav, "h_m", "uav.");
    s.uav.v_min = number(uav, "vmin_mps", "uav.");
    s.uav.v_max = number(uav, "vmax_mps", "uav.");
    s.uav.a_max = number(uav, "amax_mps2", "uav.");
    s.uav.c1 = number(uav, "c1", "uav.");
    s.uav.c2 = number(uav, "c2", "uav.");
    s.uav.mass_kg = number_or(uav, "mass_kg", "uav.", 0.0);
    s.uav.gravity = number_or(uav, "g", "uav.", 9.8);

    s.period_s = number(object(doc, "horizon"), "t_s", "horizon.");

    if (doc.contains("rho")) {
        const json& rho = object(doc, "rho");
        RhoConfig cfg;
        cfg.delta1_m = number(rho, "delta1_m", "rho.");
        cfg.delta2_m = number(rho, "delta2_m", "rho.");
        cfg.window_s = number(rho, "window_s", "rho.");
        cfg.execute_s = number(rho, "execute_s", "rho.");
        s.rho = cfg;
    }

    validate(s);
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::filesystem::filesystem_error("cannot open scenario file", path,
                                                std::make_error_code(std::errc::no_such_file_or_directory));
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_scenario(buffer.str());
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

std::string dump_scenario(const Scenario& s) {
    json doc;
    doc["nodes"] = json::array();
    for (const auto& node : s.nodes) {
        doc["nodes"].push_back({{"x_m", node.position.x()}, {"y_m", node.position.y()}, {"tx_power_w", node.transmit_power}});
    }
    doc["channel"] = {{"beta0_db", s.channel.beta0_db},
                      {"noise_psd_dbm_per_hz", s.channel.noise_psd_dbm_per_hz},
                      {"gamma_db", s.channel.capacity_gap_db},
                      {"alpha", s.channel.pathloss_exponent},
                      {"bandwidth_hz", s.channel.bandwidth_hz}};
    doc["uav"] = {{"h_m", s.uav.altitude_m}, {"vmin_mps", s.uav.v_min}, {"vmax_mps", s.uav.v_max},
                  {"amax_mps2", s.uav.a_max}, {"c1", s.uav.c1},        {"c2", s.uav.c2},
                  {"mass_kg", s.uav.mass_kg},  {"g", s.uav.gravity}};
    doc["horizon"] = {{"t_s", s.period_s}};
    if (s.rho) {
        doc["rho"] = {{"delta1_m", s.rho->delta1_m},
                      {"delta2_m", s.rho->delta2_m},
                      {"window_s", s.rho->window_s},
                      {"execute_s", s.rho->execute_s}};
    }
    return doc.dump(2);
}

void save_scenario(const Scenario& scenario, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << dump_scenario(scenario) << '\n';
}

} // namespace rhotraj
