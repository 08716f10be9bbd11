#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "error.hpp"
#include "mission.hpp"
#include "protocols.hpp"

namespace stalkprobe::harness {

using json = nlohmann::ordered_json;

struct ExperimentConfig {
    std::string scenario = "default";
    int n_missions = 1;
    std::uint64_t base_seed = 1;
    std::string out_dir = "out"; ///< where outputs go; not part of the embedded config
    mission::ScenarioConfig model;
    CalibrationCampaign campaign;
    ReplacementBench replacement;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

namespace config_detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    const auto e = s.find_last_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    s = s.substr(b, e - b + 1);
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

template <class T>
T parse_text(const std::string& name, const std::string& raw) {
    const std::string text = trim(raw);
    auto fail = [&](std::string_view expected) {
        return ConfigError("field '" + name + "': expected " + std::string(expected) + ", got '" + text + "'");
    };
    if constexpr (std::is_same_v<T, bool>) {
        if (text == "true" || text == "1") return true;
        if (text == "false" || text == "0") return false;
        throw fail("true|false");
    } else if constexpr (std::is_same_v<T, std::string>) {
        return text;
    } else if constexpr (std::is_same_v<T, geometry::GradientModel>) {
        if (text == "linear") return geometry::GradientModel::Linear;
        if (text == "compound") return geometry::GradientModel::Compound;
        throw fail("linear|compound");
    } else if constexpr (std::is_same_v<T, calibration::Polarity>) {
        if (text == "negative") return calibration::Polarity::Negative;
        if (text == "positive") return calibration::Polarity::Positive;
        throw fail("negative|positive");
    } else {
        T value{};
        const auto* first = text.data();
        const auto* last = text.data() + text.size();
        const auto [ptr, ec] = std::from_chars(first, last, value);
        if (text.empty() || ec != std::errc() || ptr != last)
            throw fail(std::is_floating_point_v<T> ? "number" : "integer");
        return value;
    }
}

template <class T>
json to_json_value(const T& v) {
    if constexpr (std::is_same_v<T, geometry::GradientModel>) {
        return v == geometry::GradientModel::Linear ? "linear" : "compound";
    } else if constexpr (std::is_same_v<T, calibration::Polarity>) {
        return v == calibration::Polarity::Negative ? "negative" : "positive";
    } else {
        return json(v);
    }
}

template <class T>
T from_json_value(const std::string& name, const json& j) {
    try {
        if constexpr (std::is_same_v<T, geometry::GradientModel> || std::is_same_v<T, calibration::Polarity>)
            return parse_text<T>(name, j.get<std::string>());
        else
            return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError("field '" + name + "': wrong JSON type");
    }
}

} // namespace config_detail

struct ConfigField {
    std::string section;
    std::string key;
    std::function<void(ExperimentConfig&, const std::string&)> set_text;
    std::function<void(ExperimentConfig&, const json&)> set_json;
    std::function<json(const ExperimentConfig&)> get;

    std::string name() const { return section + "." + key; }
};

template <class Access>
ConfigField make_field(std::string section, std::string key, Access access) {
    using T = std::remove_cvref_t<decltype(access(std::declval<ExperimentConfig&>()))>;
    const std::string name = section + "." + key;
    return {std::move(section), std::move(key),
            [=](ExperimentConfig& c, const std::string& text) {
                access(c) = config_detail::parse_text<T>(name, text);
            },
            [=](ExperimentConfig& c, const json& j) { access(c) = config_detail::from_json_value<T>(name, j); },
            [=](const ExperimentConfig& c) { return config_detail::to_json_value<T>(access(c)); }};
}

#define STALKPROBE_FIELD(section, key, expr) \
    make_field(section, key, [](auto& c) -> auto& { return c.expr; })

/// Every configurable key, in report order.
inline const std::vector<ConfigField>& config_schema() {
    static const std::vector<ConfigField> schema = {
        STALKPROBE_FIELD("experiment", "scenario", scenario),
        STALKPROBE_FIELD("experiment", "n_missions", n_missions),
        STALKPROBE_FIELD("experiment", "base_seed", base_seed),

        STALKPROBE_FIELD("field", "n_rows", model.field.n_rows),
        STALKPROBE_FIELD("field", "row_spacing_m", model.field.row_spacing_m),
        STALKPROBE_FIELD("field", "stalk_spacing_m", model.field.stalk_spacing_m),
        STALKPROBE_FIELD("field", "position_jitter_m", model.field.position_jitter_m),
        STALKPROBE_FIELD("field", "mean_diameter_mm", model.field.mean_diameter_mm),
        STALKPROBE_FIELD("field", "diameter_sd_mm", model.field.diameter_sd_mm),
        STALKPROBE_FIELD("field", "diameter_min_mm", model.field.diameter_band_mm.lo),
        STALKPROBE_FIELD("field", "diameter_max_mm", model.field.diameter_band_mm.hi),
        STALKPROBE_FIELD("field", "aspect_min", model.field.aspect_ratio.lo),
        STALKPROBE_FIELD("field", "aspect_max", model.field.aspect_ratio.hi),
        STALKPROBE_FIELD("field", "pith_scale", model.field.pith_scale),
        STALKPROBE_FIELD("field", "mean_height_cm", model.field.mean_height_cm),
        STALKPROBE_FIELD("field", "height_sd_cm", model.field.height_sd_cm),
        STALKPROBE_FIELD("field", "mean_ground_nitrate_ppm", model.field.mean_ground_nitrate_ppm),
        STALKPROBE_FIELD("field", "ground_nitrate_sd_ppm", model.field.ground_nitrate_sd_ppm),
        STALKPROBE_FIELD("field", "leaf_sites_per_stalk", model.field.leaf_sites_per_stalk),
        STALKPROBE_FIELD("field", "leaf_offset_min_m", model.field.leaf_offset_m.lo),
        STALKPROBE_FIELD("field", "leaf_offset_max_m", model.field.leaf_offset_m.hi),

        STALKPROBE_FIELD("sensor", "spike_width_mm", model.sensor.spike_width_mm),
        STALKPROBE_FIELD("sensor", "spike_length_mm", model.sensor.spike_length_mm),
        STALKPROBE_FIELD("sensor", "spike_thickness_mm", model.sensor.spike_thickness_mm),
        STALKPROBE_FIELD("sensor", "electrode_near_tip_mm", model.sensor.electrode_near_tip_mm),
        STALKPROBE_FIELD("sensor", "electrode_separation_mm", model.sensor.electrode_separation_mm),
        STALKPROBE_FIELD("sensor", "required_depth_mm", model.sensor.required_depth_mm),
        STALKPROBE_FIELD("sensor", "height_band_min_cm", model.sensor.insertion_height_band_cm.lo),
        STALKPROBE_FIELD("sensor", "height_band_max_cm", model.sensor.insertion_height_band_cm.hi),

        STALKPROBE_FIELD("gradient", "model", model.gradient.model),
        STALKPROBE_FIELD("gradient", "decay_per_cm", model.gradient.decay_per_cm),

        STALKPROBE_FIELD("kinematics", "stroke_mm", model.kinematics.stroke_mm),
        STALKPROBE_FIELD("kinematics", "lever_phase_end_mm", model.kinematics.lever_phase_end_mm),
        STALKPROBE_FIELD("kinematics", "grasp_phase_end_mm", model.kinematics.grasp_phase_end_mm),
        STALKPROBE_FIELD("kinematics", "max_finger_gap_mm", model.kinematics.max_finger_gap_mm),
        STALKPROBE_FIELD("kinematics", "insertion_travel_mm", model.kinematics.insertion_travel_mm),
        STALKPROBE_FIELD("kinematics", "grasp_min_diameter_mm", model.kinematics.grasp_min_diameter_mm),
        STALKPROBE_FIELD("kinematics", "grasp_max_diameter_mm", model.kinematics.grasp_max_diameter_mm),
        STALKPROBE_FIELD("kinematics", "centering_gain", model.kinematics.centering_gain),
        STALKPROBE_FIELD("kinematics", "centering_noise_sigma_mm", model.kinematics.centering_noise_sigma_mm),
        STALKPROBE_FIELD("kinematics", "tip_standoff_mm", model.kinematics.tip_standoff_mm),

        STALKPROBE_FIELD("funnel", "slot_width_mm", model.funnel.slot_width_mm),
        STALKPROBE_FIELD("funnel", "slot_height_mm", model.funnel.slot_height_mm),
        STALKPROBE_FIELD("funnel", "tip_area_ratio", model.funnel.tip_area_ratio),
        STALKPROBE_FIELD("funnel", "slot_tolerance_mm", model.funnel.slot_tolerance_mm),
        STALKPROBE_FIELD("funnel", "contact_width_mm", model.funnel.contact_width_mm),
        STALKPROBE_FIELD("funnel", "contact_height_mm", model.funnel.contact_height_mm),

        STALKPROBE_FIELD("arm", "sigma_xy_mm", model.arm.sigma_xy_mm),
        STALKPROBE_FIELD("arm", "sigma_insert_offset_mm", model.arm.sigma_insert_offset_mm),
        STALKPROBE_FIELD("arm", "p_stuck", model.arm.p_stuck),

        STALKPROBE_FIELD("sensor_response", "slope_v_per_ppm", model.response.true_slope_v_per_ppm),
        STALKPROBE_FIELD("sensor_response", "intercept_v", model.response.true_intercept_v),
        STALKPROBE_FIELD("sensor_response", "noise_sigma_v", model.response.noise_sigma_v),
        STALKPROBE_FIELD("sensor_response", "wear_base_fail_p", model.response.wear_base_fail_p),
        STALKPROBE_FIELD("sensor_response", "wear_per_insert_p", model.response.wear_per_insert_p),
        STALKPROBE_FIELD("sensor_response", "flat_given_failure_p", model.response.flat_given_failure_p),

        STALKPROBE_FIELD("calibration", "low_ppm", model.station.concentrations_ppm[1]),
        STALKPROBE_FIELD("calibration", "high_ppm", model.station.concentrations_ppm[2]),
        STALKPROBE_FIELD("calibration", "dwell_s", model.station.dwell_s),
        STALKPROBE_FIELD("calibration", "flat_epsilon_v", model.station.flat_epsilon_v),
        STALKPROBE_FIELD("calibration", "polarity", model.station.polarity),

        STALKPROBE_FIELD("detection", "p_leaf_false_positive", model.detection.p_leaf_false_positive),
        STALKPROBE_FIELD("detection", "width_noise_sigma_mm", model.detection.width_noise_sigma_mm),
        STALKPROBE_FIELD("detection", "position_noise_sigma_mm", model.detection.position_noise_sigma_mm),
        STALKPROBE_FIELD("detection", "max_detect_range_m", model.detection.max_detect_range_m),

        STALKPROBE_FIELD("selection", "w_distance", model.weights.distance),
        STALKPROBE_FIELD("selection", "w_confidence", model.weights.confidence),
        STALKPROBE_FIELD("selection", "w_width", model.weights.width),

        STALKPROBE_FIELD("sweep", "increment_deg", model.sweep.increment_deg),
        STALKPROBE_FIELD("sweep", "n_views", model.sweep.n_views),

        STALKPROBE_FIELD("mission", "n_stalks", model.mission.n_stalks),
        STALKPROBE_FIELD("mission", "replace_every", model.mission.replace_every),
        STALKPROBE_FIELD("mission", "magazine_capacity", model.mission.magazine_capacity),
        STALKPROBE_FIELD("mission", "load_on_start", model.mission.load_on_start),
        STALKPROBE_FIELD("mission", "load_retries", model.mission.load_retries),
        STALKPROBE_FIELD("mission", "insertion_height_target_cm", model.mission.insertion_height_target_cm),
        STALKPROBE_FIELD("mission", "height_noise_sigma_cm", model.mission.height_noise_sigma_cm),
        STALKPROBE_FIELD("mission", "heading_noise_sigma_deg", model.mission.heading_noise_sigma_deg),
        STALKPROBE_FIELD("mission", "sensor_slope_rel_sd", model.mission.sensor_slope_rel_sd),
        STALKPROBE_FIELD("mission", "sensor_intercept_sd_v", model.mission.sensor_intercept_sd_v),

        STALKPROBE_FIELD("calibration_protocol", "n_runs", campaign.n_runs),
        STALKPROBE_FIELD("calibration_protocol", "n_sensors", campaign.n_sensors),
        STALKPROBE_FIELD("calibration_protocol", "inserts_between_uses", campaign.inserts_between_uses),
        STALKPROBE_FIELD("calibration_protocol", "repetitions", campaign.repetitions),

        STALKPROBE_FIELD("replacement_bench", "iterations", replacement.iterations),
        STALKPROBE_FIELD("replacement_bench", "sigma_xy_mm", replacement.sigma_xy_mm),
        STALKPROBE_FIELD("replacement_bench", "magazine_capacity", replacement.magazine_capacity),
    };
    return schema;
}

#undef STALKPROBE_FIELD

inline const ConfigField* find_field(const std::string& section, const std::string& key) {
    for (const auto& f : config_schema())
        if (f.section == section && f.key == key) return &f;
    return nullptr;
}

inline void validate(const ExperimentConfig& c) {
    if (c.n_missions < 1) throw ConfigError("field 'experiment.n_missions': must be >= 1");
    try {
        mission::validate(c.model);
    } catch (const Error& e) {
        throw ConfigError("invalid model parameters: " + e.detail());
    }
    if (c.campaign.n_runs < 1 || c.campaign.n_sensors < 1 || c.campaign.repetitions < 0 ||
        c.campaign.inserts_between_uses < 0)
        throw ConfigError("section 'calibration_protocol': sizes must be positive");
    if (c.replacement.iterations < 0 || c.replacement.sigma_xy_mm < 0.0 || c.replacement.magazine_capacity < 1)
        throw ConfigError("section 'replacement_bench': invalid sizes");
}

/// Parses `[section]` / `key = value` text. Unknown sections or keys are errors.
inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {}) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
        pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("line " + std::to_string(e.line()) + ": " + e.message());
    }
    for (const auto& [section, body] : tree) {
        if (body.empty())
            throw ConfigError("key '" + section + "' outside of a section");
        for (const auto& [key, value] : body) {
            const auto* f = find_field(section, key);
            if (!f) throw ConfigError("unknown field '" + section + "." + key + "'");
            f->set_text(base, value.data());
        }
    }
    validate(base);
    return base;
}

inline ExperimentConfig parse_config_string(const std::string& text, ExperimentConfig base = {}) {
    std::istringstream in(text);
    return parse_config(in, std::move(base));
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    try {
        return parse_config(in, std::move(base));
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.detail());
    }
}

/// Resolved configuration as {section: {key: value}}.
inline json config_to_json(const ExperimentConfig& c) {
    json out = json::object();
    for (const auto& f : config_schema()) out[f.section][f.key] = f.get(c);
    return out;
}

inline ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    if (!j.is_object()) throw ConfigError("embedded config must be an object");
    for (const auto& [section, body] : j.items()) {
        if (!body.is_object()) throw ConfigError("section '" + section + "' must be an object");
        for (const auto& [key, value] : body.items()) {
            const auto* f = find_field(section, key);
            if (!f) throw ConfigError("unknown field '" + section + "." + key + "'");
            f->set_json(c, value);
        }
    }
    validate(c);
    return c;
}

/// Config text equivalent to `c` (round-trips through parse_config).
inline std::string config_to_text(const ExperimentConfig& c) {
    std::ostringstream os;
    std::string current;
    for (const auto& f : config_schema()) {
        if (f.section != current) {
            os << (current.empty() ? "" : "\n") << '[' << f.section << "]\n";
            current = f.section;
        }
        const json v = f.get(c);
        os << f.key << " = " << (v.is_string() ? v.get<std::string>() : v.dump()) << '\n';
    }
    return os.str();
}

} // namespace stalkprobe::harness
