#pragma once

#include <json.hpp>

#include "geometry.hpp"

namespace stalkprobe::geometry {

inline void to_json(nlohmann::ordered_json& j, const Vec2& v) { j = nlohmann::ordered_json::array({v.x, v.y}); }
inline void from_json(const nlohmann::ordered_json& j, Vec2& v) {
    v.x = j.at(0).get<double>();
    v.y = j.at(1).get<double>();
}

inline void to_json(nlohmann::ordered_json& j, const StalkCrossSection& cs) {
    j = {{"semi_major_mm", cs.semi_major_mm},
         {"semi_minor_mm", cs.semi_minor_mm},
         {"orientation_deg", cs.orientation_deg},
         {"pith_scale", cs.pith_scale}};
}
inline void from_json(const nlohmann::ordered_json& j, StalkCrossSection& cs) {
    j.at("semi_major_mm").get_to(cs.semi_major_mm);
    j.at("semi_minor_mm").get_to(cs.semi_minor_mm);
    j.at("orientation_deg").get_to(cs.orientation_deg);
    j.at("pith_scale").get_to(cs.pith_scale);
}

inline void to_json(nlohmann::ordered_json& j, const StalkInstance& s) {
    j = {{"id", s.id},
         {"base_position_m", s.base_position_m},
         {"cross_section", s.cross_section},
         {"height_cm", s.height_cm},
         {"ground_nitrate_ppm", s.ground_nitrate_ppm}};
}
inline void from_json(const nlohmann::ordered_json& j, StalkInstance& s) {
    j.at("id").get_to(s.id);
    j.at("base_position_m").get_to(s.base_position_m);
    j.at("cross_section").get_to(s.cross_section);
    j.at("height_cm").get_to(s.height_cm);
    j.at("ground_nitrate_ppm").get_to(s.ground_nitrate_ppm);
}

inline void to_json(nlohmann::ordered_json& j, const FieldLayout& f) {
    j = {{"row_spacing_m", f.row_spacing_m}, {"rows", f.rows}, {"stalks", f.stalks}, {"leaf_sites", f.leaf_sites}};
}
inline void from_json(const nlohmann::ordered_json& j, FieldLayout& f) {
    j.at("row_spacing_m").get_to(f.row_spacing_m);
    j.at("rows").get_to(f.rows);
    j.at("stalks").get_to(f.stalks);
    j.at("leaf_sites").get_to(f.leaf_sites);
}

} // namespace stalkprobe::geometry
