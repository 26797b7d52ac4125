#pragma once

#include <map>
#include <string>

#include "json.hpp"

#include "diffmart/diffusion.hpp"
#include "diffmart/errors.hpp"
#include "diffmart/expression.hpp"

namespace diffmart {

// Diffusion config schema (JSON):
//   {"family": "bessel", "params": {"delta": 3, "x0": 1}}
// or
//   {"custom": {"drift": "1/x", "volatility": "1",
//               "interval": [0, "inf"], "reference_point": 1}}
// Interval endpoints are numbers or the strings "inf" / "+inf" / "-inf".
// Unknown fields are rejected by name.

inline double json_endpoint(const nlohmann::json& v, const char* which) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf" || s == "+inf") return kInf;
        if (s == "-inf") return -kInf;
    }
    throw ConfigError(std::string("config: interval ") + which +
                      " must be a number or \"inf\"/\"-inf\", got " + v.dump());
}

inline DiffusionSpec spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
    for (const auto& [k, v] : j.items()) {
        (void)v;
        if (k != "family" && k != "params" && k != "custom")
            throw ConfigError("config: unknown field " + k);
    }
    const bool has_family = j.contains("family");
    const bool has_custom = j.contains("custom");
    if (has_family == has_custom)
        throw ConfigError("config: exactly one of 'family' or 'custom' is required");

    if (has_family) {
        if (!j.at("family").is_string()) throw ConfigError("config: family must be a string");
        std::map<std::string, double> params;
        if (j.contains("params")) {
            const auto& jp = j.at("params");
            if (!jp.is_object()) throw ConfigError("config: params must be an object");
            for (const auto& [k, v] : jp.items()) {
                if (!v.is_number())
                    throw ConfigError("config: parameter " + k + " must be a number, got " + v.dump());
                params[k] = v.get<double>();
            }
        }
        return catalog(j.at("family").get<std::string>(), params);
    }

    if (j.contains("params"))
        throw ConfigError("config: params is only valid together with family");
    const auto& jc = j.at("custom");
    if (!jc.is_object()) throw ConfigError("config: custom must be an object");
    for (const auto& [k, v] : jc.items()) {
        (void)v;
        if (k != "drift" && k != "volatility" && k != "interval" && k != "reference_point" &&
            k != "alpha_included" && k != "beta_included")
            throw ConfigError("config: unknown custom field " + k);
    }
    for (const char* req : {"drift", "volatility", "interval"})
        if (!jc.contains(req))
            throw ConfigError(std::string("config: custom is missing field ") + req);
    if (!jc.at("drift").is_string())
        throw ConfigError("config: drift must be an expression string");
    if (!jc.at("volatility").is_string())
        throw ConfigError("config: volatility must be an expression string");
    const auto& ji = jc.at("interval");
    if (!ji.is_array() || ji.size() != 2)
        throw ConfigError("config: interval must be an array [lower, upper]");

    DiffusionSpec spec;
    spec.name = "custom";
    spec.interval.alpha = json_endpoint(ji[0], "lower endpoint");
    spec.interval.beta = json_endpoint(ji[1], "upper endpoint");
    auto flag = [&jc](const char* key) {
        if (!jc.contains(key)) return false;
        if (!jc.at(key).is_boolean())
            throw ConfigError(std::string("config: ") + key + " must be a boolean");
        return jc.at(key).get<bool>();
    };
    spec.interval.alpha_included = flag("alpha_included");
    spec.interval.beta_included = flag("beta_included");
    spec.interval.validate();
    spec.drift = Expression::parse(jc.at("drift").get<std::string>());
    spec.volatility = Expression::parse(jc.at("volatility").get<std::string>());
    if (jc.contains("reference_point")) {
        if (!jc.at("reference_point").is_number())
            throw ConfigError("config: reference_point must be a number");
        spec.reference_point = jc.at("reference_point").get<double>();
    } else {
        spec.reference_point = default_reference_point(spec.interval);
    }
    spec.validate();
    return spec;
}

inline DiffusionSpec spec_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return spec_from_json(j);
}

} // namespace diffmart
