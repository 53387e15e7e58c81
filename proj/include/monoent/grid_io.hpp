#pragma once

// JSON function files: { "d": int, "m": int, "orientation": [str], "values": [float] },
// values row-major with axis 0 slowest.

#include <fstream>
#include <string>

#include <json.hpp>

#include "grid_fn.hpp"

namespace monoent {

inline nlohmann::json to_json(const MonotoneGridFunction& f) {
    nlohmann::json j;
    j["d"] = f.d;
    j["m"] = f.m;
    auto& o = j["orientation"] = nlohmann::json::array();
    for (auto x : f.orientation) o.push_back(to_string(x));
    j["values"] = f.values;
    return j;
}

inline MonotoneGridFunction function_from_json(const nlohmann::json& j) {
    try {
        MonotoneGridFunction f;
        f.d = j.at("d").get<int>();
        f.m = j.at("m").get<int>();
        check_shape(f.d, f.m);
        for (const auto& o : j.at("orientation")) f.orientation.push_back(orientation_from_string(o.get<std::string>()));
        if (static_cast<int>(f.orientation.size()) != f.d)
            throw ValidationError("orientation list must have d entries");
        f.values = j.at("values").get<std::vector<double>>();
        if (f.values.size() != f.shape().cells())
            throw ValidationError("values array has " + std::to_string(f.values.size()) + " entries, expected " +
                                  std::to_string(f.shape().cells()));
        return f;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed function file: ") + e.what());
    } catch (const DomainError& e) {
        throw ValidationError(e.what());
    }
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline MonotoneGridFunction read_function_file(const std::string& path) {
    return function_from_json(read_json_file(path));
}

inline void write_function_file(const std::string& path, const MonotoneGridFunction& f) {
    write_json_file(path, to_json(f));
}

} // namespace monoent
