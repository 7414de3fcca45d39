#ifndef PSPIN_JSON_IO_HPP
#define PSPIN_JSON_IO_HPP

#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "pspin/hopflax.hpp"
#include "pspin/initial_condition.hpp"
#include "pspin/measures.hpp"
#include "pspin/mixture.hpp"

namespace pspin {

using json = nlohmann::json;

// {"2": 0.5, "4": 0.5} -- decimal degree keys
inline json mixture_to_json(const Mixture& m) {
    json j = json::object();
    for (const auto& [p, beta] : m.coefficients()) j[std::to_string(p)] = beta;
    return j;
}

inline Mixture mixture_from_json(const json& j) {
    if (!j.is_object()) throw std::invalid_argument("mixture json: expected an object");
    std::map<int, double> coeffs;
    for (const auto& [key, val] : j.items()) {
        std::size_t pos = 0;
        int p = 0;
        try {
            p = std::stoi(key, &pos);
        } catch (const std::exception&) {
            throw std::invalid_argument("mixture json: non-integer degree key '" + key + "'");
        }
        if (pos != key.size())
            throw std::invalid_argument("mixture json: non-integer degree key '" + key + "'");
        coeffs[p] = val.get<double>();
    }
    return Mixture(coeffs);
}

inline json measure_to_json(const DiscreteMeasure& mu) {
    return json{{"atoms", mu.atoms}, {"weights", mu.weights}};
}

inline DiscreteMeasure measure_from_json(const json& j) {
    if (!j.contains("atoms") || !j.contains("weights"))
        throw std::invalid_argument("measure json: need 'atoms' and 'weights'");
    return canonicalize(j.at("atoms").get<std::vector<double>>(),
                        j.at("weights").get<std::vector<double>>());
}

inline json law_to_json(const SingleSiteLaw& law) {
    return json{{"atoms", law.atoms}, {"probs", law.probs}};
}

inline SingleSiteLaw law_from_json(const json& j) {
    if (!j.contains("atoms") || !j.contains("probs"))
        throw std::invalid_argument("single-site law json: need 'atoms' and 'probs'");
    return SingleSiteLaw::make(j.at("atoms").get<std::vector<double>>(),
                               j.at("probs").get<std::vector<double>>());
}

inline json cdf_to_json(const MeasureCDF& cdf) {
    return json{{"breakpoints", cdf.breakpoints},
                {"values", cdf.values},
                {"interp", cdf.interp == MeasureCDF::Interp::step ? "step" : "linear"}};
}

inline MeasureCDF cdf_from_json(const json& j) {
    if (!j.contains("breakpoints") || !j.contains("values"))
        throw std::invalid_argument("cdf json: need 'breakpoints' and 'values'");
    auto interp = MeasureCDF::Interp::step;
    if (j.contains("interp")) {
        const std::string s = j.at("interp").get<std::string>();
        if (s == "linear")
            interp = MeasureCDF::Interp::linear;
        else if (s != "step")
            throw std::invalid_argument("cdf json: interp must be 'step' or 'linear'");
    }
    return MeasureCDF(j.at("breakpoints").get<std::vector<double>>(),
                      j.at("values").get<std::vector<double>>(), interp);
}

inline json hopflax_result_to_json(const HopfLaxResult& r) {
    return json{{"value", r.value},
                {"maximizer", r.maximizer},
                {"restarts", r.restarts_used},
                {"objective_evals", r.objective_evals},
                {"converged", r.converged},
                {"seed", r.seed}};
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    json j;
    in >> j;
    return j;
}

inline void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << j.dump(2) << "\n";
}

} // namespace pspin

#endif
