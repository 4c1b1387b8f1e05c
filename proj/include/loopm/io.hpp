#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "loopm/chain.hpp"
#include "loopm/errors.hpp"
#include "loopm/levy.hpp"
#include "loopm/measure.hpp"
#include "loopm/perturbation.hpp"

namespace loopm {

using Json = nlohmann::ordered_json;

namespace detail {

inline double finite_number(const Json& v, const char* what) {
    if (!v.is_number()) throw ConfigInvalid(std::string(what) + ": not a number");
    const double x = v.get<double>();
    if (!std::isfinite(x))
        throw ConfigInvalid(std::string(what) + ": non-finite value");
    return x;
}

inline Vector parse_vector(const Json& arr, const char* what) {
    if (!arr.is_array()) throw ConfigInvalid(std::string(what) + ": not an array");
    Vector out(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i)
        out[static_cast<Eigen::Index>(i)] = finite_number(arr[i], what);
    return out;
}

inline Matrix parse_matrix(const Json& rows, const char* what) {
    if (!rows.is_array() || rows.empty())
        throw ConfigInvalid(std::string(what) + ": not a matrix");
    const std::size_t n_cols = rows[0].size();
    Matrix out(rows.size(), n_cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != n_cols)
            throw ConfigInvalid(std::string(what) + ": ragged rows");
        for (std::size_t j = 0; j < n_cols; ++j)
            out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                finite_number(rows[i][j], what);
    }
    return out;
}

}  // namespace detail

// Chain input file: {"Q": [[...]], "m": [...]}.
inline TransientChain load_chain(const Json& j) {
    if (!j.contains("Q") || !j.contains("m"))
        throw ConfigInvalid("chain file needs Q and m");
    return TransientChain(detail::parse_matrix(j["Q"], "Q"),
                          detail::parse_vector(j["m"], "m"));
}

inline FiniteMeasure load_measure(const Json& j) {
    if (!j.contains("weights")) throw ConfigInvalid("measure needs weights");
    return FiniteMeasure{detail::parse_vector(j["weights"], "weights")};
}

inline VectorC parse_exponent(const Json& j, int d, int n, const char* what) {
    if (j.contains("table")) {
        const auto& t = j["table"];
        VectorC out(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (t[i].is_array()) {
                out[static_cast<Eigen::Index>(i)] =
                    Complex(detail::finite_number(t[i].at(0), what),
                            detail::finite_number(t[i].at(1), what));
            } else {
                out[static_cast<Eigen::Index>(i)] =
                    detail::finite_number(t[i], what);
            }
        }
        return out;
    }
    if (!j.contains("family")) throw ConfigInvalid("exponent needs family or table");
    const std::string family = j["family"].get<std::string>();
    const Json params = j.value("params", Json::object());
    const double mass = params.value("mass", 1.0);
    if (family == "killed_walk") return killed_walk_exponent(d, n, mass);
    if (family == "relativistic")
        return relativistic_exponent(d, n, mass, params.value("index", 1.0));
    throw ConfigInvalid("unknown exponent family: " + family);
}

// Model input file: {"d":…, "N":…, "psi": {...}, "kappa": {...}}.
inline LevyTorusModel load_levy_model(const Json& j) {
    const int d = j.at("d").get<int>();
    const int n = j.at("N").get<int>();
    VectorC psi = parse_exponent(j.at("psi"), d, n, "psi");
    std::optional<VectorC> kappa;
    if (j.contains("kappa"))
        kappa = parse_exponent(j["kappa"], d, n, "kappa");
    return LevyTorusModel(d, n, std::move(psi), std::move(kappa));
}

inline Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigInvalid("cannot open file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigInvalid("JSON parse error in " + path + ": " + e.what());
    }
    return j;
}

inline Json report_to_json(const PerturbationReport& rep) {
    Json j;
    switch (rep.family) {
        case PerturbFamily::KILLING: j["family"] = "killing"; break;
        case PerturbFamily::LEVY: j["family"] = "levy"; break;
        case PerturbFamily::JUMP: j["family"] = "jump"; break;
    }
    j["analytic"] = rep.analytic;
    j["analytic_alt"] = rep.analytic_alt;
    j["form_agreement"] = rep.form_agreement;
    Json table = Json::array();
    for (const auto& e : rep.fd_table)
        table.push_back(Json{{"eps", e.step}, {"value", e.value}});
    j["fd_table"] = table;
    j["richardson"] = rep.richardson;
    j["rel_error"] = rep.rel_error;
    j["observed_order"] = rep.observed_order;
    j["tolerance"] = rep.tolerance;
    j["pass"] = rep.pass;
    return j;
}

}  // namespace loopm
