#pragma once

#include <json.hpp>

#include <set>
#include <string>

#include "gplc/errors.hpp"
#include "gplc/kernels.hpp"

namespace gplc {

namespace detail {

inline void reject_unknown_fields(const nlohmann::json& j, const std::set<std::string>& allowed, const char* what) {
    if (!j.is_object()) {
        throw InvalidInput(std::string(what) + ": expected a JSON object");
    }
    for (const auto& item : j.items()) {
        if (!allowed.contains(item.key())) {
            throw InvalidInput(std::string(what) + ": unknown field '" + item.key() + "'");
        }
    }
}

} // namespace detail

inline nlohmann::json kernel_to_json(const KernelSpec& spec) {
    nlohmann::json j;
    j["family"] = std::string(to_string(spec.family));
    j["nu"] = spec.nu;
    j["lengthscales"] = spec.lengthscales;
    j["variance"] = spec.variance;
    j["hurst"] = spec.hurst;
    if (spec.family == KernelFamily::finite_rank) {
        nlohmann::json terms = nlohmann::json::array();
        for (const auto& t : spec.rank_terms) {
            terms.push_back({{"weight", t.weight}, {"basis", std::string(to_string(t.basis))}, {"index", t.index}});
        }
        j["rank_terms"] = terms;
    }
    return j;
}

/// Parses {"family", "nu", "lengthscales", "variance", "hurst"} (plus
/// "rank_terms" for finite_rank). Unknown fields are rejected; missing
/// optional fields keep their defaults.
inline KernelSpec kernel_from_json(const nlohmann::json& j) {
    detail::reject_unknown_fields(j, {"family", "nu", "lengthscales", "variance", "hurst", "rank_terms"}, "kernel");
    if (!j.contains("family")) {
        throw InvalidInput("kernel: missing field 'family'");
    }
    KernelSpec spec;
    try {
        spec.family = kernel_family_from_string(j.at("family").get<std::string>());
        if (j.contains("nu")) {
            spec.nu = j.at("nu").get<double>();
        }
        if (j.contains("lengthscales")) {
            spec.lengthscales = j.at("lengthscales").get<std::vector<double>>();
        }
        if (j.contains("variance")) {
            spec.variance = j.at("variance").get<double>();
        }
        if (j.contains("hurst")) {
            spec.hurst = j.at("hurst").get<double>();
        }
        if (j.contains("rank_terms")) {
            for (const auto& t : j.at("rank_terms")) {
                detail::reject_unknown_fields(t, {"weight", "basis", "index"}, "kernel.rank_terms");
                RankTerm term;
                term.weight = t.value("weight", 1.0);
                term.basis = basis_kind_from_string(t.value("basis", std::string("cosine")));
                term.index = t.at("index").get<std::vector<int>>();
                spec.rank_terms.push_back(std::move(term));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("kernel: ") + e.what());
    }
    spec.validate();
    return spec;
}

} // namespace gplc
