#pragma once

// Golden-fixture runner. A fixture file is {"records": [...]}, each record
//   {"name", "op", "input", "expected", "tolerance", "origin"}
// with origin one of "reference", "definition", "computed". Matrices are flat
// row-major arrays of [re, im] pairs.

#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "purifylab/channels.hpp"
#include "purifylab/ensembles.hpp"
#include "purifylab/theory.hpp"

namespace purifylab {

namespace detail {

inline EnsembleSpec spec_from_json(const nlohmann::json& in)
{
    EnsembleSpec s{in.at("d_I").get<std::size_t>(), in.at("d_O").get<std::size_t>(), in.value("d_E", std::size_t{1}), 0};
    return s;
}

inline Matrix square_from_json(const nlohmann::json& j)
{
    const auto side = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(j.size()))));
    return matrix_from_json(j, side, side);
}

inline void flatten_numbers(const nlohmann::json& j, std::vector<double>& out)
{
    if (j.is_number()) {
        out.push_back(j.get<double>());
    } else if (j.is_array()) {
        for (const auto& e : j) flatten_numbers(e, out);
    } else {
        throw Error(ErrorKind::ParseError, "fixture values must be numbers or nested arrays of numbers");
    }
}

} // namespace detail

/// Evaluates one fixture operation through the public API.
inline nlohmann::json evaluate_fixture_op(const std::string& op, const nlohmann::json& in)
{
    if (op == "depolarizing_choi")
        return matrix_to_json(depolarizing_choi(in.at("d_I").get<std::size_t>(), in.at("d_O").get<std::size_t>()).matrix());
    if (op == "max_entangled_marginal")
        return matrix_to_json(
            max_entangled_purification(in.at("d_I").get<std::size_t>(), in.at("d_O").get<std::size_t>()).marginal());
    if (op == "avg_purity") return theory::avg_purity(detail::spec_from_json(in));
    if (op == "eps_dep") return theory::eps_dep(detail::spec_from_json(in));
    if (op == "eps_avg_ue") return theory::eps_avg_ue(detail::spec_from_json(in));
    if (op == "eps_pure_separable") return theory::eps_pure_separable(detail::spec_from_json(in));
    if (op == "balanced_purity")
        return theory::balanced_purity(in.at("d_I").get<std::size_t>(), in.at("d_O").get<std::size_t>());
    if (op == "eps_app_bounds") {
        const auto b = theory::eps_app_bounds(detail::spec_from_json(in));
        return nlohmann::json::array({b.lower, b.upper});
    }
    if (op == "eps_tomo_bound") {
        const double k = in.at("k").is_string() ? INFINITY : in.at("k").get<double>();
        return theory::eps_tomo_bound(detail::spec_from_json(in), k, in.at("delta").get<double>(),
                                      in.at("kappa").get<double>());
    }
    if (op == "choi_from_kraus") {
        KrausSet ks{in.at("d_I").get<std::size_t>(), in.at("d_O").get<std::size_t>(), {}};
        for (const auto& k : in.at("kraus"))
            ks.operators.push_back(matrix_from_json(k, static_cast<Eigen::Index>(ks.d_out), static_cast<Eigen::Index>(ks.d_in)));
        return matrix_to_json(choi_from_kraus(ks).matrix());
    }
    if (op == "kraus_roundtrip") {
        const auto c = choi_from_json(in.at("choi"));
        return matrix_to_json(choi_from_kraus(kraus_from_choi(c)).matrix());
    }
    if (op == "kraus_count") {
        return kraus_from_choi(choi_from_json(in.at("choi"))).operators.size();
    }
    if (op == "stinespring_marginal") {
        const auto c = choi_from_json(in.at("choi"));
        return matrix_to_json(stinespring_from_choi(c, in.at("d_E").get<std::size_t>()).marginal());
    }
    if (op == "purification_marginal") return matrix_to_json(purification_from_json(in.at("purification")).marginal());
    if (op == "choi_json_roundtrip")
        return matrix_to_json(choi_from_json(nlohmann::json::parse(to_json(choi_from_json(in.at("choi"))).dump())).matrix());
    if (op == "partial_trace") {
        const auto dims = in.at("dims").get<std::vector<std::size_t>>();
        const auto keep = in.at("keep").get<std::vector<std::size_t>>();
        return matrix_to_json(partial_trace(detail::square_from_json(in.at("matrix")), SubsystemDims{dims}, keep));
    }
    if (op == "fidelity")
        return fidelity(detail::square_from_json(in.at("rho")), detail::square_from_json(in.at("sigma")));
    if (op == "mp_mu") return mp_mu(in.at("c").get<double>());
    if (op == "mp_density") return mp_density(in.at("c").get<double>(), in.at("x").get<double>());
    if (op == "complete_elliptic") {
        const auto v = complete_elliptic(in.at("m").get<double>());
        return nlohmann::json::array({v.K, v.E});
    }
    throw Error(ErrorKind::ParseError, "unknown fixture op '" + op + "'");
}

struct FixtureOutcome {
    std::string name;
    bool passed = false;
    double deviation = 0.0;
    std::string message;
};

inline FixtureOutcome run_fixture_record(const nlohmann::json& rec)
{
    FixtureOutcome out;
    out.name = rec.at("name").get<std::string>();
    const auto origin = rec.at("origin").get<std::string>();
    if (origin != "reference" && origin != "definition" && origin != "computed")
        throw Error(ErrorKind::ParseError, "fixture '" + out.name + "' has an unknown origin '" + origin + "'");
    const double tol = rec.at("tolerance").get<double>();
    std::vector<double> expected, observed;
    detail::flatten_numbers(rec.at("expected"), expected);
    try {
        detail::flatten_numbers(evaluate_fixture_op(rec.at("op").get<std::string>(), rec.at("input")), observed);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::ParseError) throw;
        out.message = std::string("error: ") + e.what();
        return out;
    }
    if (expected.size() != observed.size()) {
        out.message = "size mismatch: expected " + std::to_string(expected.size()) + " values, observed " +
                      std::to_string(observed.size());
        return out;
    }
    for (std::size_t i = 0; i < expected.size(); ++i)
        out.deviation = std::max(out.deviation, std::abs(expected[i] - observed[i]));
    out.passed = out.deviation <= tol;
    if (!out.passed) out.message = "expected " + rec.at("expected").dump() + " observed " + nlohmann::json(observed).dump();
    return out;
}

/// Runs every record; returns 0 if all pass, 1 on any failure, 2 on a malformed file.
inline int run_fixtures(const std::string& path, std::ostream& os)
{
    nlohmann::json doc;
    try {
        std::ifstream in(path);
        if (!in) {
            os << "error: cannot open " << path << "\n";
            return 2;
        }
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        os << "error: " << e.what() << "\n";
        return 2;
    }
    int failures = 0;
    try {
        for (const auto& rec : doc.at("records")) {
            const auto r = run_fixture_record(rec);
            if (r.passed) {
                os << "PASS " << r.name << "\n";
            } else {
                os << "FAIL " << r.name << " " << r.message << "\n";
                ++failures;
            }
        }
    } catch (const nlohmann::json::exception& e) {
        os << "error: malformed fixture record: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        os << "error: " << e.what() << "\n";
        return 2;
    }
    os << (failures ? "FAILED " : "OK ") << failures << " failure(s)\n";
    return failures ? 1 : 0;
}

} // namespace purifylab
