#pragma once

#include <fstream>
#include <initializer_list>
#include <json.hpp>
#include <string>

#include "hsov/harness.hpp"

/// JSON input/output for curve configurations, scenarios, and the SoV data
/// types. All schemas carry a schema_version field; unknown fields are
/// rejected so that typos fail loudly. Complex numbers are serialized as
/// [re, im] pairs of JSON numbers; the writer emits shortest round-trip
/// decimal (within 17 significant digits) so values reload bit-exactly.
namespace hsov::io {

using nlohmann::json;

inline json cnum(cplx v) { return json::array({v.real(), v.imag()}); }

inline cplx cnum_from(const json& j) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw Error("parse error: expected [re, im] pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

/// Field discipline: every listed field present and no others.
inline void require_fields(const json& j, std::initializer_list<const char*> required,
                           std::initializer_list<const char*> optional = {}) {
    if (!j.is_object()) throw Error("parse error: expected object");
    for (const char* f : required)
        if (!j.contains(f)) throw Error(std::string("parse error: missing field ") + f);
    for (const auto& [key, val] : j.items()) {
        bool known = false;
        for (const char* f : required) known = known || key == f;
        for (const char* f : optional) known = known || key == f;
        if (!known) throw Error("parse error: unknown field " + key);
    }
}

inline void require_schema(const json& j, int version) {
    if (!j.contains("schema_version") || !j["schema_version"].is_number_integer() ||
        j["schema_version"].get<int>() != version)
        throw Error("parse error: unsupported schema_version");
}

// --- surface points and divisors ----------------------------------------

inline json point_to_json(const SurfacePoint& p) {
    return {{"re", p.z.real()}, {"im", p.z.imag()}, {"sheet", p.sheet}};
}

inline SurfacePoint point_from_json(const json& j) {
    require_fields(j, {"re", "im", "sheet"});
    int sheet = j["sheet"].get<int>();
    if (sheet != 1 && sheet != -1) throw Error("parse error: sheet must be +1 or -1");
    return {{j["re"].get<double>(), j["im"].get<double>()}, sheet};
}

inline json divisor_to_json(const Divisor& d) {
    json out = json::array();
    for (const auto& p : d.expanded()) out.push_back(point_to_json(p));
    return out;
}

inline Divisor divisor_from_json(const json& j) {
    if (!j.is_array()) throw Error("parse error: expected point list");
    Divisor d;
    for (const auto& e : j) d.add(point_from_json(e), 1);
    return d;
}

// --- curve configuration -------------------------------------------------

struct CurveConfig {
    std::vector<cplx> f_coeffs;
    SurfacePoint basepoint;
    NumericConfig numeric;
};

inline json curve_config_to_json(const CurveConfig& c) {
    json f = json::array();
    for (cplx v : c.f_coeffs) f.push_back(cnum(v));
    return {{"schema_version", 1},
            {"f_coeffs", f},
            {"basepoint", point_to_json(c.basepoint)},
            {"tolerances",
             {{"quad_tol", c.numeric.quad_tol},
              {"root_separation", c.numeric.root_separation},
              {"theta_tol", c.numeric.theta_tol},
              {"rank_tol", c.numeric.rank_tol}}},
            {"theta_truncation", c.numeric.theta_radius}};
}

inline CurveConfig curve_config_from_json(const json& j) {
    require_fields(j, {"schema_version", "f_coeffs", "basepoint", "tolerances",
                       "theta_truncation"});
    require_schema(j, 1);
    CurveConfig c;
    if (!j["f_coeffs"].is_array() || j["f_coeffs"].size() < 5)
        throw Error("parse error: f_coeffs must list at least 5 coefficients");
    for (const auto& e : j["f_coeffs"]) c.f_coeffs.push_back(cnum_from(e));
    c.basepoint = point_from_json(j["basepoint"]);
    const json& t = j["tolerances"];
    require_fields(t, {"quad_tol", "root_separation", "theta_tol", "rank_tol"});
    c.numeric.quad_tol = t["quad_tol"].get<double>();
    c.numeric.root_separation = t["root_separation"].get<double>();
    c.numeric.theta_tol = t["theta_tol"].get<double>();
    c.numeric.rank_tol = t["rank_tol"].get<double>();
    c.numeric.theta_radius = j["theta_truncation"].get<int>();
    return c;
}

// --- scenario configuration ----------------------------------------------

struct ScenarioConfig {
    ReferenceData ref;
    Divisor base_q;
    uint64_t seed = 0;
    int count = 0;
    double roundtrip_tol = 1e-6;
    double bracket_tol = 1e-4;
    double fd_step = 1e-5;
};

inline json scenario_to_json(const ScenarioConfig& s) {
    json ref = {{"Lambda_degree", s.ref.Lambda_degree},
                {"d", s.ref.d},
                {"p", divisor_to_json(s.ref.p)},
                {"q_check", divisor_to_json(s.ref.q_check)}};
    if (s.ref.q_check_0) ref["q_check_0"] = point_to_json(*s.ref.q_check_0);
    return {{"schema_version", 1},
            {"reference", ref},
            {"base_q", divisor_to_json(s.base_q)},
            {"seed", s.seed},
            {"count", s.count},
            {"tolerances", {{"roundtrip", s.roundtrip_tol}, {"bracket", s.bracket_tol}}},
            {"fd_step", s.fd_step}};
}

inline ScenarioConfig scenario_from_json(const json& j) {
    require_fields(j, {"schema_version", "reference", "base_q", "seed", "count",
                       "tolerances", "fd_step"});
    require_schema(j, 1);
    ScenarioConfig s;
    const json& r = j["reference"];
    require_fields(r, {"Lambda_degree", "d", "p", "q_check"}, {"q_check_0"});
    s.ref.Lambda_degree = r["Lambda_degree"].get<int>();
    s.ref.d = r["d"].get<int>();
    s.ref.p = divisor_from_json(r["p"]);
    s.ref.q_check = divisor_from_json(r["q_check"]);
    if (r.contains("q_check_0")) s.ref.q_check_0 = point_from_json(r["q_check_0"]);
    if ((s.ref.Lambda_degree == 1) != s.ref.q_check_0.has_value())
        throw Error("parse error: q_check_0 must be present iff Lambda_degree is 1");
    s.base_q = divisor_from_json(j["base_q"]);
    s.seed = j["seed"].get<uint64_t>();
    s.count = j["count"].get<int>();
    const json& t = j["tolerances"];
    require_fields(t, {"roundtrip", "bracket"});
    s.roundtrip_tol = t["roundtrip"].get<double>();
    s.bracket_tol = t["bracket"].get<double>();
    s.fd_step = j["fd_step"].get<double>();
    return s;
}

// --- SoV data types -------------------------------------------------------

inline json cvec_to_json(const Eigen::VectorXcd& v) {
    json out = json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(cnum(v(i)));
    return out;
}

inline Eigen::VectorXcd cvec_from_json(const json& j) {
    if (!j.is_array()) throw Error("parse error: expected coordinate array");
    Eigen::VectorXcd v(static_cast<int>(j.size()));
    for (int i = 0; i < v.size(); ++i) v(i) = cnum_from(j[i]);
    return v;
}

inline json darboux_to_json(const DarbouxPoint& pt) {
    return {{"schema_version", 1},
            {"lambda", cvec_to_json(pt.lambda)},
            {"x", cvec_to_json(pt.x)},
            {"kappa", cvec_to_json(pt.kappa)},
            {"k", cvec_to_json(pt.k)}};
}

inline DarbouxPoint darboux_from_json(const json& j, const ReferenceData& ref) {
    require_fields(j, {"schema_version", "lambda", "x", "kappa", "k"},
                   {"command", "pass", "sqrt_choice", "report"});
    require_schema(j, 1);
    DarbouxPoint pt;
    pt.ref = ref;
    pt.lambda = cvec_from_json(j["lambda"]);
    pt.x = cvec_from_json(j["x"]);
    pt.kappa = cvec_from_json(j["kappa"]);
    pt.k = cvec_from_json(j["k"]);
    return pt;
}

inline json ba_to_json(const BAConfiguration& ba) {
    json pts = json::array();
    for (const auto& p : ba.points)
        pts.push_back({{"u_re", p.u.z.real()},
                       {"u_im", p.u.z.imag()},
                       {"sheet", p.u.sheet},
                       {"v_re", p.v.real()},
                       {"v_im", p.v.imag()}});
    return {{"schema_version", 1}, {"points", pts}, {"u0", cnum(ba.u0)}};
}

inline BAConfiguration ba_from_json(const json& j) {
    // report-wrapper fields emitted by the CLI are tolerated so a forward
    // output file can be fed straight back in
    require_fields(j, {"schema_version", "points", "u0"}, {"command", "pass"});
    require_schema(j, 1);
    BAConfiguration ba;
    if (!j["points"].is_array()) throw Error("parse error: expected point list");
    for (const auto& e : j["points"]) {
        require_fields(e, {"u_re", "u_im", "sheet", "v_re", "v_im"});
        BAConfiguration::Point p;
        p.u = {{e["u_re"].get<double>(), e["u_im"].get<double>()}, e["sheet"].get<int>()};
        p.v = {e["v_re"].get<double>(), e["v_im"].get<double>()};
        ba.points.push_back(p);
    }
    ba.u0 = cnum_from(j["u0"]);
    return ba;
}

// --- files ----------------------------------------------------------------

inline json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("parse error: cannot open " + path);
    json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw Error("parse error: malformed JSON in " + path);
    return j;
}

inline void save_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << j.dump(2) << "\n";
}

}  // namespace hsov::io
