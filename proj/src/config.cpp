#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "foliate/run.hpp"
#include "foliate/sampling.hpp"

namespace foliate {

namespace {

class PolyParser {
public:
    PolyParser(const std::string& text, int n) : s_(text), n_(n) {}

    MultiPoly parse() {
        MultiPoly p(n_);
        skip();
        bool first = true;
        while (pos_ < s_.size()) {
            double sign = 1.0;
            if (peek() == '+' || peek() == '-') {
                sign = peek() == '-' ? -1.0 : 1.0;
                ++pos_;
            } else if (!first) {
                fail("expected '+' or '-'");
            }
            first = false;
            term(p, sign);
        }
        if (first) fail("empty polynomial");
        return p;
    }

private:
    char peek() {
        skip();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }
    void skip() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    [[noreturn]] void fail(const std::string& why) {
        throw ConfigError("polynomial '" + s_ + "': " + why + " at offset " + std::to_string(pos_));
    }
    double number() {
        skip();
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s_.substr(pos_), &used);
        } catch (const std::exception&) {
            fail("expected a number");
        }
        pos_ += used;
        return v;
    }
    void term(MultiPoly& p, double sign) {
        cplx coef = sign;
        std::vector<int> alpha(static_cast<std::size_t>(n_), 0);
        for (;;) {
            const char c = peek();
            if (c == 'z') {
                ++pos_;
                std::size_t used = 0;
                int k = 0;
                try {
                    k = std::stoi(s_.substr(pos_), &used);
                } catch (const std::exception&) {
                    fail("expected a variable index after z");
                }
                pos_ += used;
                if (k < 1 || k > n_) fail("variable index out of range");
                int e = 1;
                if (peek() == '^') {
                    ++pos_;
                    e = static_cast<int>(number());
                    if (e < 0) fail("negative exponent");
                }
                alpha[static_cast<std::size_t>(k - 1)] += e;
            } else if (c == '(') {
                ++pos_;
                const double re = number();
                if (peek() != ',') fail("expected ','");
                ++pos_;
                const double im = number();
                if (peek() != ')') fail("expected ')'");
                ++pos_;
                coef *= cplx(re, im);
            } else if (c == 'i') {
                ++pos_;
                coef *= cplx(0.0, 1.0);
            } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
                coef *= number();
            } else {
                fail("unexpected character");
            }
            if (peek() != '*') break;
            ++pos_;
        }
        p.add_term(alpha, coef);
    }

    std::string s_;
    int n_;
    std::size_t pos_ = 0;
};

json ini_value(const std::string& raw) {
    std::string v = raw;
    auto trim = [](std::string t) {
        const auto a = t.find_first_not_of(" \t");
        const auto b = t.find_last_not_of(" \t");
        return a == std::string::npos ? std::string() : t.substr(a, b - a + 1);
    };
    v = trim(v);
    if (v == "true") return true;
    if (v == "false") return false;
    auto as_number = [](const std::string& t, double& out) {
        if (t.empty()) return false;
        std::size_t used = 0;
        try {
            out = std::stod(t, &used);
        } catch (const std::exception&) {
            return false;
        }
        return used == t.size();
    };
    double d = 0.0;
    if (as_number(v, d)) return d;
    if (v.find(',') != std::string::npos) {
        json arr = json::array();
        std::stringstream ss(v);
        std::string piece;
        while (std::getline(ss, piece, ',')) {
            if (!as_number(trim(piece), d)) return v;
            arr.push_back(d);
        }
        return arr;
    }
    return v;
}

json ini_to_json(const std::filesystem::path& file) {
    boost::property_tree::ptree pt;
    try {
        boost::property_tree::read_ini(file.string(), pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    json j = json::object();
    for (const auto& [section, body] : pt) {
        if (body.empty()) {
            j[section] = ini_value(body.data());
            continue;
        }
        json sec = json::object();
        for (const auto& [key, val] : body) sec[key] = ini_value(val.data());
        j[section] = sec;
    }
    // Divisor components arrive as h1, h2, ... in the flat format.
    if (j.contains("divisor") && !j["divisor"].contains("h")) {
        json hs = json::array();
        for (int k = 1; j["divisor"].contains("h" + std::to_string(k)); ++k) hs.push_back(j["divisor"]["h" + std::to_string(k)]);
        j["divisor"]["h"] = hs;
    }
    return j;
}

template <class T>
void get(const json& sec, const char* key, T& out) {
    if (!sec.is_object() || !sec.contains(key)) return;
    const json& v = sec.at(key);
    try {
        if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
            const double d = v.get<double>();
            if (d != static_cast<double>(static_cast<T>(d))) throw ConfigError(std::string(key) + " must be an integer");
            out = static_cast<T>(d);
        } else {
            out = v.get<T>();
        }
    } catch (const json::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
    }
}

std::vector<double> number_list(const json& v, const char* key) {
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array()) throw ConfigError(std::string("config key '") + key + "' must be a list of numbers");
    return v.get<std::vector<double>>();
}

}  // namespace

MultiPoly parse_polynomial(const std::string& text, int n) { return PolyParser(text, n).parse(); }

RunConfig default_config() {
    RunConfig c;
    c.divisor_text = "z1";
    c.divisor.h = {parse_polynomial("z1", c.n)};
    c.schedule = default_schedule(2, Ambient::Ball);
    apply_seed(c);
    return c;
}

void apply_seed(RunConfig& c) {
    c.induction.seed = derive_seed(c.seed, "induction");
    c.induction.eta.seed = derive_seed(c.seed, "eta");
    c.induction.inflate.seed = derive_seed(c.seed, "inflate");
    c.induction.build.search.seed = derive_seed(c.seed, "search");
    c.induction.sampling.seed = derive_seed(c.seed, "sampling");
    c.verify.seed = derive_seed(c.seed, "verify");
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    const json none = json::object();
    auto sec = [&](const char* name) -> const json& { return j.contains(name) ? j.at(name) : none; };

    const json& run = sec("run");
    get(run, "n", c.n);
    get(run, "s", c.s);
    std::string variant = to_string(c.mode.variant), ambient = to_string(c.mode.ambient);
    get(run, "mode", variant);
    get(run, "ambient", ambient);
    c.mode.variant = variant_from_string(variant);
    c.mode.ambient = ambient_from_string(ambient);
    int steps = 2;
    get(run, "steps", steps);
    get(run, "seed", c.seed);
    double eps0 = 0.1;
    get(run, "eps0", eps0);
    if (c.n < 1 || c.n > 8) throw ConfigError("n must be in 1..8");
    if (steps < 1) throw ConfigError("steps must be >= 1");

    const json& dv = sec("divisor");
    std::vector<std::string> texts;
    c.divisor.h.clear();
    if (dv.contains("h")) {
        const json& hs = dv.at("h").is_array() ? dv.at("h") : json::array({dv.at("h")});
        for (const auto& h : hs) {
            if (h.is_string()) {
                texts.push_back(h.get<std::string>());
                c.divisor.h.push_back(parse_polynomial(texts.back(), c.n));
            } else if (h.is_object()) {
                c.divisor.h.push_back(MultiPoly::from_json(h, c.n));
                texts.push_back(h.dump());
            } else {
                throw ConfigError("divisor components must be strings or term tables");
            }
        }
    } else {
        texts.push_back(c.mode.variant == Variant::AllComplete ? "z1 + 2" : "z1");
        c.divisor.h.push_back(parse_polynomial(texts.back(), c.n));
    }
    if (c.divisor.h.empty()) throw ConfigError("divisor needs at least one component");
    get(dv, "smooth", c.divisor.smooth);
    for (std::size_t k = 0; k < texts.size(); ++k) c.divisor_text += (k ? "; " : "") + texts[k];
    get(dv, "text", c.divisor_text);
    if (c.q() > c.n) throw ConfigError("q must not exceed n");

    c.schedule = default_schedule(steps, c.mode.ambient, eps0);
    const json& sc = sec("schedule");
    if (sc.contains("r")) c.schedule.r = number_list(sc.at("r"), "r");
    if (sc.contains("R")) c.schedule.R = number_list(sc.at("R"), "R");
    if (sc.contains("delta")) c.schedule.delta = number_list(sc.at("delta"), "delta");
    if (sc.contains("lambda")) c.schedule.lambda = number_list(sc.at("lambda"), "lambda");
    validate(c.schedule, c.mode.ambient);
    if (c.mode.variant != Variant::AllComplete && c.s < 2) throw ConfigError("s must be >= 2");
    c.induction.s = c.s;

    InductionConfig& ic = c.induction;
    const json& lab = sec("labyrinth");
    std::string placement = ic.build.placement == Placement::ReducedShell ? "reduced" : "full";
    get(lab, "placement", placement);
    if (placement == "reduced") ic.build.placement = Placement::ReducedShell;
    else if (placement == "full") ic.build.placement = Placement::FullShell;
    else throw ConfigError("labyrinth placement must be 'reduced' or 'full'");
    get(lab, "reduced_fraction", ic.build.reduced_fraction);
    get(lab, "c_gap", ic.build.c_gap);
    get(lab, "level_offset", ic.build.level_offset);
    get(lab, "initial_levels", ic.build.initial_levels);
    get(lab, "max_levels", ic.build.max_levels);
    get(lab, "max_components", ic.build.max_components);
    get(lab, "max_per_level", ic.build.max_per_level);
    get(lab, "v_clearance", ic.build.v_clearance);
    get(lab, "max_rounds", ic.build.max_rounds);
    get(lab, "candidates_per_disc", ic.build.candidates_per_disc);
    get(lab, "clearance", ic.build.clearance);
    get(lab, "restarts", ic.build.search.restarts);
    get(lab, "roadmap_nodes", ic.build.search.roadmap_nodes);
    get(lab, "neighbors", ic.build.search.neighbors);
    get(lab, "sweeps", ic.build.search.shortening_sweeps);
    if (!(ic.build.c_gap > 0.0 && ic.build.c_gap < 1.0)) throw ConfigError("c_gap must lie in (0,1)");
    if (!(ic.build.level_offset > 0.0 && ic.build.level_offset < 1.0))
        throw ConfigError("level_offset must lie in (0,1)");

    const json& fit = sec("fit");
    if (fit.contains("degrees")) {
        ic.fit.degrees.clear();
        for (double d : number_list(fit.at("degrees"), "degrees")) ic.fit.degrees.push_back(static_cast<int>(d));
    } else if (fit.contains("max_degree")) {
        int cap = 0;
        get(fit, "max_degree", cap);
        ic.fit.degrees.clear();
        for (int d = 2; d <= cap; d += 2) ic.fit.degrees.push_back(d);
    }
    if (ic.fit.degrees.empty()) throw ConfigError("degree schedule is empty");
    get(fit, "ridge", ic.fit.ridge);
    get(fit, "c1_slack", ic.c1_slack);
    get(fit, "cauchy_safety", ic.cauchy_safety);
    get(fit, "rank_floor", ic.rank_floor);
    if (ic.fit.ridge < 0.0) throw ConfigError("ridge must be >= 0");
    if (ic.c1_slack < 1.0) throw ConfigError("c1_slack must be >= 1");
    if (ic.cauchy_safety < 2.0) throw ConfigError("cauchy_safety must be >= 2");

    const json& smp = sec("sampling");
    get(smp, "ball", ic.sampling.ball);
    get(smp, "per_component", ic.sampling.per_component);
    get(smp, "max_labyrinth", ic.sampling.max_labyrinth);
    get(smp, "boundary_fraction", ic.sampling.boundary_fraction);
    get(smp, "weight_ball", ic.sampling.weight_ball);
    get(smp, "weight_lambda_v", ic.sampling.weight_lambda_v);
    get(smp, "weight_delta1", ic.sampling.weight_delta1);
    get(smp, "margin_samples", ic.margin_samples);
    get(smp, "neighborhood_per_component", ic.neighborhood_samples_per_component);

    const json& eta = sec("eta");
    get(eta, "start_factor", ic.eta.start_factor);
    get(eta, "shrink", ic.eta.shrink);
    get(eta, "floor", ic.eta.floor);
    get(eta, "v_samples", ic.eta.v_samples);
    get(sec("inflate"), "fraction", ic.inflate.fraction);
    get(sec("split"), "tol", ic.split.tol);
    get(sec("split"), "guard", ic.split.guard);
    get(sec("split"), "samples", ic.split.samples);
    get(sec("phi"), "margin", ic.phi.margin);
    get(sec("phi"), "headroom", ic.phi.headroom);
    get(sec("phi"), "floor", ic.phi.floor);

    VerifyOptions& vo = c.verify;
    const json& ver = sec("verify");
    get(ver, "band_lambda", vo.band_lambda);
    get(ver, "restarts", vo.restarts);
    get(ver, "roadmap_nodes", vo.roadmap_nodes);
    get(ver, "sweeps", vo.shortening_sweeps);
    get(ver, "band_resolution", vo.band_resolution);
    get(ver, "interpolation_points", vo.interpolation_points);
    get(ver, "zero_starts", vo.zero_starts);
    get(ver, "zero_floor", vo.zero_floor);
    get(ver, "trace_abs_c", vo.trace_abs_c);
    get(ver, "trace_step", vo.trace_step);
    get(ver, "trace_slack", vo.trace_slack);
    get(ver, "rays", vo.rays);
    get(ver, "ray_samples", vo.ray_samples);
    if (!(vo.band_lambda > 0.0 && vo.band_lambda < 1.0)) throw ConfigError("band_lambda must lie in (0,1)");
    if (vo.restarts < 1) throw ConfigError("restarts must be >= 1");

    apply_seed(c);
    return c;
}

json config_to_json(const RunConfig& c) {
    const InductionConfig& ic = c.induction;
    const VerifyOptions& vo = c.verify;
    json hs = json::array();
    for (const auto& h : c.divisor.h) hs.push_back(h);
    return json{
        {"run",
         {{"n", c.n},
          {"s", c.s},
          {"mode", to_string(c.mode.variant)},
          {"ambient", to_string(c.mode.ambient)},
          {"steps", c.schedule.steps()},
          {"seed", c.seed},
          {"eps0", c.schedule.eps0}}},
        {"divisor", {{"h", hs}, {"smooth", c.divisor.smooth}, {"text", c.divisor_text}}},
        {"schedule", {{"r", c.schedule.r}, {"R", c.schedule.R}, {"delta", c.schedule.delta}, {"lambda", c.schedule.lambda}}},
        {"labyrinth",
         {{"placement", ic.build.placement == Placement::ReducedShell ? "reduced" : "full"},
          {"reduced_fraction", ic.build.reduced_fraction},
          {"c_gap", ic.build.c_gap},
          {"level_offset", ic.build.level_offset},
          {"initial_levels", ic.build.initial_levels},
          {"max_levels", ic.build.max_levels},
          {"max_components", ic.build.max_components},
          {"max_per_level", ic.build.max_per_level},
          {"v_clearance", ic.build.v_clearance},
          {"max_rounds", ic.build.max_rounds},
          {"candidates_per_disc", ic.build.candidates_per_disc},
          {"clearance", ic.build.clearance},
          {"restarts", ic.build.search.restarts},
          {"roadmap_nodes", ic.build.search.roadmap_nodes},
          {"neighbors", ic.build.search.neighbors},
          {"sweeps", ic.build.search.shortening_sweeps}}},
        {"fit",
         {{"degrees", ic.fit.degrees},
          {"ridge", ic.fit.ridge},
          {"c1_slack", ic.c1_slack},
          {"cauchy_safety", ic.cauchy_safety},
          {"rank_floor", ic.rank_floor}}},
        {"sampling",
         {{"ball", ic.sampling.ball},
          {"per_component", ic.sampling.per_component},
          {"max_labyrinth", ic.sampling.max_labyrinth},
          {"boundary_fraction", ic.sampling.boundary_fraction},
          {"weight_ball", ic.sampling.weight_ball},
          {"weight_lambda_v", ic.sampling.weight_lambda_v},
          {"weight_delta1", ic.sampling.weight_delta1},
          {"margin_samples", ic.margin_samples},
          {"neighborhood_per_component", ic.neighborhood_samples_per_component}}},
        {"eta",
         {{"start_factor", ic.eta.start_factor},
          {"shrink", ic.eta.shrink},
          {"floor", ic.eta.floor},
          {"v_samples", ic.eta.v_samples}}},
        {"inflate", {{"fraction", ic.inflate.fraction}}},
        {"split", {{"tol", ic.split.tol}, {"guard", ic.split.guard}, {"samples", ic.split.samples}}},
        {"phi", {{"margin", ic.phi.margin}, {"headroom", ic.phi.headroom}, {"floor", ic.phi.floor}}},
        {"verify",
         {{"band_lambda", vo.band_lambda},
          {"restarts", vo.restarts},
          {"roadmap_nodes", vo.roadmap_nodes},
          {"sweeps", vo.shortening_sweeps},
          {"band_resolution", vo.band_resolution},
          {"interpolation_points", vo.interpolation_points},
          {"zero_starts", vo.zero_starts},
          {"zero_floor", vo.zero_floor},
          {"trace_abs_c", vo.trace_abs_c},
          {"trace_step", vo.trace_step},
          {"trace_slack", vo.trace_slack},
          {"rays", vo.rays},
          {"ray_samples", vo.ray_samples}}}};
}

RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file " + file.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    json j;
    if (file.extension() == ".json" || (first != std::string::npos && text[first] == '{')) {
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ConfigError(std::string("config parse error: ") + e.what());
        }
    } else {
        j = ini_to_json(file);
    }
    return config_from_json(j);
}

std::string config_hash(const RunConfig& c) {
    const std::string s = config_to_json(c).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char out[17];
    std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
    return out;
}

}  // namespace foliate
