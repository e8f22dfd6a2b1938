#pragma once

// Experiment configuration: JSON ingestion with strict validation, and the
// distribution / tensor specs it contains.

#include "chaosmom/distributions.hpp"
#include "chaosmom/error.hpp"
#include "chaosmom/tensor.hpp"

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace chaosmom {

using json = nlohmann::ordered_json;

namespace detail {

[[noreturn]] inline void config_fail(const std::string& path, const std::string& what) {
    throw ConfigInvalid("field '" + path + "': " + what);
}

inline void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& path) {
    if (!obj.is_object()) config_fail(path.empty() ? "<root>" : path, "expected an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) config_fail(path.empty() ? key : path + "." + key, "unknown key");
}

inline const json& require(const json& obj, const std::string& key, const std::string& path) {
    auto full = path.empty() ? key : path + "." + key;
    if (!obj.contains(key)) config_fail(full, "missing required field");
    return obj.at(key);
}

inline double get_number(const json& v, const std::string& path) {
    if (!v.is_number()) config_fail(path, "expected a number");
    return v.get<double>();
}

inline std::int64_t get_integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) config_fail(path, "expected an integer");
    return v.get<std::int64_t>();
}

inline std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

} // namespace detail

/// Reads a tabulated tail from CSV with header `t,N`. `inf` marks the support end.
inline TailDistribution read_tail_csv(const std::filesystem::path& file, bool normalize_mean = true) {
    std::ifstream in(file);
    if (!in) throw InvalidArgument("cannot open " + file.string());
    std::string line;
    if (!std::getline(in, line)) throw InvalidArgument(file.string() + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t,N") throw InvalidArgument(file.string() + ": header must be 't,N'");
    std::vector<TailPoint> pts;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos) throw InvalidArgument(file.string() + ": row " + std::to_string(row) + " needs two columns");
        try {
            pts.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
        } catch (const std::logic_error&) {
            throw InvalidArgument(file.string() + ": row " + std::to_string(row) + " is not numeric");
        }
    }
    return TailDistribution::tabulated(std::move(pts), normalize_mean);
}

/// {"family": "exponential"} | {"family": "weibull", "alpha": a}
/// | {"family": "product_exponential", "factors": k}
/// | {"family": "tabulated", "path": "file.csv"} (relative to the config).
inline TailDistribution parse_distribution(const json& spec, const std::string& path,
                                           const std::filesystem::path& base_dir = {}) {
    using namespace detail;
    if (!spec.is_object()) config_fail(path, "expected an object");
    const auto& fam = require(spec, "family", path);
    if (!fam.is_string()) config_fail(join(path, "family"), "expected a string");
    auto family = fam.get<std::string>();
    try {
        if (family == "exponential") {
            check_keys(spec, {"family"}, path);
            return TailDistribution::exponential();
        }
        if (family == "weibull") {
            check_keys(spec, {"family", "alpha"}, path);
            return TailDistribution::weibull(get_number(require(spec, "alpha", path), join(path, "alpha")));
        }
        if (family == "product_exponential") {
            check_keys(spec, {"family", "factors"}, path);
            return TailDistribution::product_of_exponentials(
                static_cast<int>(get_integer(require(spec, "factors", path), join(path, "factors"))));
        }
        if (family == "tabulated") {
            check_keys(spec, {"family", "path"}, path);
            const auto& p = require(spec, "path", path);
            if (!p.is_string()) config_fail(join(path, "path"), "expected a string");
            std::filesystem::path file = p.get<std::string>();
            if (file.is_relative()) file = base_dir / file;
            return read_tail_csv(file);
        }
    } catch (const ConfigInvalid&) {
        throw;
    } catch (const error& e) {
        config_fail(path, e.what());
    }
    config_fail(join(path, "family"), "unknown family '" + family + "'");
}

/// {"d", "n", "entries" (row-major), "tetrahedral"} or
/// {"generator": "random_sparse", "d", "n", "density", "seed", "tetrahedral"}.
inline CoefficientTensor parse_tensor(const json& spec, const std::string& path, bool default_tetrahedral) {
    using namespace detail;
    if (!spec.is_object()) config_fail(path, "expected an object");
    try {
        bool tetra = default_tetrahedral;
        if (spec.contains("tetrahedral")) {
            if (!spec.at("tetrahedral").is_boolean()) config_fail(join(path, "tetrahedral"), "expected a boolean");
            tetra = spec.at("tetrahedral").get<bool>();
        }
        int d = static_cast<int>(get_integer(require(spec, "d", path), join(path, "d")));
        int n = static_cast<int>(get_integer(require(spec, "n", path), join(path, "n")));
        if (spec.contains("generator")) {
            check_keys(spec, {"generator", "d", "n", "density", "seed", "tetrahedral"}, path);
            if (spec.at("generator") != "random_sparse") config_fail(join(path, "generator"), "only 'random_sparse' is known");
            double density = get_number(require(spec, "density", path), join(path, "density"));
            auto seed = get_integer(require(spec, "seed", path), join(path, "seed"));
            if (seed < 0) config_fail(join(path, "seed"), "must be >= 0");
            return CoefficientTensor::random_sparse(d, n, density, static_cast<std::uint64_t>(seed), tetra);
        }
        check_keys(spec, {"d", "n", "entries", "tetrahedral"}, path);
        const auto& e = require(spec, "entries", path);
        if (!e.is_array()) config_fail(join(path, "entries"), "expected an array");
        std::vector<double> entries;
        for (std::size_t i = 0; i < e.size(); ++i)
            entries.push_back(get_number(e[i], join(path, "entries") + "[" + std::to_string(i) + "]"));
        return CoefficientTensor(d, n, std::move(entries), tetra);
    } catch (const ConfigInvalid&) {
        throw;
    } catch (const NotTetrahedral&) {
        throw;
    } catch (const error& e) {
        config_fail(path, e.what());
    }
}

struct Bands {
    double sandwich = 16.0;        // max r_p / min r_p
    double decoupling_low = 0.125;
    double decoupling_high = 8.0;
    double factorization = 16.0;   // max / min X-to-Y moment ratio
    double tail_margin = 1.0;      // multiplier on the calibrated C_hat
    double tail_lower_floor = 0.1;
    std::optional<double> C_hat;
    std::optional<double> c_hat;
};

struct ExperimentConfig {
    std::string experiment;
    json distributions;  // raw specs, kept for the snapshot
    json tensor;
    std::string mode = "decoupled";
    std::optional<int> k;  // empty = "auto"
    std::vector<double> p_grid;
    std::vector<double> t_grid;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
    std::string output_dir;
    Bands bands;
    int restarts = 8;
    std::vector<std::string> reports;  // empty = every applicable report
    int threads = 1;
    std::filesystem::path base_dir;    // resolves relative tabulated paths

    std::vector<TailDistribution> laws() const {
        std::vector<TailDistribution> out;
        for (std::size_t i = 0; i < distributions.size(); ++i)
            out.push_back(parse_distribution(distributions[i], "distributions[" + std::to_string(i) + "]", base_dir));
        return out;
    }

    CoefficientTensor coefficient_tensor() const { return parse_tensor(tensor, "tensor", mode == "undecoupled"); }

    json to_json() const {
        json j;
        j["experiment"] = experiment;
        j["distributions"] = distributions;
        j["tensor"] = tensor;
        j["mode"] = mode;
        if (k) j["k"] = *k;
        else j["k"] = "auto";
        j["p_grid"] = p_grid;
        j["t_grid"] = t_grid;
        j["samples"] = samples;
        j["seed"] = seed;
        j["output_dir"] = output_dir;
        json b;
        b["sandwich"] = bands.sandwich;
        b["decoupling_low"] = bands.decoupling_low;
        b["decoupling_high"] = bands.decoupling_high;
        b["factorization"] = bands.factorization;
        b["tail_margin"] = bands.tail_margin;
        b["tail_lower_floor"] = bands.tail_lower_floor;
        if (bands.C_hat) b["C_hat"] = *bands.C_hat;
        if (bands.c_hat) b["c_hat"] = *bands.c_hat;
        j["bands"] = b;
        j["restarts"] = restarts;
        if (!reports.empty()) j["reports"] = reports;
        j["threads"] = threads;
        return j;
    }
};

inline const std::set<std::string>& known_reports() {
    static const std::set<std::string> r{"sandwich", "tail", "decoupling", "factorization"};
    return r;
}

/// Validates a parsed config document. Every problem is a ConfigInvalid naming
/// the offending field.
inline ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir = {},
                                     const std::string& fallback_name = "experiment") {
    using namespace detail;
    check_keys(doc,
               {"$schema", "experiment", "distributions", "tensor", "mode", "k", "p_grid", "t_grid", "samples", "seed",
                "output_dir", "bands", "restarts", "reports", "threads"},
               "");
    ExperimentConfig c;
    c.base_dir = base_dir;
    c.experiment = fallback_name;
    if (doc.contains("experiment")) {
        if (!doc.at("experiment").is_string()) config_fail("experiment", "expected a string");
        c.experiment = doc.at("experiment").get<std::string>();
    }
    if (c.experiment.empty() || c.experiment.find_first_of("/\\") != std::string::npos)
        config_fail("experiment", "must be a nonempty name without path separators");

    const auto& seed = require(doc, "seed", "");
    if (!seed.is_number_integer() || seed.get<std::int64_t>() < 0) config_fail("seed", "expected a nonnegative integer");
    c.seed = seed.get<std::uint64_t>();

    auto samples = get_integer(require(doc, "samples", ""), "samples");
    if (samples < 1000) config_fail("samples", "must be >= 1000");
    c.samples = static_cast<std::size_t>(samples);

    auto grid = [&](const std::string& key, double min) {
        const auto& g = require(doc, key, "");
        if (!g.is_array() || g.empty()) config_fail(key, "expected a nonempty array");
        std::vector<double> out;
        for (std::size_t i = 0; i < g.size(); ++i) {
            auto p = key + "[" + std::to_string(i) + "]";
            double v = get_number(g[i], p);
            if (!(v >= min) || !std::isfinite(v)) config_fail(p, "must be finite and >= " + std::to_string(static_cast<int>(min)));
            out.push_back(v);
        }
        return out;
    };
    c.p_grid = grid("p_grid", 1.0);
    c.t_grid = grid("t_grid", 0.0);

    if (doc.contains("mode")) {
        const auto& m = doc.at("mode");
        if (!m.is_string() || (m != "decoupled" && m != "undecoupled"))
            config_fail("mode", "expected 'decoupled' or 'undecoupled'");
        c.mode = m.get<std::string>();
    }
    if (doc.contains("k")) {
        const auto& k = doc.at("k");
        if (k.is_string()) {
            if (k != "auto") config_fail("k", "expected a positive integer or 'auto'");
        } else {
            auto kv = get_integer(k, "k");
            if (kv < 1 || kv > 16) config_fail("k", "must be in [1, 16]");
            c.k = static_cast<int>(kv);
        }
    }
    if (doc.contains("restarts")) {
        auto r = get_integer(doc.at("restarts"), "restarts");
        if (r < 1 || r > 1000) config_fail("restarts", "must be in [1, 1000]");
        c.restarts = static_cast<int>(r);
    }
    if (doc.contains("threads")) {
        auto t = get_integer(doc.at("threads"), "threads");
        if (t < 1 || t > 1024) config_fail("threads", "must be in [1, 1024]");
        c.threads = static_cast<int>(t);
    }
    c.output_dir = "out/" + c.experiment;
    if (doc.contains("output_dir")) {
        if (!doc.at("output_dir").is_string()) config_fail("output_dir", "expected a string");
        c.output_dir = doc.at("output_dir").get<std::string>();
    }
    if (doc.contains("reports")) {
        const auto& r = doc.at("reports");
        if (!r.is_array()) config_fail("reports", "expected an array");
        for (std::size_t i = 0; i < r.size(); ++i) {
            auto p = "reports[" + std::to_string(i) + "]";
            if (!r[i].is_string() || !known_reports().count(r[i].get<std::string>()))
                config_fail(p, "expected one of sandwich, tail, decoupling, factorization");
            c.reports.push_back(r[i].get<std::string>());
        }
    }
    if (doc.contains("bands")) {
        const auto& b = doc.at("bands");
        check_keys(b, {"sandwich", "decoupling_low", "decoupling_high", "factorization", "tail_margin", "tail_lower_floor",
                       "C_hat", "c_hat"},
                   "bands");
        auto positive = [&](const char* key, double& dst) {
            if (!b.contains(key)) return;
            double v = get_number(b.at(key), std::string("bands.") + key);
            if (!(v > 0.0)) config_fail(std::string("bands.") + key, "must be positive");
            dst = v;
        };
        positive("sandwich", c.bands.sandwich);
        positive("decoupling_low", c.bands.decoupling_low);
        positive("decoupling_high", c.bands.decoupling_high);
        positive("factorization", c.bands.factorization);
        positive("tail_margin", c.bands.tail_margin);
        positive("tail_lower_floor", c.bands.tail_lower_floor);
        double tmp = 0.0;
        if (b.contains("C_hat")) positive("C_hat", tmp), c.bands.C_hat = tmp;
        if (b.contains("c_hat")) positive("c_hat", tmp), c.bands.c_hat = tmp;
    }

    const auto& dists = require(doc, "distributions", "");
    if (!dists.is_array() || dists.empty()) config_fail("distributions", "expected a nonempty array");
    c.distributions = dists;
    c.tensor = require(doc, "tensor", "");
    auto laws = c.laws();  // validates each spec
    auto a = c.coefficient_tensor();
    if (c.mode == "undecoupled" && laws.size() != 1)
        config_fail("distributions", "undecoupled mode takes exactly one distribution");
    if (laws.size() != 1 && static_cast<int>(laws.size()) != a.order())
        config_fail("distributions", "expected one distribution or one per tensor index");
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigInvalid("cannot open config file " + file.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigInvalid(file.string() + ": " + e.what());
    }
    return parse_config(doc, file.parent_path(), file.stem().string());
}

} // namespace chaosmom
