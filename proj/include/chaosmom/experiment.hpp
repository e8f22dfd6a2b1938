#pragma once

// Orchestration of the norm / envelope / simulate / verify commands and the
// report files they leave in the output directory.

#include "chaosmom/chaos_norm.hpp"
#include "chaosmom/config.hpp"
#include "chaosmom/envelope.hpp"
#include "chaosmom/growth.hpp"
#include "chaosmom/simulate.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

namespace chaosmom {

/// Fixed-format number for report files; identical inputs give identical bytes.
inline std::string fmt(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline std::string fmt(bool b) { return b ? "true" : "false"; }

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    template <class... Cells>
    void row(const Cells&... cells) {
        std::vector<std::string> r;
        (r.push_back(cell(cells)), ...);
        if (r.size() != header_.size()) throw InvalidArgument("row width does not match the header");
        rows_.push_back(std::move(r));
    }

    void write(const std::filesystem::path& file) const {
        std::ofstream out(file, std::ios::binary);
        if (!out) throw InvalidArgument("cannot write " + file.string());
        auto line = [&](const std::vector<std::string>& cells) {
            for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << cells[i];
            out << '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
    }

private:
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    static std::string cell(double x) { return fmt(x); }
    static std::string cell(bool b) { return fmt(b); }
    static std::string cell(int x) { return std::to_string(x); }
    static std::string cell(std::size_t x) { return std::to_string(x); }

    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

struct RunOutcome {
    bool passed = true;
    json summary;
    std::vector<std::string> files;  // written, relative to the output directory
};

/// Adds the failing context of a module error: which report and row.
class RowContext {
public:
    void set(std::string where) { where_ = std::move(where); }
    const std::string& where() const { return where_; }

private:
    std::string where_;
};

namespace detail {

inline json norm_json(double p, const NormResult& r) {
    json j;
    j["p"] = p;
    j["value"] = r.value;
    j["maximizers"] = r.maximizers;
    j["diagnostics"] = {{"iterations", r.iterations}, {"restarts_used", r.restarts_used}, {"converged", r.converged}};
    return j;
}

inline void write_json(const std::filesystem::path& file, const json& j) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw InvalidArgument("cannot write " + file.string());
    out << j.dump(2) << '\n';
}

} // namespace detail

/// Runs one subcommand on a validated config. Report files go to
/// cfg.output_dir next to a config snapshot and summary.json. The outcome is
/// passed iff every asserted row of every emitted report passed.
class Experiment {
public:
    // Purposes for derived seeds; changing them changes every stream.
    enum SeedTag : std::uint64_t { kSandwich = 1, kTailEval, kTailCalibration, kDecoupling, kFactorization, kAscent };

    Experiment(ExperimentConfig cfg, std::ostream& log) : cfg_(std::move(cfg)), log_(log) {
        laws_ = cfg_.laws();
        tensor_.emplace(cfg_.coefficient_tensor());
        opts_.samples = cfg_.samples;
        opts_.threads = cfg_.threads;
        opts_.ascent.restarts = cfg_.restarts;
        opts_.ascent.seed = derive_seed(cfg_.seed, kAscent);
    }

    const RowContext& context() const { return ctx_; }

    RunOutcome run(const std::string& command) {
        namespace fs = std::filesystem;
        out_dir_ = cfg_.output_dir;
        fs::create_directories(out_dir_);
        outcome_ = RunOutcome{};
        bands_ = json::object();
        write_json_file("config.json", cfg_.to_json());
        if (command == "norm") {
            run_norm();
        } else if (command == "envelope") {
            run_envelope();
        } else if (command == "simulate") {
            run_simulate();
        } else if (command == "verify") {
            run_growth();
            run_norm();
            run_envelope();
            run_simulate();
        } else {
            throw InvalidArgument("unknown command '" + command + "'");
        }
        outcome_.summary = {{"experiment", cfg_.experiment}, {"passed", outcome_.passed}, {"bands", bands_}};
        outcome_.summary["command"] = command;
        outcome_.summary["seed"] = cfg_.seed;
        outcome_.summary["samples"] = cfg_.samples;
        write_json_file("summary.json", outcome_.summary);
        return outcome_;
    }

private:
    ChaosInstance instance() const {
        auto mode = cfg_.mode == "undecoupled" ? ChaosMode::undecoupled : ChaosMode::decoupled;
        return ChaosInstance(*tensor_, mode, laws_);
    }

    int k_for(const TailDistribution& law) const { return cfg_.k ? *cfg_.k : estimate_k(law); }

    int chaos_k() const {
        int k = 1;
        for (const auto& law : laws_) k = std::max(k, k_for(law));
        return k;
    }

    bool wants(const std::string& report) const {
        if (cfg_.reports.empty()) {
            if (report == "decoupling") return tensor_->has_zero_diagonal() && tensor_->is_symmetric() && laws_.size() == 1;
            return true;
        }
        return std::find(cfg_.reports.begin(), cfg_.reports.end(), report) != cfg_.reports.end();
    }

    void write_csv(const std::string& name, const CsvTable& t) {
        t.write(out_dir_ / name);
        outcome_.files.push_back(name);
    }

    void write_json_file(const std::string& name, const json& j) {
        detail::write_json(out_dir_ / name, j);
        outcome_.files.push_back(name);
    }

    void record(const std::string& name, bool passed, json band) {
        band["passed"] = passed;
        bands_[name] = std::move(band);
        outcome_.passed = outcome_.passed && passed;
        log_ << "  " << name << ": " << (passed ? "pass" : "FAIL") << '\n';
    }

    void run_growth() {
        CsvTable t({"law", "k", "max_ratio", "worst_p", "passed"});
        bool ok = true;
        for (std::size_t i = 0; i < laws_.size(); ++i) {
            ctx_.set("growth, law " + std::to_string(i));
            int k = k_for(laws_[i]);
            auto g = check_moment_growth(laws_[i], k, doubling_grid(128));
            t.row(laws_[i].describe(), k, g.max_ratio, g.worst_p, g.passed);
            ok = ok && g.passed;
        }
        write_csv("growth.csv", t);
        record("growth", ok, {{"grid_max_p", 128}});
    }

    void run_norm() {
        auto inst = instance();
        CsvTable t({"p", "norm", "iterations", "restarts_used", "converged", "feasible"});
        json all = json::array();
        bool monotone = true;
        double prev = 0.0;
        for (double p : cfg_.p_grid) {
            ctx_.set("norm, p = " + fmt(p));
            auto r = instance_norm(inst, p, opts_.ascent);
            auto B = inst.budget_sets(p);
            bool feasible = true;
            for (std::size_t l = 0; l < B.size(); ++l)
                feasible = feasible && B[l].excess(r.maximizers[l]) <= 1e-9 * std::max(1.0, p);
            t.row(p, r.value, r.iterations, r.restarts_used, r.converged, feasible);
            all.push_back(detail::norm_json(p, r));
            log_ << "  norm p=" << fmt(p) << " value=" << fmt(r.value) << '\n';
            if (p >= prev) monotone = monotone && r.value >= prev * (1 - 1e-12);
            prev = std::max(prev, r.value);
            if (!feasible) monotone = false;
        }
        write_csv("norm.csv", t);
        write_json_file("norm.json", all);
        record("norm", monotone, {{"checks", "feasible maximizers, nondecreasing in p"}});
    }

    void run_envelope() {
        CsvTable t({"law", "family", "k", "C_prime", "worst_margin", "left_exact", "y_mean", "mean_low", "mean_high",
                    "passed"});
        bool ok = true;
        for (std::size_t i = 0; i < laws_.size(); ++i) {
            ctx_.set("envelope, law " + std::to_string(i));
            int k = k_for(laws_[i]);
            auto f = build_factor_law(laws_[i], k);
            double t0 = f.envelope.t0();
            double hi = std::numbers::e * f.sandwich.C_prime * (1.0 + t0);
            bool mean_ok = f.y_mean >= t0 && f.y_mean <= hi;
            bool pass = f.sandwich.passed && f.sandwich.left_exact_at_knots && mean_ok;
            t.row(std::to_string(i), laws_[i].describe(), k, f.sandwich.C_prime, f.sandwich.worst_margin,
                  f.sandwich.left_exact_at_knots, f.y_mean, t0, hi, pass);
            CsvTable h({"t", "H"});
            h.row(0.0, 0.0);
            for (const auto& knot : f.envelope.knots()) h.row(knot.t, knot.n);
            write_csv("envelope_" + std::to_string(i) + ".csv", h);
            write_json_file("sandwich_" + std::to_string(i) + ".json",
                            {{"passed", f.sandwich.passed}, {"worst_margin", f.sandwich.worst_margin},
                             {"C_prime", f.sandwich.C_prime}});
            ok = ok && pass;
        }
        write_csv("factor_laws.csv", t);
        record("envelope", ok, {{"grid_points", 512}});
    }

    void run_simulate() {
        auto inst = instance();
        if (wants("sandwich")) {
            ctx_.set("sandwich report");
            auto o = opts_;
            o.seed = derive_seed(cfg_.seed, kSandwich);
            auto s = sandwich_report(inst, cfg_.p_grid, o, cfg_.bands.sandwich);
            CsvTable t({"p", "moment", "moment_ci_low", "moment_ci_high", "norm", "ratio", "ratio_ci_low",
                        "ratio_ci_high", "heavy_tail", "asserted", "degenerate"});
            for (const auto& r : s.rows)
                t.row(r.p, r.moment.value, r.moment.ci_low, r.moment.ci_high, r.norm, r.ratio, r.ratio_low,
                      r.ratio_high, r.moment.heavy_tail_warning, r.asserted, r.degenerate);
            write_csv("sandwich.csv", t);
            record("sandwich", s.passed, {{"limit", s.band}, {"spread", s.spread}, {"spread_ci", s.spread_ci}});
        }
        if (wants("tail")) {
            ctx_.set("tail report");
            auto o = opts_;
            o.seed = derive_seed(cfg_.seed, kTailEval);
            TailOptions to;
            to.margin = cfg_.bands.tail_margin;
            to.lower_floor = cfg_.bands.tail_lower_floor;
            to.C_hat = cfg_.bands.C_hat;
            to.c_hat = cfg_.bands.c_hat;
            auto s = tail_report(inst, cfg_.t_grid, o, derive_seed(cfg_.seed, kTailCalibration), to);
            CsvTable t({"t", "norm", "bound", "upper_threshold", "p_upper", "upper_ci_low", "upper_ci_high", "upper_pass",
                        "lower_threshold", "lower_target", "p_lower", "lower_ci_low", "lower_ci_high", "lower_pass",
                        "asserted"});
            for (const auto& r : s.rows)
                t.row(r.t, r.norm, r.bound, r.upper_threshold, r.upper.value, r.upper.ci_low, r.upper.ci_high,
                      r.upper_pass, r.lower_threshold, r.lower_target, r.lower.value, r.lower.ci_low, r.lower.ci_high,
                      r.lower_pass, r.asserted);
            write_csv("tail.csv", t);
            record("tail", s.passed, {{"C_hat", s.C_hat}, {"c_hat", s.c_hat}, {"lower_floor", to.lower_floor}});
        }
        if (wants("decoupling")) {
            ctx_.set("decoupling report");
            if (laws_.size() != 1) throw PreconditionViolated("decoupling report needs a single shared law");
            auto o = opts_;
            o.seed = derive_seed(cfg_.seed, kDecoupling);
            auto s = decoupling_report(*tensor_, laws_[0], cfg_.p_grid, o, cfg_.bands.decoupling_low,
                                       cfg_.bands.decoupling_high);
            write_csv("decoupling.csv", ratio_table(s.rows));
            record("decoupling", s.passed,
                   {{"low", s.band_low}, {"high", s.band_high}, {"identical", s.identical}});
        }
        if (wants("factorization")) {
            ctx_.set("factorization report");
            auto o = opts_;
            o.seed = derive_seed(cfg_.seed, kFactorization);
            int k = chaos_k();
            std::vector<TailDistribution> xs;
            for (int r = 0; r < tensor_->order(); ++r) xs.push_back(inst.law(r));
            auto s = factorization_report(*tensor_, xs, k, cfg_.p_grid, o, cfg_.bands.factorization);
            write_csv("factorization.csv", ratio_table(s.rows));
            record("factorization", s.passed, {{"k", k}, {"limit", s.band}, {"spread", s.spread}});
        }
    }

    static CsvTable ratio_table(const std::vector<RatioRow>& rows) {
        CsvTable t({"p", "ratio", "ci_low", "ci_high", "asserted", "pass", "degenerate"});
        for (const auto& r : rows) t.row(r.p, r.ratio.value, r.ratio.ci_low, r.ratio.ci_high, r.asserted, r.pass, r.degenerate);
        return t;
    }

    ExperimentConfig cfg_;
    std::ostream& log_;
    std::vector<TailDistribution> laws_;
    std::optional<CoefficientTensor> tensor_;
    SimulationOptions opts_;
    std::filesystem::path out_dir_;
    RunOutcome outcome_;
    json bands_;
    RowContext ctx_;
};

} // namespace chaosmom
