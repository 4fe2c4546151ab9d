// SPDX-License-Identifier: Apache-2.0
//
// rssim - rate-splitting Massive MIMO downlink link-level simulator
// Copyright (C) 2026 The rssim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

// Configuration, single-point pipeline, sweeps and the validation suite.

#pragma once

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "errors.hpp"
#include "estimation.hpp"
#include "link.hpp"
#include "moments.hpp"
#include "power.hpp"
#include "precoders.hpp"
#include "random.hpp"
#include "scenario.hpp"

namespace rssim
{

enum class Mode
{
    rs,
    no_rs
};

inline const char *to_string(Mode m) { return m == Mode::rs ? "rs" : "no_rs"; }

enum class SweepAxis
{
    power_dbm,
    antennas,
    users
};

inline const char *to_string(SweepAxis a)
{
    switch (a)
    {
    case SweepAxis::antennas:
        return "antennas";
    case SweepAxis::users:
        return "users";
    default:
        return "power_dbm";
    }
}

struct SweepSpec
{
    SweepAxis axis = SweepAxis::power_dbm;
    std::vector<double> values{0.0, 10.0, 20.0, 30.0, 40.0};
    int drops = 1;
    long long mc_samples = 100000;
    std::vector<Mode> modes{Mode::rs, Mode::no_rs};
    std::string output_path = "results.csv";
    std::string plot_path; // optional gnuplot data file with per-point medians

    void validate() const
    {
        if (values.empty())
            throw config_error("values", "must not be empty");
        for (std::size_t i = 1; i < values.size(); ++i)
            if (!(values[i] > values[i - 1]))
                throw config_error("values", "must be strictly increasing");
        for (double v : values)
        {
            if (!std::isfinite(v))
                throw config_error("values", "must be finite");
            if (axis != SweepAxis::power_dbm && (v < 1.0 || v != std::floor(v)))
                throw config_error("values", "antenna and user counts must be positive integers");
        }
        if (drops < 1)
            throw config_error("drops", "must be >= 1");
        if (mc_samples < 1)
            throw config_error("mc_samples", "must be >= 1");
        if (modes.empty())
            throw config_error("modes", "must not be empty");
    }
};

struct ExperimentConfig
{
    ScenarioConfig scenario;
    SweepSpec sweep;
    SolverOptions solver;
    bool include_pi = true;
    CommonMomentOptions moments;
    bool quartic_auto = true; // take the variant selected by the Monte Carlo adjudication

    QuarticVariant quartic_variant() const { return quartic_auto ? validated_quartic_variant() : moments.variant; }
};

// ---------------------------------------------------------------------------
// Config parsing

namespace detail
{

using json = nlohmann::json;

template <typename T>
T get_as(const json &j, const std::string &key)
{
    try
    {
        return j.get<T>();
    }
    catch (const json::exception &)
    {
        throw config_error(key, "has the wrong type");
    }
}

inline double get_number(const json &j, const std::string &key)
{
    if (!j.is_number())
        throw config_error(key, "must be a number");
    return j.get<double>();
}

inline int get_int(const json &j, const std::string &key)
{
    if (!j.is_number_integer())
        throw config_error(key, "must be an integer");
    return j.get<int>();
}

inline bool get_bool(const json &j, const std::string &key)
{
    if (!j.is_boolean())
        throw config_error(key, "must be true or false");
    return j.get<bool>();
}

inline std::string get_string(const json &j, const std::string &key)
{
    if (!j.is_string())
        throw config_error(key, "must be a string");
    return j.get<std::string>();
}

inline Mode parse_mode(const std::string &s, const std::string &key)
{
    if (s == "rs")
        return Mode::rs;
    if (s == "no_rs")
        return Mode::no_rs;
    throw config_error(key, "unknown mode '" + s + "' (expected rs or no_rs)");
}

} // namespace detail

inline ExperimentConfig parse_config(const std::string &text)
{
    using detail::json;
    json doc = json::object();
    if (text.find_first_not_of(" \t\r\n") != std::string::npos)
    {
        try
        {
            doc = json::parse(text);
        }
        catch (const json::parse_error &e)
        {
            throw config_error("<document>", std::string("malformed JSON: ") + e.what());
        }
    }
    if (!doc.is_object())
        throw config_error("<document>", "top level must be an object");

    ExperimentConfig c;
    ScenarioConfig &s = c.scenario;
    SweepSpec &w = c.sweep;
    SolverOptions &o = c.solver;

    using handler = std::function<void(const json &, const std::string &)>;
    const std::map<std::string, handler> fields{
        {"M", [&](const json &j, const std::string &k) { s.M = detail::get_int(j, k); }},
        {"K", [&](const json &j, const std::string &k) { s.K = detail::get_int(j, k); }},
        {"tau", [&](const json &j, const std::string &k) { s.tau = detail::get_int(j, k); }},
        {"tau_p", [&](const json &j, const std::string &k) { s.tau_p = detail::get_int(j, k); }},
        {"rho_tr_dbm", [&](const json &j, const std::string &k) { s.rho_tr_dbm = detail::get_number(j, k); }},
        {"rho_total_dbm", [&](const json &j, const std::string &k) { s.rho_total_dbm = detail::get_number(j, k); }},
        {"noise_dbm", [&](const json &j, const std::string &k) { s.noise_dbm = detail::get_number(j, k); }},
        {"cell_side_m", [&](const json &j, const std::string &k) { s.cell_side_m = detail::get_number(j, k); }},
        {"min_distance_m", [&](const json &j, const std::string &k) { s.min_distance_m = detail::get_number(j, k); }},
        {"num_clusters", [&](const json &j, const std::string &k) { s.num_clusters = detail::get_int(j, k); }},
        {"angular_spread_deg",
         [&](const json &j, const std::string &k) { s.angular_spread_deg = detail::get_number(j, k); }},
        {"nominal_angle_halfwidth_deg",
         [&](const json &j, const std::string &k) { s.nominal_angle_halfwidth_deg = detail::get_number(j, k); }},
        {"shadow_std_db", [&](const json &j, const std::string &k) { s.shadow_std_db = detail::get_number(j, k); }},
        {"pathloss_reference_m",
         [&](const json &j, const std::string &k) { s.pathloss_reference_m = detail::get_number(j, k); }},
        {"independent_pilot_noise",
         [&](const json &j, const std::string &k) { s.independent_pilot_noise = detail::get_bool(j, k); }},
        {"seed",
         [&](const json &j, const std::string &k)
         {
             if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
                 throw config_error(k, "must be a non-negative integer");
             s.seed = j.get<std::uint64_t>();
         }},
        {"axis",
         [&](const json &j, const std::string &k)
         {
             const auto v = detail::get_string(j, k);
             if (v == "power_dbm")
                 w.axis = SweepAxis::power_dbm;
             else if (v == "antennas")
                 w.axis = SweepAxis::antennas;
             else if (v == "users")
                 w.axis = SweepAxis::users;
             else
                 throw config_error(k, "unknown axis '" + v + "'");
         }},
        {"values",
         [&](const json &j, const std::string &k)
         {
             if (!j.is_array())
                 throw config_error(k, "must be an array of numbers");
             w.values.clear();
             for (const auto &e : j)
                 w.values.push_back(detail::get_number(e, k));
         }},
        {"drops", [&](const json &j, const std::string &k) { w.drops = detail::get_int(j, k); }},
        {"mc_samples",
         [&](const json &j, const std::string &k)
         {
             if (!j.is_number_integer())
                 throw config_error(k, "must be an integer");
             w.mc_samples = j.get<long long>();
         }},
        {"modes",
         [&](const json &j, const std::string &k)
         {
             if (!j.is_array())
                 throw config_error(k, "must be an array of strings");
             w.modes.clear();
             for (const auto &e : j)
             {
                 const Mode m = detail::parse_mode(detail::get_string(e, k), k);
                 if (std::find(w.modes.begin(), w.modes.end(), m) != w.modes.end())
                     throw config_error(k, "duplicate mode");
                 w.modes.push_back(m);
             }
         }},
        {"output_path", [&](const json &j, const std::string &k) { w.output_path = detail::get_string(j, k); }},
        {"plot_path", [&](const json &j, const std::string &k) { w.plot_path = detail::get_string(j, k); }},
        {"max_iterations", [&](const json &j, const std::string &k) { o.max_iterations = detail::get_int(j, k); }},
        {"mu_search",
         [&](const json &j, const std::string &k)
         {
             const auto v = detail::get_string(j, k);
             if (v == "nested")
                 o.mu_search = MuSearch::nested;
             else if (v == "interleaved")
                 o.mu_search = MuSearch::interleaved;
             else
                 throw config_error(k, "expected nested or interleaved");
         }},
        {"mu_upper", [&](const json &j, const std::string &k) { o.mu_upper = detail::get_number(j, k); }},
        {"step_tolerance", [&](const json &j, const std::string &k) { o.step_tolerance = detail::get_number(j, k); }},
        {"se_tolerance", [&](const json &j, const std::string &k) { o.se_tolerance = detail::get_number(j, k); }},
        {"budget_tolerance",
         [&](const json &j, const std::string &k) { o.budget_tolerance = detail::get_number(j, k); }},
        {"include_pi", [&](const json &j, const std::string &k) { c.include_pi = detail::get_bool(j, k); }},
        {"quartic_variant",
         [&](const json &j, const std::string &k)
         {
             const auto v = detail::get_string(j, k);
             c.quartic_auto = v == "auto";
             if (v == "real_kurtosis")
                 c.moments.variant = QuarticVariant::real_kurtosis;
             else if (v == "circular")
                 c.moments.variant = QuarticVariant::circular;
             else if (v != "auto")
                 throw config_error(k, "expected auto, real_kurtosis or circular");
         }},
        {"second_moment_route",
         [&](const json &j, const std::string &k)
         {
             const auto v = detail::get_string(j, k);
             if (v == "automatic")
                 c.moments.route = SecondMomentRoute::automatic;
             else if (v == "chain")
                 c.moments.route = SecondMomentRoute::chain;
             else if (v == "pairing")
                 c.moments.route = SecondMomentRoute::pairing;
             else
                 throw config_error(k, "expected automatic, chain or pairing");
         }},
    };

    for (const auto &[key, value] : doc.items())
    {
        const auto it = fields.find(key);
        if (it == fields.end())
            throw config_error(key, "unknown key");
        it->second(value, key);
    }

    s.validate();
    w.validate();
    if (o.max_iterations < 1)
        throw config_error("max_iterations", "must be >= 1");
    if (!(o.mu_upper > 0.0))
        throw config_error("mu_upper", "must be positive");
    if (!(o.step_tolerance > 0.0))
        throw config_error("step_tolerance", "must be positive");
    if (!(o.se_tolerance > 0.0))
        throw config_error("se_tolerance", "must be positive");
    if (!(o.budget_tolerance > 0.0))
        throw config_error("budget_tolerance", "must be positive");
    return c;
}

inline ExperimentConfig load_config(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw config_error("--config", "cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

// ---------------------------------------------------------------------------
// Single point

struct ResultRow
{
    SweepAxis axis = SweepAxis::power_dbm;
    double axis_value = 0.0;
    int drop = 0;
    Mode mode = Mode::rs;
    double sum_se = 0.0;
    double se_common = 0.0;
    double se_private_total = 0.0;
    double rho_c = 0.0;
    std::size_t l_min = 0;
    int iterations = 0;
    std::uint64_t seed = 0;
};

// Extra outputs of one pipeline run, for callers that want more than a row.
struct PointDetails
{
    Scenario scenario;
    MomentTable moments;
    CommonWeights weights;
    PowerAllocation allocation;
    SEReport report;
    MomentDiagnostics diagnostics;
};

inline std::function<void(const std::string &)> &log_sink()
{
    static std::function<void(const std::string &)> sink = [](const std::string &msg)
    { std::clog << "rssim: " << msg << '\n'; };
    return sink;
}

// Loose ceiling on the sum SE: every stream at the best single-UE array gain.
inline double sum_se_ceiling(const ScenarioConfig &cfg, const CovarianceSet &cov)
{
    const double best = static_cast<double>(cfg.M) * cov.beta.maxCoeff();
    return cfg.prelog() * (cfg.K + 1) * std::log2(1.0 + cfg.rho_total_mw() * best / cfg.sigma2_mw());
}

inline ResultRow run_point(const ExperimentConfig &cfg, Mode mode, std::uint64_t seed, PointDetails *details = nullptr)
{
    const ScenarioConfig &sc = cfg.scenario;
    sc.validate();
    const std::string where = "scenario seed " + std::to_string(seed) + ", mode " + to_string(mode);
    try
    {
        PointDetails local;
        PointDetails &d = details ? *details : local;
        d.scenario = generate_scenario(sc, seed);
        const auto model = build_estimation_model(d.scenario.covariances, sc.pilot_snr());
        const double rho_total = sc.rho_total_mw();
        const double sigma2 = sc.sigma2_mw();
        d.moments = closed_form_table(model);
        if (mode == Mode::rs)
        {
            const rvec uniform = rvec::Constant(sc.K, rho_total / sc.K);
            const auto problem = make_common_weight_problem(model, d.moments, uniform, sigma2, cfg.include_pi);
            d.weights = solve_common_weights(problem);
            CommonMomentOptions mo = cfg.moments;
            mo.variant = cfg.quartic_variant();
            d.moments = closed_form_table(model, d.weights.a, mo, &d.diagnostics);
            if (!d.diagnostics.ridged_ues.empty())
                log_sink()(where + ": " + std::to_string(d.diagnostics.ridged_ues.size()) +
                           " covariance inverse(s) needed a ridge");
        }
        SolverOptions so = cfg.solver;
        so.allow_common = mode == Mode::rs;
        d.allocation = ila_wf(d.moments, rho_total, sigma2, sc.prelog(), so);
        d.report = se_report(d.allocation.powers, d.moments, sigma2, sc.prelog());
        if (!(d.report.sum_se <= sum_se_ceiling(sc, d.scenario.covariances)))
            throw numerical_error("sum SE exceeds the physical ceiling (unit error?)");

        ResultRow r;
        r.mode = mode;
        r.sum_se = d.report.sum_se;
        r.se_common = d.report.se_common;
        r.se_private_total = d.report.sum_se - d.report.se_common;
        r.rho_c = d.allocation.powers.rho_c;
        r.l_min = d.report.l_min;
        r.iterations = d.allocation.iterations;
        r.seed = seed;
        return r;
    }
    catch (const config_error &)
    {
        throw;
    }
    catch (const numerical_error &e)
    {
        throw numerical_error(where + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Sweeps

// Seed of one drop. The axis value is deliberately left out, so all points of
// a drop share the UE geometry and both modes see the same channels.
inline std::uint64_t drop_seed(std::uint64_t master, int drop)
{
    return derive_seed(master, {0xd209ULL, static_cast<std::uint64_t>(drop)});
}

inline ExperimentConfig config_at(const ExperimentConfig &base, double axis_value)
{
    ExperimentConfig c = base;
    switch (base.sweep.axis)
    {
    case SweepAxis::power_dbm:
        c.scenario.rho_total_dbm = axis_value;
        break;
    case SweepAxis::antennas:
        c.scenario.M = static_cast<int>(axis_value);
        break;
    case SweepAxis::users:
        c.scenario.K = static_cast<int>(axis_value);
        break;
    }
    c.scenario.validate();
    return c;
}

inline void apply_thread_cap()
{
#ifdef _OPENMP
    if (const char *env = std::getenv("RSSIM_THREADS"))
    {
        const int n = std::atoi(env);
        if (n >= 1)
            omp_set_num_threads(n);
    }
#endif
}

inline std::vector<ResultRow> run_sweep_rows(const ExperimentConfig &cfg)
{
    cfg.sweep.validate();
    const auto &sw = cfg.sweep;
    const std::size_t nv = sw.values.size(), nd = static_cast<std::size_t>(sw.drops), nm = sw.modes.size();
    std::vector<ResultRow> rows(nv * nd * nm);
    // Resolve the quartic variant once, outside the parallel region.
    ExperimentConfig base = cfg;
    if (base.quartic_auto)
    {
        base.moments.variant = base.quartic_variant();
        base.quartic_auto = false;
    }

    const long long jobs = static_cast<long long>(nv * nd);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
    apply_thread_cap();
#pragma omp parallel for schedule(dynamic)
    for (long long job = 0; job < jobs; ++job)
    {
        const std::size_t v = static_cast<std::size_t>(job) / nd, dr = static_cast<std::size_t>(job) % nd;
        try
        {
            const ExperimentConfig pc = config_at(base, sw.values[v]);
            const std::uint64_t seed = drop_seed(cfg.scenario.seed, static_cast<int>(dr));
            for (std::size_t m = 0; m < nm; ++m)
            {
                ResultRow r = run_point(pc, sw.modes[m], seed);
                r.axis = sw.axis;
                r.axis_value = sw.values[v];
                r.drop = static_cast<int>(dr);
                rows[(v * nd + dr) * nm + m] = r;
            }
        }
        catch (...)
        {
            errors[static_cast<std::size_t>(job)] = std::current_exception();
        }
    }
    for (auto &e : errors)
        if (e)
            std::rethrow_exception(e);
    return rows;
}

inline const char *csv_header()
{
    return "axis,axis_value,drop,mode,sum_se,se_common,se_private_total,rho_c,l_min,iterations,seed";
}

inline std::string format_g12(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string to_csv(const std::vector<ResultRow> &rows)
{
    std::string out = csv_header();
    out += '\n';
    for (const auto &r : rows)
    {
        out += to_string(r.axis);
        out += ',' + format_g12(r.axis_value);
        out += ',' + std::to_string(r.drop);
        out += ',';
        out += to_string(r.mode);
        out += ',' + format_g12(r.sum_se);
        out += ',' + format_g12(r.se_common);
        out += ',' + format_g12(r.se_private_total);
        out += ',' + format_g12(r.rho_c);
        out += ',' + std::to_string(r.l_min);
        out += ',' + std::to_string(r.iterations);
        out += ',' + std::to_string(r.seed);
        out += '\n';
    }
    return out;
}

// Median sum SE per axis value and mode, as whitespace-separated columns.
inline std::string to_plot_data(const SweepSpec &sw, const std::vector<ResultRow> &rows)
{
    std::string out = "# " + std::string(to_string(sw.axis));
    for (Mode m : sw.modes)
        out += std::string(" median_sum_se_") + to_string(m);
    out += '\n';
    for (double v : sw.values)
    {
        out += format_g12(v);
        for (Mode m : sw.modes)
        {
            std::vector<double> x;
            for (const auto &r : rows)
                if (r.axis_value == v && r.mode == m)
                    x.push_back(r.sum_se);
            std::sort(x.begin(), x.end());
            const std::size_t n = x.size();
            const double med = n == 0 ? 0.0 : (n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]));
            out += ' ' + format_g12(med);
        }
        out += '\n';
    }
    return out;
}

// Writes through a temporary file in the same directory and renames it into
// place, so readers never see a partial file.
inline void write_atomically(const std::string &path, const std::string &content)
{
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw config_error("output_path", "cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out)
        {
            out.close();
            std::error_code ec;
            fs::remove(tmp, ec);
            throw config_error("output_path", "write to '" + tmp.string() + "' failed");
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec)
    {
        fs::remove(tmp, ec);
        throw config_error("output_path", "cannot move results into '" + path + "'");
    }
}

inline std::vector<ResultRow> run_sweep(const ExperimentConfig &cfg)
{
    auto rows = run_sweep_rows(cfg);
    write_atomically(cfg.sweep.output_path, to_csv(rows));
    if (!cfg.sweep.plot_path.empty())
        write_atomically(cfg.sweep.plot_path, to_plot_data(cfg.sweep, rows));
    return rows;
}

// ---------------------------------------------------------------------------
// Validation suite

struct ValidationEntry
{
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct ValidationReport
{
    std::vector<ValidationEntry> entries;
    QuarticVariant quartic_winner = QuarticVariant::circular;

    bool all_passed() const
    {
        return std::all_of(entries.begin(), entries.end(), [](const auto &e) { return e.passed; });
    }

    std::string to_text() const
    {
        std::ostringstream os;
        for (const auto &e : entries)
        {
            os << (e.passed ? "PASS " : "FAIL ") << e.name << ": measured " << format_g12(e.measured)
               << ", tolerance " << format_g12(e.tolerance);
            if (!e.detail.empty())
                os << " (" << e.detail << ')';
            os << '\n';
        }
        return os.str();
    }
};

inline constexpr long long min_validation_samples = 10000;

// Worst |closed - MC| / max(2% |closed|, 4 SE) over every entry of two tables;
// values <= 1 pass.
inline double moment_mismatch(const MomentTable &closed, const MomentTable &mc, bool with_common)
{
    auto score = [](double diff, double ref, double se) { return diff / std::max(0.02 * ref, 4.0 * se); };
    double worst = 0.0;
    const auto K = static_cast<Eigen::Index>(closed.users());
    for (Eigen::Index k = 0; k < K; ++k)
    {
        worst = std::max(worst, score(std::abs(closed.g_private(k) - mc.g_private(k)), std::abs(closed.g_private(k)),
                                      mc.g_private_se(k)));
        for (Eigen::Index i = 0; i < K; ++i)
            worst = std::max(worst, score(std::abs(closed.G_private(k, i) - mc.G_private(k, i)),
                                          std::abs(closed.G_private(k, i)), mc.G_private_se(k, i)));
        if (with_common)
        {
            worst = std::max(worst, score(std::abs(closed.g_common(k) - mc.g_common(k)),
                                          std::abs(closed.g_common(k)), mc.g_common_se(k)));
            worst = std::max(worst, score(std::abs(closed.G_common(k) - mc.G_common(k)), std::abs(closed.G_common(k)),
                                          mc.G_common_se(k)));
        }
    }
    return worst;
}

// Empirical second-order statistics gathered chunk by chunk.
struct EmpiricalStats
{
    std::vector<cmat> cov_h;       // E{h_k h_k^H}
    std::vector<cmat> cross_hat;   // (i, k) row-major: E{h_hat_i h_hat_k^H}
    std::vector<cmat> cov_err;     // E{h_tilde_k h_tilde_k^H}
    rvec norm_private;             // E{||w_k||^2}
    double norm_common = 0.0;      // E{||w_c||^2}
    double identity_error = 0.0;   // worst per-realization error of h_hat_i = R_i R_k^{-1} h_hat_k
    bool identity_checked = false;
    Eigen::Index n = 0;
};

inline ValidationReport validate_mode(const ExperimentConfig &cfg, long long mc_samples)
{
    if (mc_samples < min_validation_samples)
        throw config_error("mc_samples", "validation needs at least " + std::to_string(min_validation_samples) +
                                             " Monte Carlo samples");
    ValidationReport rep;
    const ScenarioConfig &sc = cfg.scenario;
    sc.validate();
    const std::uint64_t seed = sc.seed;

    // 1. Quartic-moment adjudication: reference case plus random pairs.
    {
        const auto &ref = reference_quartic_adjudication();
        rep.quartic_winner = ref.winner();
        std::ostringstream os;
        os << "reference B = I, Phi = I, M = 2: real_kurtosis z = " << format_g12(ref.real_kurtosis_max_z)
           << ", circular z = " << format_g12(ref.circular_max_z) << "; matching variant: "
           << (ref.decisive() ? to_string(ref.winner()) : "none or both");
        const double best_z = std::min(ref.real_kurtosis_max_z, ref.circular_max_z);
        rep.entries.push_back(
            {"quartic_variant_reference", ref.decisive(), ref.decisive() ? best_z : 0.0, 3.0, os.str()});
        rng_engine eng(derive_seed(seed, {stream::validation, 1}));
        std::normal_distribution<double> nd(0.0, 1.0);
        int idx = 0;
        for (int M : {2, 4, 8})
        {
            cmat X(M, M), Y(M, M);
            for (Eigen::Index r = 0; r < M; ++r)
                for (Eigen::Index c = 0; c < M; ++c)
                {
                    X(r, c) = cplx(nd(eng), nd(eng));
                    Y(r, c) = cplx(nd(eng), nd(eng));
                }
            const cmat Phi = X * X.adjoint() / M;
            const cmat root = psd_sqrt(Phi).root;
            const auto adj = adjudicate_quartic(root, Y, 1000000, derive_seed(seed, {stream::quartic, 100u + idx++}));
            const bool ok = adj.decisive() && adj.winner() == rep.quartic_winner;
            std::ostringstream d;
            d << "M = " << M << ": real_kurtosis z = " << format_g12(adj.real_kurtosis_max_z)
              << " (max rel dev " << format_g12(adj.real_kurtosis_max_rel) << "), circular z = "
              << format_g12(adj.circular_max_z) << " (max rel dev " << format_g12(adj.circular_max_rel) << ')';
            rep.entries.push_back({"quartic_variant_M" + std::to_string(M), ok,
                                   rep.quartic_winner == QuarticVariant::circular ? adj.circular_max_z
                                                                                  : adj.real_kurtosis_max_z,
                                   3.0, d.str()});
        }
    }

    // 2. Scenario-level Monte Carlo checks.
    const Scenario scen = generate_scenario(sc, seed);
    const auto &cov = scen.covariances;
    const auto model = build_estimation_model(cov, sc.pilot_snr());
    const std::size_t K = model.users();
    const auto Ki = static_cast<Eigen::Index>(K);
    const Eigen::Index M = model.antennas();
    const double rho_total = sc.rho_total_mw(), sigma2 = sc.sigma2_mw();
    const MomentTable private_table = closed_form_table(model);
    const auto problem =
        make_common_weight_problem(model, private_table, rvec::Constant(Ki, rho_total / sc.K), sigma2, cfg.include_pi);
    const auto weights = solve_common_weights(problem);
    CommonMomentOptions mo = cfg.moments;
    mo.variant = rep.quartic_winner;
    MomentDiagnostics diag;
    const MomentTable closed = closed_form_table(model, weights.a, mo, &diag);

    MomentAccumulator acc(K, true);
    EmpiricalStats st;
    st.cov_h.assign(K, cmat::Zero(M, M));
    st.cov_err.assign(K, cmat::Zero(M, M));
    st.cross_hat.assign(K * K, cmat::Zero(M, M));
    st.norm_private = rvec::Zero(Ki);

    // Pair (i, k) for the substitution identity: best conditioned R_k.
    std::size_t id_k = 0;
    double best_cond = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < K; ++k)
    {
        const double c = hermitian_condition_number(cov.R[k]);
        if (c < best_cond)
            best_cond = c, id_k = k;
    }
    const bool identity_possible = best_cond < 1e8;
    std::optional<ridged_inverse> inv_k;
    if (identity_possible)
        inv_k.emplace(cov.R[id_k], cov.beta(static_cast<Eigen::Index>(id_k)));

    const Eigen::Index chunk = 8192;
    for (Eigen::Index start = 0; start < mc_samples; start += chunk)
    {
        const Eigen::Index n = std::min<Eigen::Index>(chunk, mc_samples - start);
        const std::uint64_t cs = derive_seed(seed, {stream::validation, 2, static_cast<std::uint64_t>(start)});
        ChannelBatch b = sample_channels(cov, n, cs);
        mmse_estimate(b, model, cs, sc.independent_pilot_noise);
        const PrecoderSet p = build_precoders(b, model, weights.a);
        acc.add(b.h, p.w_private, &p.w_common);
        for (std::size_t k = 0; k < K; ++k)
        {
            st.cov_h[k] += b.h[k] * b.h[k].adjoint();
            st.cov_err[k] += b.h_tilde[k] * b.h_tilde[k].adjoint();
            st.norm_private(static_cast<Eigen::Index>(k)) += p.w_private[k].squaredNorm();
            for (std::size_t i = 0; i < K; ++i)
                st.cross_hat[i * K + k] += b.h_hat[i] * b.h_hat[k].adjoint();
        }
        st.norm_common += p.w_common.squaredNorm();
        if (identity_possible && start == 0)
        {
            const cmat z = inv_k->solve(b.h_hat[id_k]);
            for (std::size_t i = 0; i < K; ++i)
            {
                const cmat pred = cov.R[i] * z;
                for (Eigen::Index c = 0; c < n; ++c)
                {
                    const double ref = b.h_hat[i].col(c).norm();
                    if (ref > 0.0)
                        st.identity_error = std::max(st.identity_error, (pred.col(c) - b.h_hat[i].col(c)).norm() / ref);
                }
            }
            st.identity_checked = true;
        }
        st.n += n;
    }
    const double n = static_cast<double>(st.n);
    const MomentTable mc = acc.table();

    const double mm = moment_mismatch(closed, mc, true);
    rep.entries.push_back({"moments_closed_vs_mc", mm <= 1.0, mm, 1.0,
                           "worst |closed - MC| / max(2% rel, 4 SE); second-moment route " +
                               std::string(to_string(diag.route_used))});

    double worst_norm = std::abs(st.norm_common / n - 1.0);
    for (Eigen::Index k = 0; k < Ki; ++k)
        worst_norm = std::max(worst_norm, std::abs(st.norm_private(k) / n - 1.0));
    rep.entries.push_back({"precoder_normalization", worst_norm <= 0.02, worst_norm, 0.02,
                           "E{||w||^2} vs 1, private and common"});

    // Sample second-order statistics. For circular Gaussian x, y the sample
    // mean of x y^H has E||S - C||_F^2 = tr E{x x^H} tr E{y y^H} / n, so the
    // tolerance is max(2%, three times that floor relative to ||C||_F).
    struct cov_score
    {
        double score = 0.0, error = 0.0, tolerance = 0.0;
        void add(const cmat &sample, const cmat &reference, double tr_x, double tr_y, double n)
        {
            const double e = relative_frobenius_error(sample, reference);
            const double tol = std::max(0.02, 3.0 * std::sqrt(tr_x * tr_y / n) / reference.norm());
            if (e / tol > score)
                score = e / tol, error = e, tolerance = tol;
        }
        std::string text(const std::string &what) const
        {
            return what + "; worst relative Frobenius error " + format_g12(error) + " against tolerance " +
                   format_g12(tolerance) + " = max(2%, 3 x sampling floor)";
        }
    };
    cov_score s_cov, s_cross, s_err;
    for (std::size_t k = 0; k < K; ++k)
    {
        const double trR = cov.R[k].trace().real();
        const cmat E = cov.R[k] - model.Phi(k);
        s_cov.add(st.cov_h[k] / n, cov.R[k], trR, trR, n);
        s_err.add(st.cov_err[k] / n, E, E.trace().real(), E.trace().real(), n);
        for (std::size_t i = 0; i < K; ++i)
            s_cross.add(st.cross_hat[i * K + k] / n, model.C(i, k), model.trPhi(i), model.trPhi(k), n);
    }
    rep.entries.push_back(
        {"channel_covariance", s_cov.score <= 1.0, s_cov.score, 1.0, s_cov.text("sample covariance of h vs R")});
    const std::string noise_note =
        sc.independent_pilot_noise ? "; independent pilot noise: closed forms assume a shared observation" : "";
    rep.entries.push_back({"estimate_cross_covariance", s_cross.score <= 1.0, s_cross.score, 1.0,
                           s_cross.text("E{h_hat_i h_hat_k^H} vs R_i Q^-1 R_k") + noise_note});
    rep.entries.push_back(
        {"error_covariance", s_err.score <= 1.0, s_err.score, 1.0, s_err.text("E{h_tilde h_tilde^H} vs R - Phi")});
    if (st.identity_checked)
        rep.entries.push_back({"substitution_identity", st.identity_error <= 1e-10, st.identity_error, 1e-10,
                               "h_hat_i = R_i R_k^-1 h_hat_k per realization, cond(R_k) = " + format_g12(best_cond)});
    else
        rep.entries.push_back({"substitution_identity", true, 0.0, 1e-10,
                               "skipped: every covariance has condition number >= 1e8"});

    // 3. LP against a simplex grid on random three-UE sub-problems.
    {
        double worst = 0.0;
        rng_engine eng(derive_seed(seed, {stream::validation, 3}));
        std::uniform_real_distribution<double> ud(0.05, 1.0);
        for (int trial = 0; trial < 10; ++trial)
        {
            CommonWeightProblem p;
            p.u.resize(3, 3);
            p.pi.resize(3);
            for (Eigen::Index i = 0; i < 3; ++i)
            {
                p.pi(i) = ud(eng);
                for (Eigen::Index k = 0; k < 3; ++k)
                    p.u(i, k) = ud(eng);
            }
            const auto sol = solve_common_weights(p);
            double grid = -std::numeric_limits<double>::infinity();
            for (int x = 0; x <= 100; ++x)
                for (int y = 0; x + y <= 100; ++y)
                {
                    rvec a(3);
                    a << x / 100.0, y / 100.0, (100 - x - y) / 100.0;
                    grid = std::max(grid, p.objective(a));
                }
            worst = std::max(worst, std::abs(sol.t - grid) / std::abs(grid));
            if (sol.t < grid * (1.0 - 1e-9))
                worst = std::max(worst, 1.0); // the LP must never lose to the grid
        }
        rep.entries.push_back({"common_weight_lp_vs_grid", worst <= 1e-2, worst, 1e-2, "10 random three-UE problems"});
    }

    // 4. Linearization slopes against finite differences.
    {
        PowerVector p = PowerVector::uniform_private(K, 0.8 * rho_total);
        p.rho_c = 0.2 * rho_total;
        const double worst = slope_check(p, closed, sigma2, 1e-3 * rho_total).worst();
        rep.entries.push_back({"linearization_finite_differences", worst <= 1e-5, worst, 1e-5,
                               "zeta and alpha terms vs Richardson central differences, step 1e-3 rho_T"});
    }
    return rep;
}

} // namespace rssim
