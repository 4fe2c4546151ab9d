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

// Command-line front end: run | sweep | validate.

#include <CLI11.hpp>

#include <rssim.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace
{

enum exit_code
{
    ok = 0,
    bad_config = 1,
    numerical_failure = 2,
    validation_failure = 3
};

struct common_flags
{
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string output;
    std::string mode;
};

rssim::ExperimentConfig load(const common_flags &f, bool validation_defaults = false)
{
    rssim::ExperimentConfig cfg;
    if (f.config_path.empty())
    {
        cfg = rssim::parse_config("");
        if (validation_defaults)
        {
            cfg.scenario.M = 16;
            cfg.scenario.K = 3;
        }
    }
    else
        cfg = rssim::load_config(f.config_path);
    if (f.seed)
        cfg.scenario.seed = *f.seed;
    if (!f.output.empty())
        cfg.sweep.output_path = f.output;
    if (!f.mode.empty())
    {
        if (f.mode == "rs")
            cfg.sweep.modes = {rssim::Mode::rs};
        else if (f.mode == "no_rs")
            cfg.sweep.modes = {rssim::Mode::no_rs};
        else if (f.mode == "both")
            cfg.sweep.modes = {rssim::Mode::rs, rssim::Mode::no_rs};
        else
            throw rssim::config_error("--mode", "expected rs, no_rs or both");
    }
    return cfg;
}

int cmd_run(const common_flags &f)
{
    const auto cfg = load(f);
    const auto seed = rssim::drop_seed(cfg.scenario.seed, 0);
    std::vector<rssim::ResultRow> rows;
    for (auto m : cfg.sweep.modes)
    {
        auto r = rssim::run_point(cfg, m, seed);
        r.axis = rssim::SweepAxis::power_dbm;
        r.axis_value = cfg.scenario.rho_total_dbm;
        rows.push_back(r);
    }
    const std::string csv = rssim::to_csv(rows);
    if (f.output.empty())
        std::cout << csv;
    else
        rssim::write_atomically(f.output, csv);
    return ok;
}

int cmd_sweep(const common_flags &f)
{
    const auto cfg = load(f);
    const auto rows = rssim::run_sweep(cfg);
    std::cerr << "wrote " << rows.size() << " rows to " << cfg.sweep.output_path << '\n';
    return ok;
}

int cmd_validate(const common_flags &f, long long trials)
{
    const auto cfg = load(f, true);
    const long long n = trials > 0 ? trials : cfg.sweep.mc_samples;
    const auto rep = rssim::validate_mode(cfg, n);
    const std::string text = rep.to_text();
    std::cout << text;
    std::cout << "quartic variant matching Monte Carlo: " << rssim::to_string(rep.quartic_winner) << '\n';
    if (!f.output.empty())
        rssim::write_atomically(f.output, text);
    return rep.all_passed() ? ok : validation_failure;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"rssim - rate-splitting Massive MIMO downlink simulator"};
    app.require_subcommand(1);

    common_flags flags;
    long long trials = 0;
    auto add_common = [&](CLI::App *sub)
    {
        sub->add_option("--config", flags.config_path, "JSON config file (defaults when omitted)");
        sub->add_option("--seed", flags.seed, "master seed, overrides the config");
        sub->add_option("--output", flags.output, "output path");
        sub->add_option("--mode", flags.mode, "rs | no_rs | both");
    };
    auto *run = app.add_subcommand("run", "evaluate a single scenario drop");
    add_common(run);
    auto *sweep = app.add_subcommand("sweep", "run the configured sweep and write CSV");
    add_common(sweep);
    auto *validate = app.add_subcommand("validate", "closed-form vs Monte Carlo validation suite");
    add_common(validate);
    validate->add_option("--trials", trials, "Monte Carlo realizations (>= 10000)");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int rc = app.exit(e);
        return rc == 0 ? ok : bad_config;
    }

    rssim::apply_thread_cap();
    try
    {
        if (*run)
            return cmd_run(flags);
        if (*sweep)
            return cmd_sweep(flags);
        return cmd_validate(flags, trials);
    }
    catch (const rssim::config_error &e)
    {
        std::cerr << "config error: " << e.what() << '\n';
        return bad_config;
    }
    catch (const rssim::numerical_error &e)
    {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return numerical_failure;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return numerical_failure;
    }
}
