// Copyright 2026 The qndr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "qndr/cli.hpp"
#include "qndr/config.hpp"

int main(int argc, char **argv) {
    CLI::App app{"qndr: repetitive QND qubit readout simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> trials;
    std::optional<unsigned> threads;
    std::optional<std::string> out;
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--seed", seed, "root seed (u64)");
    app.add_option("--trials", trials, "trials per sweep point");
    app.add_option("--threads", threads, "worker threads (default: all cores)");
    app.add_option("--out", out, "output CSV path");
    for (const auto &name : qndr::subcommands()) {
        app.add_subcommand(name)->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return qndr::kExitConfig;
    }

    try {
        qndr::RunConfig cfg = config_path.empty() ? qndr::RunConfig{}
                                                  : qndr::load_config(config_path);
        if (seed) {
            cfg.seed = *seed;
        }
        if (trials) {
            cfg.trials = *trials;
        }
        if (threads) {
            cfg.threads = *threads;
        }
        if (out) {
            cfg.output_path = *out;
        }
        cfg.validate();
        qndr::run_subcommand(app.get_subcommands().front()->get_name(), cfg, std::cout);
    } catch (const qndr::ConfigError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return qndr::kExitConfig;
    } catch (const qndr::ResourceError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return qndr::kExitResource;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return qndr::kExitFailure;
    }
    return qndr::kExitOk;
}
