#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "htl/cli.hpp"

namespace {

struct Flags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out_dir;
    std::optional<std::string> input;
};

int dispatch(htl::cli::Study study, const Flags& flags) {
    using namespace htl::cli;
    StudyConfig config;
    try {
        if (flags.config_path.empty()) {
            config = parse_config_object(json::object(), study);
        } else {
            std::ifstream is(flags.config_path);
            if (!is) {
                std::cerr << "config error: cannot open '" << flags.config_path << "'\n";
                return 2;
            }
            std::ostringstream text;
            text << is.rdbuf();
            config = parse_config(text.str(), study);
        }
    } catch (const htl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const htl::InputError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }
    if (flags.seed) config.sim.seed_base = *flags.seed;
    if (flags.threads) config.sim.threads = *flags.threads;
    if (flags.out_dir) config.out_dir = *flags.out_dir;
    if (flags.input) config.fit.input = *flags.input;
    return run(config);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral estimators and hypothesis transfer simulations"};
    app.require_subcommand(1);

    Flags flags;
    std::optional<htl::cli::Study> chosen;
    for (const auto study : {htl::cli::Study::Rates, htl::cli::Study::AdaptiveRates, htl::cli::Study::Transfer,
                             htl::cli::Study::Phase, htl::cli::Study::Fit, htl::cli::Study::Selfcheck}) {
        const std::string name(htl::cli::to_string(study));
        CLI::App* sub = app.add_subcommand(name, "Run the " + name + " study");
        sub->add_option("--config", flags.config_path, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", flags.seed, "Base seed (overrides the config)");
        sub->add_option("--threads", flags.threads, "Worker threads (overrides the config)");
        sub->add_option("--out", flags.out_dir, "Output directory (overrides the config)");
        if (study == htl::cli::Study::Fit) {
            sub->add_option("--input", flags.input, "Two-column x,y CSV (overrides the config)");
        }
        sub->callback([&chosen, study] { chosen = study; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    return dispatch(*chosen, flags);
}
