#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "gamehedge/gamehedge.hpp"

namespace {

struct CliOptions {
    std::string config_path;
    std::string out_path;
    std::string format = "json";
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* sub, CliOptions& opt) {
    sub->add_option("--config", opt.config_path, "Path to a JSON run config")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", opt.out_path, "Write the result here instead of stdout");
    sub->add_option("--format", opt.format, "Output format")
        ->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--seed", opt.seed, "Override the config seed");
}

gamehedge::RunConfig load_config(const CliOptions& opt) {
    std::ifstream in(opt.config_path);
    if (!in) throw gamehedge::ConfigError("cannot open config: " + opt.config_path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw gamehedge::ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    gamehedge::RunConfig cfg = gamehedge::parse_run_config(doc);
    if (opt.seed) cfg.seed = *opt.seed;
    return cfg;
}

int emit(const gamehedge::CommandOutput& result, const CliOptions& opt) {
    const std::string body =
        opt.format == "csv" ? result.csv : result.doc.dump(2) + "\n";
    if (opt.out_path.empty()) {
        std::cout << body;
    } else {
        std::ofstream out(opt.out_path);
        if (!out) {
            std::cerr << "error: cannot write " << opt.out_path << "\n";
            return gamehedge::kExitConfigError;
        }
        out << body;
    }
    return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust pricing and hedging for game options on bounded-move lattices"};
    app.require_subcommand(1);

    using Runner = std::function<gamehedge::CommandOutput(const gamehedge::RunConfig&)>;
    struct Entry {
        const char* name;
        const char* help;
        Runner run;
    };
    const Entry entries[] = {
        {"price", "Robust value per grid refinement", gamehedge::cmd_price},
        {"hedge", "Build the hedge and audit it on every lattice path", gamehedge::cmd_hedge},
        {"verify", "Audit a hedge, optionally with altered capital and an off-lattice lift",
         gamehedge::cmd_verify},
        {"adversary", "Search for the worst path and exercise against the hedge",
         gamehedge::cmd_adversary},
        {"oracle", "Cross-check the robust price against fixed-measure valuations",
         gamehedge::cmd_oracle},
        {"converge", "Track the value across refinements and the tracking budget",
         gamehedge::cmd_converge},
    };

    CliOptions opt;
    const Entry* chosen = nullptr;
    for (const Entry& e : entries) {
        CLI::App* sub = app.add_subcommand(e.name, e.help);
        add_common(sub, opt);
        sub->callback([&chosen, &e] { chosen = &e; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);  // prints help or the usage error
        return rc == 0 ? 0 : gamehedge::kExitConfigError;
    }

    try {
        const gamehedge::RunConfig cfg = load_config(opt);
        return emit(chosen->run(cfg), opt);
    } catch (const gamehedge::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return gamehedge::kExitConfigError;
    } catch (const gamehedge::CapExceeded& e) {
        std::cerr << "error: " << e.what() << "\n";
        return gamehedge::kExitCapExceeded;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return gamehedge::kExitConfigError;
    }
}
