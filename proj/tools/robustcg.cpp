#include <robustcg/experiments.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

int run(const std::string& experiment, const std::string& config_path, const std::optional<std::string>& out_dir,
        const std::optional<std::uint64_t>& seed)
{
    using namespace robustcg;
    try {
        auto cfg = experiments::load_config(config_path, experiment);
        if (out_dir) {
            cfg.out_dir = *out_dir;
        }
        if (seed) {
            cfg.seed = *seed;
        }
        experiments::run_experiment(cfg);
        std::cout << experiment << ": outputs written to " << cfg.out_dir << "\n";
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "robustcg " << experiment << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "robustcg " << experiment << ": " << e.what() << "\n";
        return 1;
    }
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Projection-free robust sparse recovery experiments"};
    app.require_subcommand(1);

    std::string config;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::string chosen;

    for (const auto& name : robustcg::experiments::experiment_names()) {
        auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
        sub->add_option("--config", config, "JSON experiment config")->required()->check(CLI::ExistingFile);
        sub->add_option("--out-dir", out_dir, "output directory (overrides out_dir)");
        sub->add_option("--seed", seed, "base seed (overrides seed)");
        sub->callback([&chosen, name] { chosen = name; });
    }

    CLI11_PARSE(app, argc, argv);
    return run(chosen, config, out_dir, seed);
}
