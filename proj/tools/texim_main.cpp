#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "texim/commands.hpp"
#include "texim/config.hpp"
#include "texim/error.hpp"

namespace {

void print_error(const std::string& code, const std::string& message) {
    nlohmann::json j;
    j["error"] = {{"code", code}, {"message", message}};
    std::cerr << j.dump() << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace texim;

    CLI::App app{"texim: text to fixed-size image encodings"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    bool force = false;
    std::string ablation;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "run configuration (JSON)")->required();
        sub->add_option("--seed", seed, "override the configured seed");
        sub->add_flag("--force", force, "overwrite existing outputs");
        sub->add_option("--ablation", ablation, "model variant")
            ->check(CLI::IsMember({"fast-c", "tex-fast", "discrete"}));
        return sub;
    };
    auto* train_vae = add_common(app.add_subcommand("train-vae", "train vocabulary and VAE"));
    auto* encode = add_common(app.add_subcommand("encode", "encode input lines to images"));
    auto* train_sts = add_common(app.add_subcommand("train-sts", "train the STS classifier"));
    auto* eval_sts = add_common(app.add_subcommand("eval-sts", "evaluate the STS classifier on the test split"));
    auto* report = add_common(app.add_subcommand("report", "histogram and pixel comparison report"));
    auto* memory = add_common(app.add_subcommand("memory-report", "storage comparison table"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", e.what());
        return 2;
    }

    try {
        config::RunConfig c = config::load_config(config_path);
        if (seed) config::apply_seed(c, *seed);
        commands::CommandOptions o;
        o.force = force;
        o.log = &std::cerr;
        if (!ablation.empty()) o.variant = config::parse_variant(ablation);

        if (train_vae->parsed()) {
            const auto r = commands::train_vae(c, o);
            std::cout << "trained VAE on " << r.sequences << " sequences, vocabulary " << r.vocab_size << ", "
                      << r.epochs_run << " epochs (best " << r.best_epoch << (r.early_stopped ? ", early stop" : "")
                      << ")\n";
        } else if (encode->parsed()) {
            const auto r = commands::encode(c, o);
            std::cout << "wrote " << r.written << " images, skipped " << r.skipped << " empty lines\n";
        } else if (train_sts->parsed()) {
            const auto r = commands::train_sts(c, o);
            std::cout << "trained STS (" << sts::to_string(r.mode) << ") on " << r.pairs << " pairs, " << r.epochs_run
                      << " epochs" << (r.early_stopped ? " (early stop)" : "") << "\n";
        } else if (eval_sts->parsed()) {
            const auto r = commands::eval_sts(c, o);
            std::cout << nlohmann::json(r.metrics).dump() << "\n";
        } else if (report->parsed()) {
            const auto r = commands::report(c, o);
            std::cout << "reported " << r.pairs << " image pairs\n";
        } else if (memory->parsed()) {
            const auto rows = commands::memory_report(c, o);
            std::cout << "wrote " << rows.size() << " memory report rows\n";
        }
    } catch (const Error& e) {
        print_error(to_string(e.code()), e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error("internal", e.what());
        return 1;
    }
    return 0;
}
