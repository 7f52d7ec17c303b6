#include <cstdio>
#include <exception>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ltv/config.hpp"
#include "ltv/errors.hpp"
#include "ltv/metrics.hpp"
#include "ltv/pipeline.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    std::string workdir;
    std::string models;
    long long seed = -1;
    int horizon = -1;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "config file (key=value sections)")
        ->required();
    cmd->add_option("--workdir", flags.workdir, "override paths.workdir");
    cmd->add_option("--seed", flags.seed, "override seeds.master");
    cmd->add_option("--models", flags.models, "override predict.models (comma separated)");
    cmd->add_option("--horizon", flags.horizon, "override predict.horizon_days");
}

ltv::pipeline::PipelineConfig effective_config(const CommonFlags& flags) {
    auto config = ltv::pipeline::load_config(flags.config_path);
    if (!flags.workdir.empty()) config.workdir = flags.workdir;
    if (flags.seed >= 0) {
        // re-derive the dependent seeds exactly as the config loader does
        std::string text = ltv::pipeline::render_config(config);
        const auto pos = text.rfind("master = ");
        text = text.substr(0, pos) + "master = " + std::to_string(flags.seed) + "\n";
        config = ltv::pipeline::parse_config_text(text);
        if (!flags.workdir.empty()) config.workdir = flags.workdir;
    }
    if (flags.horizon >= 0) config.horizon_days = flags.horizon;
    if (!flags.models.empty()) {
        config.models.clear();
        std::string item;
        std::istringstream is(flags.models);
        while (std::getline(is, item, ','))
            if (!item.empty()) config.models.push_back(ltv::pipeline::model_kind_from_string(item));
    }
    return config;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"customer lifetime value pipeline: simulate, ingest, rfm, fit, predict, evaluate"};
    app.require_subcommand(1);

    CommonFlags flags;
    auto* sim = app.add_subcommand("simulate", "generate a synthetic event log");
    auto* ing = app.add_subcommand("ingest", "build cohort timelines and split");
    auto* rfm = app.add_subcommand("rfm", "extract RFM table and whale threshold");
    auto* fit = app.add_subcommand("fit", "fit the requested models");
    auto* pred = app.add_subcommand("predict", "write per-player LTV predictions");
    auto* eval = app.add_subcommand("evaluate", "score predictions against observed spend");
    for (auto* cmd : {sim, ing, rfm, fit, pred, eval}) add_common(cmd, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const auto config = effective_config(flags);
        if (sim->parsed()) ltv::pipeline::cmd_simulate(config);
        if (ing->parsed()) ltv::pipeline::cmd_ingest(config);
        if (rfm->parsed()) ltv::pipeline::cmd_rfm(config);
        if (fit->parsed()) ltv::pipeline::cmd_fit(config);
        if (pred->parsed()) ltv::pipeline::cmd_predict(config);
        if (eval->parsed()) {
            const auto reports = ltv::pipeline::cmd_evaluate(config);
            std::fputs(ltv::metrics::report_table(reports).c_str(), stdout);
        }
    } catch (const ltv::UsageError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const ltv::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const ltv::NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
