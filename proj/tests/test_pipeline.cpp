#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "ltv/config.hpp"
#include "ltv/errors.hpp"
#include "ltv/ingest.hpp"
#include "ltv/pipeline.hpp"
#include "ltv/rng.hpp"

using namespace ltv;
using namespace ltv::pipeline;

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

std::size_t count_lines(const std::string& s) {
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

std::string mini_config(const std::string& dir, const std::string& models,
                        const std::string& extra = "") {
    std::ostringstream os;
    os << "[paths]\n"
       << "events = " << dir << "/events.jsonl\n"
       << "workdir = " << dir << "/work\n"
       << "[cohort]\n"
       << "window_start = 2016-03-01\n"
       << "window_end = 2016-05-30\n"
       << "churn_gap_days = 9\n"
       << "[predict]\n"
       << "horizon_days = 90\n"
       << "models = " << models << "\n"
       << "spend_model = gamma_gamma\n"
       << "mc_draws = 20000\n"
       << "[fit]\n"
       << "multistarts = 2\n"
       << "max_evals = 6000\n"
       << "[train]\n"
       << "max_epochs = 25\n"
       << "patience = 8\n"
       << "batch_size = 32\n"
       << "series_len = 60\n"
       << "[sim]\n"
       << "world = pareto_nbd\n"
       << "r = 0.9\nalpha = 8\ns = 0.8\nbeta = 35\n"
       << "p_spend = 4\nq_spend = 3\ngamma_spend = 12\n"
       << "n_customers = 400\n"
       << "observation_days = 150\n"
       << "stagger_days = 30\n"
       << "start_date = 2016-01-01\n"
       << "behavior_linkage = 1.0\n"
       << "[seeds]\n"
       << "master = 4242\n"
       << extra;
    return os.str();
}

PipelineConfig setup(const std::string& dir, const std::string& models,
                     const std::string& extra = "") {
    fs::remove_all(dir);
    fs::create_directories(dir);
    return parse_config_text(mini_config(dir, models, extra));
}

}  // namespace

TEST_CASE("config parsing: sections, lists, defaults and errors") {
    const auto c = parse_config_text(mini_config("/tmp/x", "pareto_nbd, mbg"));
    CHECK(c.events_path == "/tmp/x/events.jsonl");
    CHECK(c.window_start == *parse_date("2016-03-01"));
    CHECK(c.churn_gap_days == 9);
    CHECK(c.horizon_days == 90);
    REQUIRE(c.models.size() == 2);
    CHECK(c.models[0] == ModelKind::pareto_nbd);
    CHECK(c.models[1] == ModelKind::mbg);
    CHECK(c.spend_model == btyd::SpendModel::gamma_gamma);
    REQUIRE(c.sim.has_value());
    CHECK(c.sim->n_customers == 400);
    CHECK(c.k_max == 12);             // default
    CHECK(c.train.patience == 8);     // overridden
    CHECK(c.train.adam_beta1 == 0.9); // default

    CHECK_THROWS_AS(parse_config_text("[predict]\nmodels = spaceship\n"), UsageError);
    CHECK_THROWS_AS(parse_config_text("[cohort]\nwindow_start = 2016-13-01\n"), UsageError);
    CHECK_THROWS_AS(parse_config_text("no equals sign here"), UsageError);

    // canonical echo parses back to the same hash
    const auto echo = render_config(c);
    const auto reparsed = parse_config_text(echo);
    CHECK(config_hash(reparsed) == config_hash(c));
}

TEST_CASE("simulate: deterministic output that reingests cleanly") {
    const std::string dir = "/tmp/ltv_pipe_sim";
    auto config = setup(dir, "pareto_nbd");
    cmd_simulate(config);
    const auto first = slurp(config.events_path);
    cmd_simulate(config);
    const auto second = slurp(config.events_path);
    CHECK(first == second);  // byte-identical rerun

    std::istringstream is(first);
    const auto parsed = ingest::parse_events(is);
    CHECK(parsed.errors.empty());
    CHECK(parsed.records.size() == count_lines(first));
    CHECK(fs::exists(fs::path(dir) / "work/latents.csv"));
    CHECK(fs::exists(fs::path(dir) / "work/manifest.json"));

    // missing sim section is a usage error
    PipelineConfig no_sim = config;
    no_sim.sim.reset();
    CHECK_THROWS_AS(cmd_simulate(no_sim), UsageError);

    // n = 0 is a usage error
    PipelineConfig zero = config;
    zero.sim->n_customers = 0;
    CHECK_THROWS_AS(cmd_simulate(zero), UsageError);
}

TEST_CASE("full mini pipeline over parametric and network models") {
    const std::string dir = "/tmp/ltv_pipe_full";
    auto config = setup(dir, "pareto_nbd, mbg, dnn");
    cmd_simulate(config);
    cmd_ingest(config);
    CHECK(fs::exists(fs::path(dir) / "work/timelines.csv"));
    CHECK(fs::exists(fs::path(dir) / "work/split.csv"));

    cmd_rfm(config);
    const auto rfm_csv = slurp(fs::path(dir) / "work/rfm.csv");
    CHECK(rfm_csv.find("player_id,x,t_x,T,m_bar,sum_log_itt,total_spend") == 0);
    CHECK(fs::exists(fs::path(dir) / "work/whale_report.json"));

    cmd_fit(config);
    CHECK(fs::exists(fs::path(dir) / "work/models/pareto_nbd.json"));
    CHECK(fs::exists(fs::path(dir) / "work/models/mbg.json"));
    CHECK(fs::exists(fs::path(dir) / "work/models/dnn.json"));
    CHECK(fs::exists(fs::path(dir) / "work/models/dnn.weights"));
    CHECK(fs::exists(fs::path(dir) / "work/models/gamma_gamma.json"));

    cmd_predict(config);
    const auto pareto_preds = slurp(fs::path(dir) / "work/predictions/pareto_nbd.csv");
    const auto mbg_preds = slurp(fs::path(dir) / "work/predictions/mbg.csv");
    const auto dnn_preds = slurp(fs::path(dir) / "work/predictions/dnn.csv");
    // one row per test player per model, plus headers
    CHECK(count_lines(pareto_preds) == count_lines(mbg_preds));
    CHECK(count_lines(pareto_preds) == count_lines(dnn_preds));
    CHECK(count_lines(pareto_preds) > 10);

    const auto reports = cmd_evaluate(config);
    CHECK(reports.size() == 3 * 2);  // (model, slice) pairs
    const auto eval_csv = slurp(fs::path(dir) / "work/reports/eval.csv");
    CHECK(count_lines(eval_csv) == 1 + 6);
    CHECK(eval_csv.find("pareto_nbd,all_pu") != std::string::npos);
    CHECK(eval_csv.find("dnn,top_spenders") != std::string::npos);
    CHECK(fs::exists(fs::path(dir) / "work/reports/whale_report.json"));
    CHECK(fs::exists(fs::path(dir) / "work/reports/eval.txt"));
}

TEST_CASE("evaluate is invariant to prediction row order") {
    const std::string dir = "/tmp/ltv_pipe_order";
    auto config = setup(dir, "pareto_nbd");
    cmd_simulate(config);
    cmd_fit(config);
    cmd_predict(config);
    cmd_evaluate(config);
    const auto baseline = slurp(fs::path(dir) / "work/reports/eval.csv");

    // shuffle prediction rows
    const fs::path pred_path = fs::path(dir) / "work/predictions/pareto_nbd.csv";
    std::ifstream f(pred_path);
    std::string header, line;
    std::getline(f, header);
    std::vector<std::string> rows;
    while (std::getline(f, line))
        if (!line.empty()) rows.push_back(line);
    f.close();
    Rng rng(1);
    for (std::size_t i = rows.size(); i > 1; --i)
        std::swap(rows[i - 1], rows[rng.below(i)]);
    std::ofstream out(pred_path);
    out << header << '\n';
    for (const auto& r : rows) out << r << '\n';
    out.close();

    cmd_evaluate(config);
    CHECK(slurp(fs::path(dir) / "work/reports/eval.csv") == baseline);
}

TEST_CASE("horizon zero zeroes every prediction") {
    const std::string dir = "/tmp/ltv_pipe_h0";
    auto config = setup(dir, "pareto_nbd, dnn");
    cmd_simulate(config);
    cmd_fit(config);
    config.horizon_days = 0;
    cmd_predict(config);
    for (const char* model : {"pareto_nbd", "dnn"}) {
        std::ifstream f(fs::path(dir) / "work/predictions" / (std::string(model) + ".csv"));
        std::string line;
        std::getline(f, line);  // header
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            // ltv is the fifth column
            std::istringstream is(line);
            std::string col;
            for (int i = 0; i < 5; ++i) std::getline(is, col, ',');
            CHECK(std::stod(col) == 0.0);
        }
    }
}

TEST_CASE("players with identical purchase histories get identical parametric predictions") {
    const std::string dir = "/tmp/ltv_pipe_twins";
    fs::remove_all(dir);
    fs::create_directories(dir);
    // twenty churned paying twins plus filler cohort
    std::ostringstream events;
    auto purchase = [&](const std::string& id, const char* date, double value) {
        events << R"({"player_id":")" << id << R"(","ts":")" << date
               << R"(T10:00:00Z","kind":"purchase","value":)" << value << "}\n";
    };
    for (int i = 0; i < 30; ++i) {
        const std::string a = "twin_a_" + std::to_string(i);
        const std::string b = "twin_b_" + std::to_string(i);
        for (const auto& id : {a, b}) {
            purchase(id, "2016-01-05", 20.0 + i);
            purchase(id, "2016-02-01", 35.0);
            purchase(id, "2016-03-10", 10.0 + (i % 3));
        }
    }
    std::ofstream(dir + "/events.jsonl") << events.str();

    auto config = parse_config_text(mini_config(dir, "mbg"));
    config.fit_min_users = 10;
    config.predict_all_cohort = true;
    cmd_fit(config);
    cmd_predict(config);

    std::ifstream f(fs::path(dir) / "work/predictions/mbg.csv");
    std::string line;
    std::getline(f, line);
    std::map<std::string, std::string> tail_by_id;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        tail_by_id[line.substr(0, comma)] = line.substr(comma);
    }
    for (int i = 0; i < 30; ++i) {
        const auto a = tail_by_id.find("twin_a_" + std::to_string(i));
        const auto b = tail_by_id.find("twin_b_" + std::to_string(i));
        REQUIRE(a != tail_by_id.end());
        REQUIRE(b != tail_by_id.end());
        CHECK(a->second == b->second);
    }
}

TEST_CASE("command guards") {
    const std::string dir = "/tmp/ltv_pipe_guards";
    auto config = setup(dir, "pareto_nbd");
    cmd_simulate(config);

    PipelineConfig no_models = config;
    no_models.models.clear();
    CHECK_THROWS_AS(cmd_fit(no_models), UsageError);
    CHECK_THROWS_AS(cmd_predict(no_models), UsageError);

    // predict before fit names the missing artifact
    try {
        cmd_predict(config);
        FAIL("expected UsageError");
    } catch (const UsageError& e) {
        CHECK(std::string(e.what()).find("pareto_nbd.json") != std::string::npos);
    }

    // evaluate before predict
    cmd_fit(config);
    CHECK_THROWS_AS(cmd_evaluate(config), UsageError);
}

TEST_CASE("reports are byte-identical across pipeline reruns") {
    const std::string dir_a = "/tmp/ltv_pipe_det_a";
    const std::string dir_b = "/tmp/ltv_pipe_det_b";
    auto ca = setup(dir_a, "pareto_nbd");
    auto cb = setup(dir_b, "pareto_nbd");
    const auto ra = run_full_pipeline(ca);
    const auto rb = run_full_pipeline(cb);
    CHECK(slurp(fs::path(dir_a) / "work/reports/eval.csv") ==
          slurp(fs::path(dir_b) / "work/reports/eval.csv"));
    CHECK(slurp(fs::path(dir_a) / "work/predictions/pareto_nbd.csv") ==
          slurp(fs::path(dir_b) / "work/predictions/pareto_nbd.csv"));
    REQUIRE(ra.size() == rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i) CHECK(ra[i].rmsle == rb[i].rmsle);
}
