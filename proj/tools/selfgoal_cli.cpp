#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "selfgoal/errors.hpp"
#include "selfgoal/metrics.hpp"
#include "selfgoal/runner.hpp"

using namespace selfgoal;

namespace {

std::string read_file_or_die(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void maybe_write(const std::string& path, const std::string& content) {
    if (path.empty()) return;
    std::ofstream out(path, std::ios::binary);
    out << content;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SelfGoal arena: goal-tree agents, game environments, ratings"};
    app.require_subcommand(1);

    // run
    std::string run_config, run_output;
    auto* run = app.add_subcommand("run", "Run an experiment from a config file");
    run->add_option("config", run_config, "Experiment config (JSON)")->required();
    run->add_option("--output-dir", run_output, "Override the config's output_dir");

    // sweep-xi
    std::string sweep_config;
    std::vector<double> sweep_values{0.6, 0.7, 0.8, 0.9};
    auto* sweep = app.add_subcommand("sweep-xi", "Run the similarity-threshold sweep");
    sweep->add_option("config", sweep_config, "Experiment config (JSON)")->required();
    sweep->add_option("--values", sweep_values, "Threshold values");

    // rate
    std::string rate_path, rate_csv;
    auto* rate = app.add_subcommand("rate", "TrueSkill ratings from a match-history file");
    rate->add_option("history", rate_path, "Match history (one result per line)")->required();
    rate->add_option("--csv", rate_csv, "Also write ratings as CSV to this path");

    // report
    std::string report_dir, report_csv_path;
    auto* rep = app.add_subcommand("report", "Score tables for a recorded run");
    rep->add_option("dir", report_dir, "Record directory")->required();
    rep->add_option("--csv", report_csv_path, "Also write the table as CSV to this path");

    // replay
    std::string replay_dir;
    ReplayFilter filter;
    std::string f_agent, f_kind;
    int f_round = -1, f_repeat = -1;
    auto* replay = app.add_subcommand("replay", "Pretty-print transcript events");
    replay->add_option("dir", replay_dir, "Record directory")->required();
    replay->add_option("--agent", f_agent, "Filter by agent label");
    replay->add_option("--kind", f_kind, "Filter by event kind");
    replay->add_option("--round", f_round, "Filter by round");
    replay->add_option("--repeat", f_repeat, "Filter by repeat");

    // tree
    std::string tree_dir, tree_agent;
    int tree_round = -1;
    auto* tree = app.add_subcommand("tree", "Flat id: text dump of a tree snapshot");
    tree->add_option("dir", tree_dir, "Record directory")->required();
    tree->add_option("--agent", tree_agent, "Agent label")->required();
    tree->add_option("--round", tree_round, "Snapshot round (default: latest)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            ExperimentConfig cfg = ExperimentConfig::load(run_config);
            if (!run_output.empty()) cfg.output_dir = run_output;
            RunRecord record = run_experiment(cfg);
            std::cout << "record: " << record.dir << "\n";
            std::cout << "record digest: " << record.record_digest << "\n";
            std::cout << report_text(record);
            return record.complete ? 0 : 1;
        }
        if (sweep->parsed()) {
            ExperimentConfig cfg = ExperimentConfig::load(sweep_config);
            auto rows = sweep_xi(cfg, sweep_values);
            std::cout << sweep_table(rows);
            return 0;
        }
        if (rate->parsed()) {
            auto history = parse_match_history(read_file_or_die(rate_path));
            std::vector<std::string> labels;
            for (const auto& m : history)
                for (const auto& p : m.participants)
                    if (std::find(labels.begin(), labels.end(), p) == labels.end())
                        labels.push_back(p);
            auto rows = leaderboard(labels, history);
            std::cout << ratings_table(rows);
            maybe_write(rate_csv, ratings_csv(rows));
            return 0;
        }
        if (rep->parsed()) {
            RunRecord record = load_record(report_dir);
            std::cout << report_text(record);
            maybe_write(report_csv_path, report_csv(record));
            return 0;
        }
        if (replay->parsed()) {
            if (!f_agent.empty()) filter.agent = f_agent;
            if (!f_kind.empty()) filter.kind = f_kind;
            if (f_round >= 0) filter.round = f_round;
            if (f_repeat >= 0) filter.repeat = f_repeat;
            RunRecord record = load_record(replay_dir);
            std::cout << replay_text(record, filter);
            return 0;
        }
        if (tree->parsed()) {
            std::optional<int> round;
            if (tree_round >= 0) round = tree_round;
            std::cout << tree_snapshot_dump(tree_dir, tree_agent, round);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
