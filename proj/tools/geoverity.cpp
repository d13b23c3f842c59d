// geoverity: experiment runner, calibration, and report aggregation.
//
//   geoverity sim run <config.json>     run a simulated CPV or SLV experiment
//   geoverity calibrate <traces.json>   pick (epsilon, n, tau) from traces
//   geoverity report <records.jsonl>    aggregate FA/FR tables from records
//
// Defaults mirror the live-demo operating point: 8 iterations at 300 ms
// spacing, epsilon 10 ms, tau 0.7.

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "geoverity/cpv.hpp"
#include "geoverity/experiment.hpp"
#include "geoverity/netsim.hpp"

namespace {

using nlohmann::json;
using namespace geoverity;

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return json::parse(in);
}

netsim::DelayModelParams model_from(const json& j) {
    if (j.value("noiseless", false)) return netsim::DelayModelParams::noiseless();
    netsim::DelayModelParams m;
    if (j.contains("jitter_mean_ms"))
        m.jitter = netsim::JitterExponential{j.at("jitter_mean_ms").get<double>()};
    return m;
}

netsim::AdversaryConfig adversary_from(const json& j) {
    if (!j.contains("adversary")) return netsim::AdversaryNone{};
    const auto& a = j.at("adversary");
    const std::string kind = a.value("kind", "none");
    if (kind == "none") return netsim::AdversaryNone{};
    if (kind == "delay_inflate") {
        netsim::AdversaryDelayInflate inflate;
        inflate.added_ms = a.at("added_ms").get<double>();
        for (const auto& leg : a.at("target_legs"))
            inflate.target_legs.emplace_back(leg.at(0).get<std::string>(),
                                             leg.at(1).get<std::string>());
        return inflate;
    }
    if (kind == "middlebox_relay") {
        netsim::AdversaryMiddleboxRelay mbx;
        mbx.middlebox_node = a.at("middlebox_node").get<std::string>();
        mbx.client_true_node = a.at("client_true_node").get<std::string>();
        mbx.strategy = a.value("strategy", std::string("solve_locally")) == "forward_to_client"
                           ? netsim::PuzzleStrategy::FORWARD_TO_CLIENT
                           : netsim::PuzzleStrategy::SOLVE_LOCALLY;
        mbx.concurrent_clients = a.value("concurrent_clients", 1);
        mbx.cores = a.value("cores", 1);
        mbx.core_hash_rate = a.value("core_hash_rate", 1000.0);
        return mbx;
    }
    throw std::runtime_error("unknown adversary kind: " + kind);
}

int run_sim(const std::string& config_path, const std::string& out_path) {
    const json j = load_json(config_path);
    std::ofstream out_file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        out_file.open(out_path);
        if (!out_file) throw std::runtime_error("cannot open " + out_path);
        out = &out_file;
    }

    const std::string kind = j.value("kind", "cpv");
    if (kind == "cpv") {
        experiment::CpvExperimentConfig cfg;
        cfg.seed = j.value("seed", 1ull);
        cfg.model = model_from(j);
        cfg.triangle_count = j.value("triangles", 5);
        cfg.inside_per_triangle = j.value("inside_per_triangle", 20);
        cfg.outside_per_triangle = j.value("outside_per_triangle", 20);
        cfg.inside_margin_frac = j.value("inside_margin_frac", 0.10);
        cfg.outside_clearance_frac = j.value("outside_clearance_frac", 0.05);
        cfg.wifi_inside_nodes = j.value("wifi_inside_nodes", false);
        cfg.noiseless_baselines = j.value("noiseless", false);
        cfg.params = cpv::CalibrationParams(j.value("epsilon_ms", 10.0),
                                            j.value("iterations", 8), j.value("tau", 0.7));
        cfg.adversary = adversary_from(j);
        cfg.puzzle_difficulty = j.value("puzzle_difficulty", 0);
        cfg.client_hash_rate = j.value("client_hash_rate", 1000.0);

        const auto report = experiment::run_cpv_experiment(cfg);
        *out << report.to_jsonl();
        std::cerr << "cpv experiment: " << report.records.size() << " sessions, FA="
                  << (report.rates.false_accept_rate
                          ? std::to_string(*report.rates.false_accept_rate * 100) + "%"
                          : "n/a")
                  << " FR="
                  << (report.rates.false_reject_rate
                          ? std::to_string(*report.rates.false_reject_rate * 100) + "%"
                          : "n/a")
                  << " indeterminate=" << report.rates.indeterminate << "\n";
        return 0;
    }
    if (kind == "slv") {
        experiment::SlvPlacementConfig cfg;
        cfg.seed = j.value("seed", 1ull);
        cfg.model = model_from(j);
        cfg.placements = j.value("placements", 500);
        cfg.samples_per_layer = j.value("samples_per_layer", 3);
        cfg.epsilon_slv_ms = j.value("epsilon_slv_ms", 0.0);
        cfg.half_false_assertions = j.value("half_false_assertions", true);

        int fa = 0, fr = 0, true_n = 0, false_n = 0;
        for (const auto& r : experiment::run_slv_experiment(cfg)) {
            *out << json{{"assertion_true", r.assertion_true},
                         {"oracle_inside_all", r.oracle_inside_all},
                         {"verification_passed", r.verification_passed},
                         {"indeterminate", r.indeterminate}}
                        .dump()
                 << "\n";
            if (r.indeterminate) continue;
            if (r.assertion_true) {
                ++true_n;
                fr += !r.verification_passed;
            } else {
                ++false_n;
                fa += r.verification_passed;
            }
        }
        std::cerr << "slv experiment: " << cfg.placements << " placements, FA=" << fa << "/"
                  << false_n << " FR=" << fr << "/" << true_n << "\n";
        return 0;
    }
    throw std::runtime_error("config kind must be \"cpv\" or \"slv\"");
}

int run_calibrate(const std::string& traces_path) {
    const json j = load_json(traces_path);
    std::vector<cpv::GroundTruthTrace> traces;
    for (const auto& t : j) {
        cpv::GroundTruthTrace trace;
        trace.node_id = t.at("node_id").get<std::string>();
        trace.inside = t.at("inside").get<bool>();
        for (std::size_t i = 0; i < 3; ++i)
            trace.baseline_ms[i] = t.at("baseline_ms").at(i).get<double>();
        for (const auto& r : t.at("rounds")) {
            if (r.is_null()) {
                trace.rounds.push_back(std::nullopt);
                continue;
            }
            geometry::OwdEstimate est;
            est.a = r.at(0).get<double>();
            est.b = r.at(1).get<double>();
            est.c = r.at(2).get<double>();
            est.valid = true;
            trace.rounds.push_back(est);
        }
        traces.push_back(std::move(trace));
    }
    try {
        const auto params = cpv::calibrate(traces);
        std::cout << json{{"epsilon_ms", params.epsilon_ms},
                          {"iterations", params.n},
                          {"tau", params.tau}}
                         .dump()
                  << "\n";
    } catch (const cpv::CalibrationFailed& e) {
        std::cerr << "calibrate: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

int run_report(const std::string& records_path) {
    std::ifstream in(records_path);
    if (!in) throw std::runtime_error("cannot open " + records_path);

    struct Bucket {
        std::vector<cpv::ExperimentOutcome> outcomes;
    };
    std::map<std::string, Bucket> by_triangle;
    Bucket all;

    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = json::parse(line);
        const std::string outcome = j.at("outcome").get<std::string>();
        cpv::ExperimentOutcome o;
        o.true_inside = j.at("true_inside").get<bool>();
        o.decision = outcome == "ACCEPTED"   ? cpv::Decision::ACCEPTED
                     : outcome == "REJECTED" ? cpv::Decision::REJECTED
                                             : cpv::Decision::INDETERMINATE;
        by_triangle[j.at("triangle_id").get<std::string>()].outcomes.push_back(o);
        all.outcomes.push_back(o);
    }
    if (all.outcomes.empty()) throw std::runtime_error("no records in " + records_path);

    auto row = [](const std::string& name, const std::vector<cpv::ExperimentOutcome>& outcomes) {
        const auto rates = cpv::evaluate_fa_fr(outcomes);
        auto fmt = [](std::optional<double> v) {
            if (!v) return std::string("   n/a");
            char buf[16];
            std::snprintf(buf, sizeof buf, "%5.2f%%", *v * 100.0);
            return std::string(buf);
        };
        std::printf("%-12s %6zu  FA %s  FR %s  indeterminate %d\n", name.c_str(),
                    outcomes.size(), fmt(rates.false_accept_rate).c_str(),
                    fmt(rates.false_reject_rate).c_str(), rates.indeterminate);
    };
    std::printf("%-12s %6s  %9s  %9s\n", "triangle", "n", "", "");
    for (const auto& [id, bucket] : by_triangle) row(id, bucket.outcomes);
    row("overall", all.outcomes);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"geoverity experiment toolkit"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("sim", "simulated experiments");
    sim->require_subcommand(1);
    auto* sim_run = sim->add_subcommand("run", "run an experiment from a JSON config");
    std::string sim_config, sim_out;
    sim_run->add_option("config", sim_config, "experiment config (JSON)")->required();
    sim_run->add_option("-o,--out", sim_out, "write per-node records here instead of stdout");

    auto* calibrate = app.add_subcommand("calibrate", "calibrate (epsilon, n, tau) from traces");
    std::string traces_path;
    calibrate->add_option("traces", traces_path, "ground-truth traces (JSON)")->required();

    auto* report = app.add_subcommand("report", "aggregate FA/FR from experiment records");
    std::string records_path;
    report->add_option("records", records_path, "per-node records (JSONL)")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (sim_run->parsed()) return run_sim(sim_config, sim_out);
        if (calibrate->parsed()) return run_calibrate(traces_path);
        if (report->parsed()) return run_report(records_path);
    } catch (const std::exception& e) {
        std::cerr << "geoverity: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
