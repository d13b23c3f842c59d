// managerd: run the coordination manager from a JSON config file.
//
// Config shape:
// {
//   "listen_port": 7000,
//   "verifiers": [{"id": 0, "host": "10.0.0.1", "port": 7100,
//                  "lat": 45.0, "lon": -75.0}, ...],
//   "keys": {"0-100": "<64 hex chars>", "100-200": "<...>", ...},
//   "signing_priv": "<64 hex chars>",   // Ed25519 seed for session grants
//   "epsilon_ms": 10, "iterations": 8, "tau": 0.7, "interval_ms": 300,
//   "epsilon_slv_ms": 5,
//   "results_log": "results.jsonl",
//   "pin_store": "pins.txt"
// }
// Defaults mirror the live-demo operating point: 8 iterations at 300 ms
// spacing, epsilon 10 ms, tau 0.7.

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "geoverity/crypto.hpp"
#include "geoverity/nodes.hpp"

namespace {

std::atomic<bool> g_stop{false};
void handle_signal(int) { g_stop = true; }

geoverity::node::ManagerConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    const auto j = nlohmann::json::parse(in);

    geoverity::node::ManagerConfig cfg;
    cfg.listen_port = j.at("listen_port").get<std::uint16_t>();
    for (const auto& v : j.at("verifiers"))
        cfg.verifiers.push_back({v.at("id").get<int>(), v.at("host").get<std::string>(),
                                 v.at("port").get<std::uint16_t>(),
                                 geoverity::geo::GeoPoint(v.at("lat").get<double>(),
                                                          v.at("lon").get<double>())});
    for (const auto& [pair, hex] : j.at("keys").items()) {
        const auto dash = pair.find('-');
        if (dash == std::string::npos) throw std::runtime_error("bad key pair id: " + pair);
        cfg.keys.set(static_cast<std::uint16_t>(std::stoi(pair.substr(0, dash))),
                     static_cast<std::uint16_t>(std::stoi(pair.substr(dash + 1))),
                     geoverity::crypto::from_hex(hex.get<std::string>()));
    }
    cfg.signing.priv = geoverity::crypto::from_hex(j.at("signing_priv").get<std::string>());
    cfg.signing.pub = geoverity::node::ed25519_public_from_seed(cfg.signing.priv);
    cfg.params = geoverity::cpv::CalibrationParams(
        j.value("epsilon_ms", 10.0), j.value("iterations", 8), j.value("tau", 0.7));
    cfg.interval_ms = j.value("interval_ms", 300.0);
    cfg.epsilon_slv_ms = j.value("epsilon_slv_ms", 5.0);
    cfg.session_ttl_ms = j.value("session_ttl_ms", 120000.0);
    cfg.results_log_path = j.value("results_log", std::string("results.jsonl"));
    cfg.pin_store_path = j.value("pin_store", std::string());
    cfg.message_timeout_ms = j.value("message_timeout_ms", 2000);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"geoverity manager daemon"};
    std::string config_path;
    app.add_option("-c,--config", config_path, "JSON config file")->required();
    CLI11_PARSE(app, argc, argv);

    try {
        geoverity::node::ManagerNode node(load_config(config_path));
        node.start();
        std::signal(SIGINT, handle_signal);
        std::signal(SIGTERM, handle_signal);
        std::cerr << "managerd: listening on port " << node.port() << "\n";
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
        node.stop();
    } catch (const std::exception& e) {
        std::cerr << "managerd: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
