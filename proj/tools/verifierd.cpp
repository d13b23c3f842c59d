// verifierd: run one CPV/SLV verifier from a JSON config file.
//
// Config shape:
// {
//   "id": 0,
//   "listen_port": 7100,
//   "peers": [{"id": 1, "host": "10.0.0.2", "port": 7101}, ...],
//   "keys": {"0-1": "<64 hex chars>", "0-100": "<...>", ...},
//   "manager_pub": "<64 hex chars>",
//   "baseline_period_ms": 6000,
//   "offset_period_ms": 1800000,
//   "message_timeout_ms": 2000,
//   "puzzle_difficulty": 0
// }
// Key map entries are "<id>-<id>" pairs (order irrelevant); the manager is
// id 100, clients id 200.

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

geoverity::node::VerifierConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    const auto j = nlohmann::json::parse(in);

    geoverity::node::VerifierConfig cfg;
    cfg.id = j.at("id").get<int>();
    cfg.listen_port = j.at("listen_port").get<std::uint16_t>();
    for (const auto& p : j.at("peers"))
        cfg.peers.push_back({p.at("id").get<int>(), p.at("host").get<std::string>(),
                             p.at("port").get<std::uint16_t>()});
    for (const auto& [pair, hex] : j.at("keys").items()) {
        const auto dash = pair.find('-');
        if (dash == std::string::npos) throw std::runtime_error("bad key pair id: " + pair);
        cfg.keys.set(static_cast<std::uint16_t>(std::stoi(pair.substr(0, dash))),
                     static_cast<std::uint16_t>(std::stoi(pair.substr(dash + 1))),
                     geoverity::crypto::from_hex(hex.get<std::string>()));
    }
    cfg.manager_pub = geoverity::crypto::from_hex(j.at("manager_pub").get<std::string>());
    cfg.baseline_period_ms = j.value("baseline_period_ms", 6000.0);
    cfg.offset_period_ms = j.value("offset_period_ms", 1800000.0);
    cfg.message_timeout_ms = j.value("message_timeout_ms", 2000);
    cfg.puzzle_difficulty = j.value("puzzle_difficulty", 0);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"geoverity verifier daemon"};
    std::string config_path;
    app.add_option("-c,--config", config_path, "JSON config file")->required();
    CLI11_PARSE(app, argc, argv);

    try {
        geoverity::node::VerifierNode node(load_config(config_path));
        node.start();
        std::signal(SIGINT, handle_signal);
        std::signal(SIGTERM, handle_signal);
        std::cerr << "verifierd: listening on port " << node.port() << "\n";
        while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(200));
        node.stop();
    } catch (const std::exception& e) {
        std::cerr << "verifierd: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
