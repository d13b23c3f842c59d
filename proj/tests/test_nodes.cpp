#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <random>
#include <set>
#include <thread>

#include "geoverity/nodes.hpp"

using namespace geoverity;
using node::kClientId;
using node::kManagerId;

namespace {

std::vector<std::uint8_t> make_key(std::uint8_t tag) {
    std::vector<std::uint8_t> key(32);
    for (std::size_t i = 0; i < key.size(); ++i)
        key[i] = static_cast<std::uint8_t>(tag + i);
    return key;
}

std::array<std::uint16_t, 3> pick_free_ports() {
    // bind-then-release: the verifiers need each other's ports up front
    std::array<std::uint16_t, 3> ports{};
    {
        net::TcpListener l0(0), l1(0), l2(0);
        ports = {l0.port(), l1.port(), l2.port()};
    }
    return ports;
}

node::KeyTable full_key_table() {
    node::KeyTable keys;
    keys.set(0, 1, make_key(1));
    keys.set(0, 2, make_key(2));
    keys.set(1, 2, make_key(3));
    for (std::uint16_t v = 0; v < 3; ++v)
        keys.set(v, kManagerId, make_key(static_cast<std::uint8_t>(0x10 + v)));
    keys.set(kManagerId, kClientId, make_key(0x20));
    return keys;
}

// minimal HTTP responder for SLV probes
class MiniHttpServer {
public:
    MiniHttpServer() : listener_(0) {
        running_ = true;
        thread_ = std::thread([this] {
            while (running_) {
                auto conn = listener_.accept(100);
                if (!conn) continue;
                conn->set_timeout(500);
                std::uint8_t buf[512];
                if (conn->recv_some(buf, sizeof(buf)) > 0) {
                    const std::string resp = "HTTP/1.1 200 OK\r\nContent-Length: 0\r\n\r\n";
                    conn->send_raw(reinterpret_cast<const std::uint8_t*>(resp.data()),
                                   resp.size());
                }
            }
        });
    }
    ~MiniHttpServer() {
        running_ = false;
        listener_.close();
        if (thread_.joinable()) thread_.join();
    }
    std::uint16_t port() const { return listener_.port(); }

private:
    net::TcpListener listener_;
    std::atomic<bool> running_{false};
    std::thread thread_;
};

}  // namespace

TEST_CASE("ed25519 sign/verify round-trip") {
    const auto kp = node::Ed25519KeyPair::generate();
    const std::vector<std::uint8_t> msg{'h', 'i'};
    auto sig = node::ed25519_sign(kp.priv, msg);
    CHECK(node::ed25519_verify(kp.pub, msg, sig));
    sig[0] ^= 1;
    CHECK_FALSE(node::ed25519_verify(kp.pub, msg, sig));
    const auto other = node::Ed25519KeyPair::generate();
    CHECK_FALSE(node::ed25519_verify(other.pub, msg, node::ed25519_sign(kp.priv, msg)));
}

TEST_CASE("session grant serialization and signature") {
    const auto kp = node::Ed25519KeyPair::generate();
    node::SessionGrant grant;
    for (int i = 0; i < 16; ++i) grant.session_id[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i);
    grant.asserted_lat = 45.5;
    grant.asserted_lon = -75.5;
    grant.expiry_ms = 123456789;
    grant.session_key = make_key(0x40);
    grant.signature = node::ed25519_sign(kp.priv, grant.signed_bytes());

    const auto round = node::SessionGrant::from_json(grant.to_json());
    CHECK(round.session_id == grant.session_id);
    CHECK(round.asserted_lat == grant.asserted_lat);
    CHECK(round.session_key == grant.session_key);
    CHECK(node::ed25519_verify(kp.pub, round.signed_bytes(), round.signature));

    // altering the asserted location breaks the signature
    auto forged = round;
    forged.asserted_lat = 10.0;
    CHECK_FALSE(node::ed25519_verify(kp.pub, forged.signed_bytes(), forged.signature));
}

TEST_CASE("key table normalizes pair order") {
    node::KeyTable keys;
    keys.set(2, 1, make_key(9));
    CHECK(keys.get(1, 2) == make_key(9));
    CHECK(keys.get(2, 1) == make_key(9));
    CHECK_THROWS_AS(keys.get(0, 1), std::out_of_range);
}

TEST_CASE("loopback end-to-end: daemons, session, relays, verdicts") {
    const auto ports = pick_free_ports();
    const auto keys = full_key_table();
    const auto manager_kp = node::Ed25519KeyPair::generate();

    // verifier ring ~300 km around the asserted location
    const geo::GeoPoint center(45.0, -75.0);
    const std::array<geo::GeoPoint, 3> positions{geo::destination(center, 0.0, 300.0),
                                                 geo::destination(center, 120.0, 300.0),
                                                 geo::destination(center, 240.0, 300.0)};

    std::vector<std::unique_ptr<node::VerifierNode>> verifiers;
    for (int i = 0; i < 3; ++i) {
        node::VerifierConfig vc;
        vc.id = i;
        vc.listen_port = ports[static_cast<std::size_t>(i)];
        for (int j = 0; j < 3; ++j)
            if (j != i) vc.peers.push_back({j, "127.0.0.1", ports[static_cast<std::size_t>(j)]});
        vc.keys = keys;
        vc.manager_pub = manager_kp.pub;
        vc.baseline_period_ms = 150.0;  // fast sampling so baselines exist quickly
        vc.offset_period_ms = 150.0;
        vc.message_timeout_ms = 500;
        verifiers.push_back(std::make_unique<node::VerifierNode>(vc));
        verifiers.back()->start();
    }

    const auto results_path =
        (std::filesystem::temp_directory_path() / "geoverity_e2e_results.log").string();
    std::filesystem::remove(results_path);

    node::ManagerConfig mc;
    mc.listen_port = 0;
    for (int i = 0; i < 3; ++i)
        mc.verifiers.push_back(
            {i, "127.0.0.1", ports[static_cast<std::size_t>(i)], positions[static_cast<std::size_t>(i)]});
    mc.keys = keys;
    mc.signing = manager_kp;
    mc.params = cpv::CalibrationParams(10.0, 4, 0.7);
    mc.interval_ms = 150.0;
    mc.results_log_path = results_path;
    node::ManagerNode manager(mc);
    manager.start();

    // let the background samplers populate offsets and baselines
    std::this_thread::sleep_for(std::chrono::milliseconds(600));

    SECTION("cpv session runs end to end") {
        node::ClientRelay client("127.0.0.1", manager.port(), keys.get(kManagerId, kClientId));
        const auto result = client.run(center.lat, center.lon);
        // loopback timing is degenerate for the geometry (sub-ms everything);
        // this asserts the transport, crypto, and aggregation machinery
        const std::set<std::string> terminal{"ACCEPTED", "REJECTED", "INDETERMINATE",
                                             "TAMPERED"};
        CHECK(terminal.count(result.outcome) == 1);
        CHECK(result.valid <= 4);
        CHECK(result.passed <= result.valid);
        CHECK(manager.results().lines().size() == 1);
    }

    SECTION("slv request probes a live server and pins on pass") {
        MiniHttpServer server;
        auto mconn = net::TcpConn::connect("127.0.0.1", manager.port(), 2000);
        const auto& ckey = keys.get(kManagerId, kClientId);
        wire::WireMessage req;
        req.msg_type = wire::MsgType::VERIFY_REQUEST;
        req.origin_id = kClientId;
        req.sent_ts_ms = net::now_ms();
        const std::string payload = nlohmann::json{{"kind", "slv"},
                                                   {"ip", "127.0.0.1"},
                                                   {"port", server.port()},
                                                   {"lat", center.lat},
                                                   {"lon", center.lon},
                                                   {"domain", "e2e.test"}}
                                        .dump();
        req.payload.assign(payload.begin(), payload.end());
        mconn.send_frame(wire::frame_encode(req, ckey));
        mconn.set_timeout(10000);
        const auto reply_frame = mconn.recv_frame();
        REQUIRE(reply_frame.has_value());
        const auto reply = wire::frame_decode(*reply_frame, ckey);
        REQUIRE(reply.ok());
        const auto j = nlohmann::json::parse(
            std::string(reply.message->payload.begin(), reply.message->payload.end()));
        REQUIRE(j.value("ok", false));
        // loopback RTTs are near zero while the geographic circles span 300 km:
        // the delay test passes, and TOFU pins the unpinned domain
        CHECK(j.value("outcome", "") == "UNSUSPICIOUS");
        CHECK(manager.results().lines().size() == 1);
    }

    manager.stop();
    for (auto& v : verifiers) v->stop();
}
