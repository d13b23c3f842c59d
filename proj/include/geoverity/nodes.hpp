#pragma once

#include <openssl/evp.h>

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "geoverity/cpv.hpp"
#include "geoverity/crypto.hpp"
#include "geoverity/geometry.hpp"
#include "geoverity/manager.hpp"
#include "geoverity/mp.hpp"
#include "geoverity/net.hpp"
#include "geoverity/puzzle.hpp"
#include "geoverity/slv.hpp"
#include "geoverity/wire.hpp"

namespace geoverity::node {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Session grants: the manager plays the application-server role and signs
// connection IDs; verifiers accept sessions only under a valid signature.
// ---------------------------------------------------------------------------

struct Ed25519KeyPair {
    std::vector<std::uint8_t> priv;  // 32-byte seed
    std::vector<std::uint8_t> pub;   // 32 bytes

    static Ed25519KeyPair generate() {
        EVP_PKEY* pkey = nullptr;
        EVP_PKEY_CTX* ctx = EVP_PKEY_CTX_new_id(EVP_PKEY_ED25519, nullptr);
        if (!ctx || EVP_PKEY_keygen_init(ctx) != 1 || EVP_PKEY_keygen(ctx, &pkey) != 1)
            throw std::runtime_error("ed25519 keygen failed");
        EVP_PKEY_CTX_free(ctx);
        Ed25519KeyPair kp;
        std::size_t len = 32;
        kp.priv.resize(32);
        kp.pub.resize(32);
        EVP_PKEY_get_raw_private_key(pkey, kp.priv.data(), &len);
        len = 32;
        EVP_PKEY_get_raw_public_key(pkey, kp.pub.data(), &len);
        EVP_PKEY_free(pkey);
        return kp;
    }
};

inline std::vector<std::uint8_t> ed25519_sign(const std::vector<std::uint8_t>& priv,
                                              const std::vector<std::uint8_t>& data) {
    EVP_PKEY* pkey =
        EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, priv.data(), priv.size());
    if (!pkey) throw std::runtime_error("bad ed25519 private key");
    EVP_MD_CTX* md = EVP_MD_CTX_new();
    std::vector<std::uint8_t> sig(64);
    std::size_t siglen = sig.size();
    if (EVP_DigestSignInit(md, nullptr, nullptr, nullptr, pkey) != 1 ||
        EVP_DigestSign(md, sig.data(), &siglen, data.data(), data.size()) != 1) {
        EVP_MD_CTX_free(md);
        EVP_PKEY_free(pkey);
        throw std::runtime_error("ed25519 sign failed");
    }
    EVP_MD_CTX_free(md);
    EVP_PKEY_free(pkey);
    sig.resize(siglen);
    return sig;
}

inline bool ed25519_verify(const std::vector<std::uint8_t>& pub,
                           const std::vector<std::uint8_t>& data,
                           const std::vector<std::uint8_t>& sig) {
    EVP_PKEY* pkey =
        EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, pub.data(), pub.size());
    if (!pkey) return false;
    EVP_MD_CTX* md = EVP_MD_CTX_new();
    const bool ok = EVP_DigestVerifyInit(md, nullptr, nullptr, nullptr, pkey) == 1 &&
                    EVP_DigestVerify(md, sig.data(), sig.size(), data.data(), data.size()) == 1;
    EVP_MD_CTX_free(md);
    EVP_PKEY_free(pkey);
    return ok;
}

inline std::vector<std::uint8_t> ed25519_public_from_seed(const std::vector<std::uint8_t>& priv) {
    EVP_PKEY* pkey =
        EVP_PKEY_new_raw_private_key(EVP_PKEY_ED25519, nullptr, priv.data(), priv.size());
    if (!pkey) throw std::runtime_error("bad ed25519 private key");
    std::vector<std::uint8_t> pub(32);
    std::size_t len = pub.size();
    if (EVP_PKEY_get_raw_public_key(pkey, pub.data(), &len) != 1) {
        EVP_PKEY_free(pkey);
        throw std::runtime_error("ed25519 public key derivation failed");
    }
    EVP_PKEY_free(pkey);
    return pub;
}

struct SessionGrant {
    std::array<std::uint8_t, 16> session_id{};
    double asserted_lat = 0.0;
    double asserted_lon = 0.0;
    std::uint64_t expiry_ms = 0;
    std::vector<std::uint8_t> session_key;  // MAC key for client<->verifier frames
    std::vector<std::uint8_t> signature;

    std::vector<std::uint8_t> signed_bytes() const {
        json j{{"sid", crypto::to_hex(session_id)},
               {"lat", asserted_lat},
               {"lon", asserted_lon},
               {"expiry", expiry_ms},
               {"key", crypto::to_hex(session_key)}};
        const std::string s = j.dump();
        return {s.begin(), s.end()};
    }

    json to_json() const {
        return json{{"sid", crypto::to_hex(session_id)}, {"lat", asserted_lat},
                    {"lon", asserted_lon},               {"expiry", expiry_ms},
                    {"key", crypto::to_hex(session_key)}, {"sig", crypto::to_hex(signature)}};
    }

    static SessionGrant from_json(const json& j) {
        SessionGrant g;
        const auto sid = crypto::from_hex(j.at("sid").get<std::string>());
        if (sid.size() != 16) throw std::invalid_argument("bad session id");
        std::copy(sid.begin(), sid.end(), g.session_id.begin());
        g.asserted_lat = j.at("lat").get<double>();
        g.asserted_lon = j.at("lon").get<double>();
        g.expiry_ms = j.at("expiry").get<std::uint64_t>();
        g.session_key = crypto::from_hex(j.at("key").get<std::string>());
        g.signature = crypto::from_hex(j.at("sig").get<std::string>());
        return g;
    }
};

// ---------------------------------------------------------------------------
// Key table: pairwise symmetric keys, provisioned out of band. Node ids:
// verifiers 0..2, manager 100, clients use the per-session key.
// ---------------------------------------------------------------------------

inline constexpr std::uint16_t kManagerId = 100;
inline constexpr std::uint16_t kClientId = 200;

class KeyTable {
public:
    void set(std::uint16_t a, std::uint16_t b, std::vector<std::uint8_t> key) {
        keys_[normalize(a, b)] = std::move(key);
    }
    const std::vector<std::uint8_t>& get(std::uint16_t a, std::uint16_t b) const {
        auto it = keys_.find(normalize(a, b));
        if (it == keys_.end()) throw std::out_of_range("no pairwise key configured");
        return it->second;
    }

private:
    static std::pair<std::uint16_t, std::uint16_t> normalize(std::uint16_t a, std::uint16_t b) {
        return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    }
    std::map<std::pair<std::uint16_t, std::uint16_t>, std::vector<std::uint8_t>> keys_;
};

struct ObservationReport {
    int origin = 0;       // originating verifier
    std::uint32_t seq = 0;
    double corrected_delay_ms = 0.0;
};

// ---------------------------------------------------------------------------
// Verifier daemon
// ---------------------------------------------------------------------------

struct PeerAddress {
    int id = 0;
    std::string host;
    std::uint16_t port = 0;
};

struct VerifierConfig {
    int id = 0;  // 0=A, 1=B, 2=C
    std::uint16_t listen_port = 0;
    std::vector<PeerAddress> peers;  // the other two verifiers
    KeyTable keys;
    std::vector<std::uint8_t> manager_pub;
    double baseline_period_ms = 6000.0;   // direct timestamp every six seconds
    double offset_period_ms = 1800000.0;  // clock offset every 30 minutes
    int message_timeout_ms = 2000;
    int puzzle_difficulty = 0;
};

class VerifierNode {
public:
    explicit VerifierNode(VerifierConfig cfg) : cfg_(std::move(cfg)) {}

    void start() {
        listener_.emplace(cfg_.listen_port);
        running_ = true;
        accept_thread_ = std::thread([this] { accept_loop(); });
        sampler_thread_ = std::thread([this] { sampler_loop(); });
    }

    void stop() {
        running_ = false;
        if (listener_) listener_->close();
        cv_.notify_all();
        if (accept_thread_.joinable()) accept_thread_.join();
        if (sampler_thread_.joinable()) sampler_thread_.join();
        join_serve_threads();
    }

    ~VerifierNode() { stop(); }

    std::uint16_t port() const { return listener_ ? listener_->port() : 0; }

    /// Latest min-filtered baseline toward peer, nullopt when stale/missing.
    std::optional<double> baseline_to(int peer_id) const {
        std::lock_guard lk(mu_);
        auto it = baselines_.find(peer_id);
        if (it == baselines_.end()) return std::nullopt;
        return it->second.baseline(static_cast<double>(net::now_ms()));
    }

    double offset_to(int peer_id) const {
        std::lock_guard lk(mu_);
        auto it = offsets_.find(peer_id);
        return it == offsets_.end() ? 0.0 : it->second.offset_ms;
    }

private:
    struct Session {
        SessionGrant grant;
        std::vector<ObservationReport> observations;
        bool tampered = false;
    };

    void accept_loop() {
        while (running_) {
            auto conn = listener_->accept(200);
            if (!conn) continue;
            std::lock_guard lk(serve_mu_);
            serve_threads_.emplace_back(&VerifierNode::serve, this, std::move(*conn));
        }
    }

    void serve(net::TcpConn conn) {
        conn.set_timeout(cfg_.message_timeout_ms);
        auto first = conn.recv_frame();
        if (!first) return;
        // peek the type byte; decode happens under the right key per type
        if (first->size() < 2) return;
        const auto type = static_cast<wire::MsgType>((*first)[1]);
        switch (type) {
            case wire::MsgType::SESSION_INIT: serve_client(conn, *first); break;
            case wire::MsgType::OFFSET_PROBE:
            case wire::MsgType::BASELINE_PROBE: serve_peer(conn, *first); break;
            case wire::MsgType::VERIFY_REQUEST: serve_manager(conn, *first); break;
            default: break;
        }
    }

    // peer probe connections: reply to offset and baseline probes
    void serve_peer(net::TcpConn& conn, const std::vector<std::uint8_t>& first) {
        std::optional<std::vector<std::uint8_t>> frame = first;
        while (frame && running_) {
            const double recv_ts = static_cast<double>(net::now_ms());
            for (const auto& peer : cfg_.peers) {
                const auto& key = cfg_.keys.get(static_cast<std::uint16_t>(cfg_.id),
                                                static_cast<std::uint16_t>(peer.id));
                auto decoded = wire::frame_decode(*frame, key);
                if (!decoded.ok()) continue;
                wire::WireMessage reply;
                reply.msg_type = decoded.message->msg_type;
                reply.session_id = decoded.message->session_id;
                reply.seq = decoded.message->seq;
                reply.origin_id = static_cast<std::uint16_t>(cfg_.id);
                reply.sent_ts_ms = net::now_ms();
                json j{{"req_sent", decoded.message->sent_ts_ms}, {"recv", recv_ts}};
                const std::string s = j.dump();
                reply.payload.assign(s.begin(), s.end());
                conn.send_frame(wire::frame_encode(reply, key));
                break;
            }
            frame = conn.recv_frame();
        }
    }

    // client session: send our timestamps at our turn slot, record relays
    void serve_client(net::TcpConn& conn, const std::vector<std::uint8_t>& first) {
        // SESSION_INIT payload carries the signed grant in the clear; the
        // grant's own key MACs the frame.
        json init;
        try {
            // extract the payload without trusting it yet; the grant inside is
            // self-authenticating (manager signature) and names the session key
            if (first.size() < wire::kHeaderSize + wire::kMacSize) return;
            const std::size_t plen = (static_cast<std::size_t>(first[wire::kHeaderSize - 2]) << 8) |
                                     first[wire::kHeaderSize - 1];
            if (first.size() != wire::kHeaderSize + plen + wire::kMacSize) return;
            init = json::parse(std::string(first.begin() + wire::kHeaderSize,
                                           first.begin() + wire::kHeaderSize +
                                               static_cast<long>(plen)));
        } catch (...) {
            return;
        }

        SessionGrant grant;
        try {
            grant = SessionGrant::from_json(init.at("grant"));
        } catch (...) {
            return;
        }
        if (!ed25519_verify(cfg_.manager_pub, grant.signed_bytes(), grant.signature)) return;
        if (grant.expiry_ms < net::now_ms()) return;
        // now the session key is trusted: re-verify the frame MAC under it
        if (!wire::frame_decode(first, grant.session_key).ok()) return;

        const int n = init.value("n", 8);
        const double interval_ms = init.value("interval_ms", 300.0);

        Session session;
        session.grant = grant;

        // ack
        send_session_msg(conn, grant, wire::MsgType::VERIFY_RESPONSE, 0,
                         json{{"ok", true}, {"verifier", cfg_.id}});

        const std::uint64_t t0 = net::now_ms() + 50;
        const double slot = interval_ms / 3.0;
        int next_send = 0;
        const auto deadline = t0 + static_cast<std::uint64_t>(n * interval_ms + 1000);
        conn.set_timeout(20);
        while (running_ && net::now_ms() < deadline) {
            const std::uint64_t due =
                t0 + static_cast<std::uint64_t>(next_send * interval_ms + cfg_.id * slot);
            if (next_send < n && net::now_ms() >= due) {
                send_turn_timestamps(conn, grant, static_cast<std::uint32_t>(next_send));
                ++next_send;
            }
            auto frame = conn.recv_frame();
            if (frame) handle_relay(session, *frame);
            if (session.tampered) break;
        }
        std::lock_guard lk(mu_);
        sessions_[crypto::to_hex(session.grant.session_id)] = session;
    }

    /// Our turn: one cryptographically protected timestamp per destination
    /// verifier (MAC under that pairwise key), relayed by the client.
    void send_turn_timestamps(net::TcpConn& conn, const SessionGrant& grant, std::uint32_t seq) {
        for (const auto& peer : cfg_.peers) {
            wire::WireMessage msg;
            msg.msg_type = wire::MsgType::TIMESTAMP;
            msg.session_id = grant.session_id;
            msg.seq = seq;
            msg.origin_id = static_cast<std::uint16_t>(cfg_.id);
            msg.sent_ts_ms = net::now_ms();
            json payload{{"dest", peer.id}};
            if (cfg_.puzzle_difficulty > 0) {
                // puzzle bound to the timestamp message digest
                json ts{{"sid", crypto::to_hex(grant.session_id)},
                        {"seq", seq},
                        {"ts", msg.sent_ts_ms},
                        {"origin", cfg_.id},
                        {"dest", peer.id}};
                const auto digest = crypto::sha256(ts.dump());
                std::random_device rd;
                std::mt19937_64 rng(rd());
                const auto spec =
                    puzzle::puzzle_generate(digest, cfg_.puzzle_difficulty, rng);
                payload["puzzle"] = {{"nonce", crypto::to_hex(spec.nonce)},
                                     {"difficulty", spec.difficulty},
                                     {"binding", crypto::to_hex(spec.binding)}};
            }
            const std::string s = payload.dump();
            msg.payload.assign(s.begin(), s.end());
            const auto& key = cfg_.keys.get(static_cast<std::uint16_t>(cfg_.id),
                                            static_cast<std::uint16_t>(peer.id));
            conn.send_frame(wire::frame_encode(msg, key));
        }
    }

    /// A relayed timestamp arriving from the client: outer RELAY frame under
    /// the session key, inner TIMESTAMP frame under the origin's pairwise key.
    void handle_relay(Session& session, const std::vector<std::uint8_t>& frame) {
        const double recv_ts = static_cast<double>(net::now_ms());
        auto outer = wire::frame_decode(frame, session.grant.session_key);
        if (!outer.ok() || outer.message->msg_type != wire::MsgType::RELAY) {
            if (!outer.ok() && outer.error == wire::DecodeError::MAC_FAIL)
                session.tampered = true;
            return;
        }
        json j;
        try {
            j = json::parse(std::string(outer.message->payload.begin(),
                                        outer.message->payload.end()));
        } catch (...) {
            return;
        }
        const auto inner_bytes = crypto::from_hex(j.value("frame", ""));
        std::optional<wire::WireMessage> inner;
        int origin = -1;
        for (const auto& peer : cfg_.peers) {
            const auto& key = cfg_.keys.get(static_cast<std::uint16_t>(cfg_.id),
                                            static_cast<std::uint16_t>(peer.id));
            auto d = wire::frame_decode(inner_bytes, key);
            if (d.ok()) {
                inner = *d.message;
                origin = peer.id;
                break;
            }
        }
        if (!inner) {
            session.tampered = true;  // relayed timestamp failed every pairwise MAC
            return;
        }
        // if the origin attached a puzzle, the relay must carry a valid
        // solution bound to this exact timestamp message
        try {
            const json inner_payload = json::parse(
                std::string(inner->payload.begin(), inner->payload.end()));
            if (inner_payload.contains("puzzle")) {
                puzzle::PuzzleSpec spec;
                const auto nonce =
                    crypto::from_hex(inner_payload["puzzle"].at("nonce").get<std::string>());
                const auto binding =
                    crypto::from_hex(inner_payload["puzzle"].at("binding").get<std::string>());
                if (nonce.size() != spec.nonce.size() || binding.size() != spec.binding.size())
                    return;
                std::copy(nonce.begin(), nonce.end(), spec.nonce.begin());
                std::copy(binding.begin(), binding.end(), spec.binding.begin());
                spec.difficulty = inner_payload["puzzle"].at("difficulty").get<int>();
                puzzle::PuzzleSolution sol;
                const auto sol_bytes = crypto::from_hex(j.value("solution", ""));
                if (sol_bytes.size() != sol.bytes.size()) return;
                std::copy(sol_bytes.begin(), sol_bytes.end(), sol.bytes.begin());
                const json ts{{"sid", crypto::to_hex(session.grant.session_id)},
                              {"seq", inner->seq},
                              {"ts", inner->sent_ts_ms},
                              {"origin", origin},
                              {"dest", cfg_.id}};
                if (!puzzle::puzzle_verify(spec, sol, crypto::sha256(ts.dump()))) return;
            }
        } catch (...) {
            return;
        }
        ObservationReport obs;
        obs.origin = origin;
        obs.seq = inner->seq;
        obs.corrected_delay_ms =
            recv_ts - static_cast<double>(inner->sent_ts_ms) + offset_to(origin);
        session.observations.push_back(obs);
    }

    // manager asking for session results or an SLV probe
    void serve_manager(net::TcpConn& conn, const std::vector<std::uint8_t>& first) {
        const auto& key =
            cfg_.keys.get(static_cast<std::uint16_t>(cfg_.id), kManagerId);
        auto decoded = wire::frame_decode(first, key);
        if (!decoded.ok()) return;
        json req;
        try {
            req = json::parse(std::string(decoded.message->payload.begin(),
                                          decoded.message->payload.end()));
        } catch (...) {
            return;
        }
        json reply;
        const std::string kind = req.value("kind", "");
        if (kind == "collect") {
            std::lock_guard lk(mu_);
            // baselines are session-independent; report them even when the
            // manager only wants pair delays (e.g. for an SLV decision)
            json base = json::object();
            for (const auto& peer : cfg_.peers) {
                auto bit = baselines_.find(peer.id);
                auto b = bit == baselines_.end()
                             ? std::nullopt
                             : bit->second.baseline(static_cast<double>(net::now_ms()));
                if (b) base[std::to_string(peer.id)] = *b;
            }
            auto it = sessions_.find(req.value("sid", ""));
            if (it == sessions_.end()) {
                reply = json{{"ok", false}, {"baselines", base}};
            } else {
                json obs = json::array();
                for (const auto& o : it->second.observations)
                    obs.push_back({{"origin", o.origin},
                                   {"seq", o.seq},
                                   {"delay", o.corrected_delay_ms}});
                reply = json{{"ok", true},
                             {"tampered", it->second.tampered},
                             {"observations", obs},
                             {"baselines", base}};
            }
        } else if (kind == "slv_probe") {
            reply = slv_probe(req.value("ip", ""), req.value("port", 80),
                              req.value("samples", 3));
        } else {
            reply = json{{"ok", false}};
        }
        wire::WireMessage msg;
        msg.msg_type = wire::MsgType::VERIFY_RESPONSE;
        msg.session_id = decoded.message->session_id;
        msg.seq = decoded.message->seq;
        msg.origin_id = static_cast<std::uint16_t>(cfg_.id);
        msg.sent_ts_ms = net::now_ms();
        const std::string s = reply.dump();
        msg.payload.assign(s.begin(), s.end());
        conn.send_frame(wire::frame_encode(msg, key));
    }

    /// Real-mode RTT probes: TCP handshake timing, then a HEAD / on the same
    /// connection for the HTTP layer.
    json slv_probe(const std::string& ip, int port, int samples) {
        json out{{"ok", true}};
        json tcp = json::array(), http = json::array();
        for (int s = 0; s < samples; ++s) {
            try {
                const auto t0 = std::chrono::steady_clock::now();
                auto conn = net::TcpConn::connect(ip, static_cast<std::uint16_t>(port), 2000);
                const auto t1 = std::chrono::steady_clock::now();
                tcp.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
                http.push_back(http_head_rtt_ms(conn, ip));
            } catch (...) {
                out["ok"] = false;
                return out;
            }
        }
        out["tcp_rtts"] = tcp;
        out["http_rtts"] = http;
        return out;
    }

    static double http_head_rtt_ms(net::TcpConn& conn, const std::string& host);

    void sampler_loop() {
        std::uint64_t last_offset = 0, last_baseline = 0;
        while (running_) {
            const std::uint64_t now = net::now_ms();
            if (now - last_offset >= static_cast<std::uint64_t>(cfg_.offset_period_ms) ||
                last_offset == 0) {
                for (const auto& peer : cfg_.peers) probe_offset(peer);
                last_offset = now;
            }
            if (now - last_baseline >= static_cast<std::uint64_t>(cfg_.baseline_period_ms) ||
                last_baseline == 0) {
                for (const auto& peer : cfg_.peers) probe_baseline(peer);
                last_baseline = now;
            }
            std::unique_lock lk(mu_);
            cv_.wait_for(lk, std::chrono::milliseconds(200), [this] { return !running_; });
        }
    }

    void probe_offset(const PeerAddress& peer) {
        try {
            auto conn = net::TcpConn::connect(peer.host, peer.port, cfg_.message_timeout_ms);
            const auto& key = cfg_.keys.get(static_cast<std::uint16_t>(cfg_.id),
                                            static_cast<std::uint16_t>(peer.id));
            wire::WireMessage msg;
            msg.msg_type = wire::MsgType::OFFSET_PROBE;
            msg.origin_id = static_cast<std::uint16_t>(cfg_.id);
            const double t1 = static_cast<double>(net::now_ms());
            msg.sent_ts_ms = static_cast<std::uint64_t>(t1);
            conn.send_frame(wire::frame_encode(msg, key));
            auto reply_frame = conn.recv_frame();
            const double t4 = static_cast<double>(net::now_ms());
            if (!reply_frame) return;
            auto reply = wire::frame_decode(*reply_frame, key);
            if (!reply.ok()) return;
            const json j = json::parse(
                std::string(reply.message->payload.begin(), reply.message->payload.end()));
            const double t2 = j.at("recv").get<double>();
            const double t3 = static_cast<double>(reply.message->sent_ts_ms);
            std::lock_guard lk(mu_);
            offsets_[peer.id] = {wire::offset_from_timestamps(t1, t2, t3, t4),
                                 static_cast<double>(net::now_ms()), false};
        } catch (...) {
            std::lock_guard lk(mu_);
            if (offsets_.count(peer.id)) offsets_[peer.id].aged = true;  // keep previous
        }
    }

    void probe_baseline(const PeerAddress& peer) {
        try {
            auto conn = net::TcpConn::connect(peer.host, peer.port, cfg_.message_timeout_ms);
            const auto& key = cfg_.keys.get(static_cast<std::uint16_t>(cfg_.id),
                                            static_cast<std::uint16_t>(peer.id));
            wire::WireMessage msg;
            msg.msg_type = wire::MsgType::BASELINE_PROBE;
            msg.origin_id = static_cast<std::uint16_t>(cfg_.id);
            const double send_ts = static_cast<double>(net::now_ms());
            msg.sent_ts_ms = static_cast<std::uint64_t>(send_ts);
            conn.send_frame(wire::frame_encode(msg, key));
            auto reply_frame = conn.recv_frame();
            const double recv_ts = static_cast<double>(net::now_ms());
            if (!reply_frame) {
                std::lock_guard lk(mu_);
                baselines_[peer.id].mark_stale();
                return;
            }
            auto reply = wire::frame_decode(*reply_frame, key);
            if (!reply.ok()) return;
            const json j = json::parse(
                std::string(reply.message->payload.begin(), reply.message->payload.end()));
            const double peer_recv = j.at("recv").get<double>();
            const double peer_send = static_cast<double>(reply.message->sent_ts_ms);
            const double offset = offset_to(peer.id);
            const double owd = wire::corrected_pair_min(
                {peer_recv - send_ts, recv_ts - peer_send}, offset);
            std::lock_guard lk(mu_);
            baselines_[peer.id].record(std::max(0.0, owd), static_cast<double>(net::now_ms()));
        } catch (...) {
            std::lock_guard lk(mu_);
            baselines_[peer.id].mark_stale();
        }
    }

    void send_session_msg(net::TcpConn& conn, const SessionGrant& grant, wire::MsgType type,
                          std::uint32_t seq, const json& payload) {
        wire::WireMessage msg;
        msg.msg_type = type;
        msg.session_id = grant.session_id;
        msg.seq = seq;
        msg.origin_id = static_cast<std::uint16_t>(cfg_.id);
        msg.sent_ts_ms = net::now_ms();
        const std::string s = payload.dump();
        msg.payload.assign(s.begin(), s.end());
        conn.send_frame(wire::frame_encode(msg, grant.session_key));
    }

    VerifierConfig cfg_;
    std::optional<net::TcpListener> listener_;
    void join_serve_threads() {
        std::vector<std::thread> threads;
        {
            std::lock_guard lk(serve_mu_);
            threads.swap(serve_threads_);
        }
        for (auto& t : threads)
            if (t.joinable()) t.join();
    }

    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    std::thread sampler_thread_;
    std::mutex serve_mu_;
    std::vector<std::thread> serve_threads_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::map<int, wire::BaselineTracker> baselines_;
    std::map<int, wire::ClockSyncEntry> offsets_;
    std::map<std::string, Session> sessions_;
};

/// Timed HEAD / on an already-open connection: request out, first response
/// bytes back.
inline double VerifierNode::http_head_rtt_ms(net::TcpConn& conn, const std::string& host) {
    const std::string req = "HEAD / HTTP/1.1\r\nHost: " + host + "\r\nConnection: close\r\n\r\n";
    const auto t0 = std::chrono::steady_clock::now();
    conn.send_raw(reinterpret_cast<const std::uint8_t*>(req.data()), req.size());
    std::uint8_t buf[256];
    if (conn.recv_some(buf, sizeof(buf)) <= 0)
        throw std::runtime_error("http probe: no response");
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

// ---------------------------------------------------------------------------
// Manager daemon: issues signed sessions, selects triples, aggregates
// verifier reports into verdicts, persists results.
// ---------------------------------------------------------------------------

struct ManagerVerifier {
    int id = 0;
    std::string host;
    std::uint16_t port = 0;
    geo::GeoPoint location;
};

struct ManagerConfig {
    std::uint16_t listen_port = 0;
    std::vector<ManagerVerifier> verifiers;
    KeyTable keys;  // manager<->verifier pairwise, plus the client access key
    Ed25519KeyPair signing;
    cpv::CalibrationParams params;
    double interval_ms = 300.0;
    double epsilon_slv_ms = 5.0;
    double session_ttl_ms = 120000.0;
    std::string results_log_path;
    std::string pin_store_path;
    int message_timeout_ms = 2000;
};

class ManagerNode {
public:
    explicit ManagerNode(ManagerConfig cfg)
        : cfg_(std::move(cfg)),
          results_(cfg_.results_log_path),
          pins_(cfg_.pin_store_path.empty() ? slv::PinStore()
                                            : slv::PinStore(cfg_.pin_store_path)) {}

    void start() {
        listener_.emplace(cfg_.listen_port);
        running_ = true;
        accept_thread_ = std::thread([this] { accept_loop(); });
    }

    void stop() {
        running_ = false;
        if (listener_) listener_->close();
        if (accept_thread_.joinable()) accept_thread_.join();
        join_serve_threads();
    }

    ~ManagerNode() { stop(); }

    std::uint16_t port() const { return listener_ ? listener_->port() : 0; }
    const manager::ResultsLog& results() const { return results_; }

private:
    struct PendingSession {
        SessionGrant grant;
        std::array<int, 3> verifier_ids{};
        geo::GeoPoint asserted;
    };

    void accept_loop() {
        while (running_) {
            auto conn = listener_->accept(200);
            if (!conn) continue;
            std::lock_guard lk(serve_mu_);
            serve_threads_.emplace_back(&ManagerNode::serve, this, std::move(*conn));
        }
    }

    const std::vector<std::uint8_t>& client_key() const {
        return cfg_.keys.get(kManagerId, kClientId);
    }

    void serve(net::TcpConn conn) {
        conn.set_timeout(cfg_.message_timeout_ms);
        for (;;) {
            auto frame = conn.recv_frame();
            if (!frame) return;
            auto decoded = wire::frame_decode(*frame, client_key());
            if (!decoded.ok() || decoded.message->msg_type != wire::MsgType::VERIFY_REQUEST)
                return;
            json req;
            try {
                req = json::parse(std::string(decoded.message->payload.begin(),
                                              decoded.message->payload.end()));
            } catch (...) {
                return;
            }
            json reply;
            const std::string kind = req.value("kind", "");
            try {
                if (kind == "cpv")
                    reply = start_cpv(req);
                else if (kind == "cpv_result")
                    reply = finish_cpv(req);
                else if (kind == "slv")
                    reply = handle_slv(req);
                else
                    reply = json{{"ok", false}, {"error", "unknown kind"}};
            } catch (const manager::NoCoverage& e) {
                reply = json{{"ok", false}, {"error", e.what()}};
            } catch (const std::exception& e) {
                reply = json{{"ok", false}, {"error", e.what()}};
            }
            wire::WireMessage msg;
            msg.msg_type = wire::MsgType::VERIFY_RESPONSE;
            msg.session_id = decoded.message->session_id;
            msg.seq = decoded.message->seq;
            msg.origin_id = kManagerId;
            msg.sent_ts_ms = net::now_ms();
            const std::string s = reply.dump();
            msg.payload.assign(s.begin(), s.end());
            conn.send_frame(wire::frame_encode(msg, client_key()));
        }
    }

    manager::VerifierRegistry registry() const {
        manager::VerifierRegistry reg;
        for (const auto& v : cfg_.verifiers)
            reg.verifiers.push_back({std::to_string(v.id), v.location,
                                     v.host + ":" + std::to_string(v.port),
                                     manager::Health::OK});
        return reg;
    }

    json start_cpv(const json& req) {
        const geo::GeoPoint asserted(req.at("lat").get<double>(), req.at("lon").get<double>());
        const auto triple = manager::select_triangle(asserted, registry());

        PendingSession ps;
        ps.asserted = asserted;
        std::random_device rd;
        for (auto& b : ps.grant.session_id) b = static_cast<std::uint8_t>(rd());
        ps.grant.session_key.resize(32);
        for (auto& b : ps.grant.session_key) b = static_cast<std::uint8_t>(rd());
        ps.grant.asserted_lat = asserted.lat;
        ps.grant.asserted_lon = asserted.lon;
        ps.grant.expiry_ms = net::now_ms() + static_cast<std::uint64_t>(cfg_.session_ttl_ms);
        ps.grant.signature = ed25519_sign(cfg_.signing.priv, ps.grant.signed_bytes());

        json verifiers = json::array();
        for (int i = 0; i < 3; ++i) {
            const int vid = std::stoi(triple.ids[static_cast<std::size_t>(i)]);
            ps.verifier_ids[static_cast<std::size_t>(i)] = vid;
            for (const auto& v : cfg_.verifiers)
                if (v.id == vid)
                    verifiers.push_back({{"id", v.id}, {"host", v.host}, {"port", v.port}});
        }
        {
            std::lock_guard lk(mu_);
            pending_[crypto::to_hex(ps.grant.session_id)] = ps;
        }
        return json{{"ok", true},
                    {"grant", ps.grant.to_json()},
                    {"verifiers", verifiers},
                    {"n", cfg_.params.n},
                    {"interval_ms", cfg_.interval_ms}};
    }

    json verifier_request(const ManagerVerifier& v, const json& payload) {
        auto conn = net::TcpConn::connect(v.host, v.port, cfg_.message_timeout_ms);
        const auto& key = cfg_.keys.get(kManagerId, static_cast<std::uint16_t>(v.id));
        wire::WireMessage msg;
        msg.msg_type = wire::MsgType::VERIFY_REQUEST;
        msg.origin_id = kManagerId;
        msg.sent_ts_ms = net::now_ms();
        const std::string s = payload.dump();
        msg.payload.assign(s.begin(), s.end());
        conn.send_frame(wire::frame_encode(msg, key));
        auto reply = conn.recv_frame();
        if (!reply) throw std::runtime_error("verifier " + std::to_string(v.id) + " timeout");
        auto decoded = wire::frame_decode(*reply, key);
        if (!decoded.ok()) throw std::runtime_error("verifier reply rejected");
        return json::parse(
            std::string(decoded.message->payload.begin(), decoded.message->payload.end()));
    }

    const ManagerVerifier& verifier_by_id(int id) const {
        for (const auto& v : cfg_.verifiers)
            if (v.id == id) return v;
        throw std::out_of_range("verifier id");
    }

    /// Collect the three verifiers' observations, rebuild the six-delay sets,
    /// and decide centrally.
    json finish_cpv(const json& req) {
        const std::string sid = req.value("sid", "");
        PendingSession ps;
        {
            std::lock_guard lk(mu_);
            auto it = pending_.find(sid);
            if (it == pending_.end()) return json{{"ok", false}, {"error", "unknown session"}};
            ps = it->second;
        }
        // observation[observer][origin][seq] = delay
        std::map<int, std::map<int, std::map<std::uint32_t, double>>> obs;
        std::map<std::pair<int, int>, double> baselines;
        bool tampered = false;
        int reporting = 0;
        for (int vid : ps.verifier_ids) {
            json r;
            try {
                r = verifier_request(verifier_by_id(vid), json{{"kind", "collect"}, {"sid", sid}});
            } catch (...) {
                continue;
            }
            if (!r.value("ok", false)) continue;
            ++reporting;
            tampered |= r.value("tampered", false);
            // bind the value() copies to locals: iterating a temporary json
            // through items() dangles before C++23
            const json obs_list = r.value("observations", json::array());
            const json base_map = r.value("baselines", json::object());
            for (const auto& o : obs_list)
                obs[vid][o.at("origin").get<int>()][o.at("seq").get<std::uint32_t>()] =
                    o.at("delay").get<double>();
            for (const auto& [peer, b] : base_map.items())
                baselines[{std::min(vid, std::stoi(peer)), std::max(vid, std::stoi(peer))}] =
                    baselines.count({std::min(vid, std::stoi(peer)), std::max(vid, std::stoi(peer))})
                        ? std::min(baselines[{std::min(vid, std::stoi(peer)),
                                              std::max(vid, std::stoi(peer))}],
                                   b.get<double>())
                        : b.get<double>();
        }
        if (reporting < 3) {
            results_.record("cpv " + sid + " INDETERMINATE (verifier reports missing)");
            return json{{"ok", true}, {"outcome", "INDETERMINATE"}};
        }
        if (tampered) {
            results_.record("cpv " + sid + " TAMPERED");
            return json{{"ok", true}, {"outcome", "TAMPERED"}};
        }
        const auto [a, b, c] = std::tuple(ps.verifier_ids[0], ps.verifier_ids[1],
                                          ps.verifier_ids[2]);
        if (!baselines.count({std::min(a, b), std::max(a, b)}) ||
            !baselines.count({std::min(b, c), std::max(b, c)}) ||
            !baselines.count({std::min(a, c), std::max(a, c)})) {
            results_.record("cpv " + sid + " INDETERMINATE (baselines stale)");
            return json{{"ok", true}, {"outcome", "INDETERMINATE"}};
        }
        // floor at 0.1 ms: ms-precision clocks can read a same-host pair as 0,
        // and the triangle spec requires positive sides
        const std::array<double, 3> base{
            std::max(0.1, baselines[{std::min(a, b), std::max(a, b)}]),
            std::max(0.1, baselines[{std::min(b, c), std::max(b, c)}]),
            std::max(0.1, baselines[{std::min(a, c), std::max(a, c)}])};
        geometry::TriangleSpec spec({verifier_by_id(a).location, verifier_by_id(b).location,
                                     verifier_by_id(c).location},
                                    base);
        std::vector<cpv::IterationRecord> records;
        for (int i = 0; i < cfg_.params.n; ++i) {
            const auto seq = static_cast<std::uint32_t>(i);
            cpv::IterationRecord rec;
            auto find = [&](int obsv, int orig) -> std::optional<double> {
                auto it1 = obs.find(obsv);
                if (it1 == obs.end()) return std::nullopt;
                auto it2 = it1->second.find(orig);
                if (it2 == it1->second.end()) return std::nullopt;
                auto it3 = it2->second.find(seq);
                if (it3 == it2->second.end()) return std::nullopt;
                return it3->second;
            };
            const auto AtB = find(b, a), AtC = find(c, a), BtA = find(a, b), BtC = find(c, b),
                       CtA = find(a, c), CtB = find(b, c);
            if (AtB && AtC && BtA && BtC && CtA && CtB) {
                mp::PairwiseDelaySet set{*AtB, *AtC, *BtA, *BtC, *CtA, *CtB};
                rec.estimate = mp::solve_owd(mp::min_pairs(set));
                rec.outcome =
                    geometry::cpv_condition(rec.estimate, base, cfg_.params.epsilon_ms);
            }
            records.push_back(rec);
        }
        const auto result = cpv::tally(records, cfg_.params);
        results_.record("cpv " + sid + " " + cpv::to_string(result.decision) + " " +
                        std::to_string(result.iterations_passed) + "/" +
                        std::to_string(result.iterations_valid));
        return json{{"ok", true},
                    {"outcome", cpv::to_string(result.decision)},
                    {"passed", result.iterations_passed},
                    {"valid", result.iterations_valid},
                    {"total", result.iterations_total}};
    }

    json handle_slv(const json& req) {
        const std::string ip = req.at("ip").get<std::string>();
        const int port = req.value("port", 80);
        const geo::GeoPoint asserted(req.at("lat").get<double>(), req.at("lon").get<double>());
        const std::string domain = req.value("domain", "");
        const auto triple = manager::select_triangle(asserted, registry());

        std::array<std::optional<double>, 3> rtts;
        std::array<geo::GeoPoint, 3> positions;
        std::array<int, 3> vids{};
        int usable = 0;
        for (int i = 0; i < 3; ++i) {
            const int vid = std::stoi(triple.ids[static_cast<std::size_t>(i)]);
            vids[static_cast<std::size_t>(i)] = vid;
            positions[static_cast<std::size_t>(i)] = verifier_by_id(vid).location;
            try {
                const json r = verifier_request(
                    verifier_by_id(vid),
                    json{{"kind", "slv_probe"}, {"ip", ip}, {"port", port}, {"samples", 3}});
                if (!r.value("ok", false)) continue;
                double best = std::numeric_limits<double>::infinity();
                for (const auto& s : r.value("tcp_rtts", json::array()))
                    best = std::min(best, s.get<double>());
                for (const auto& s : r.value("http_rtts", json::array()))
                    best = std::min(best, s.get<double>());
                if (std::isfinite(best)) {
                    rtts[static_cast<std::size_t>(i)] = best;
                    ++usable;
                }
            } catch (...) {
            }
        }
        if (usable < 3) {
            results_.record("slv " + ip + " INDETERMINATE (probes failed)");
            return json{{"ok", true}, {"outcome", "INDETERMINATE"}};
        }
        // pair baselines from the verifiers' background samplers
        std::array<double, 3> pair_owds{};
        constexpr std::array<std::array<int, 2>, 3> pairs{{{0, 1}, {0, 2}, {1, 2}}};
        for (std::size_t pi = 0; pi < 3; ++pi) {
            const json r = verifier_request(
                verifier_by_id(vids[static_cast<std::size_t>(pairs[pi][0])]),
                json{{"kind", "collect"}, {"sid", ""}});
            const auto peers = r.value("baselines", json::object());
            const std::string want = std::to_string(vids[static_cast<std::size_t>(pairs[pi][1])]);
            if (!peers.contains(want)) {
                results_.record("slv " + ip + " INDETERMINATE (baselines stale)");
                return json{{"ok", true}, {"outcome", "INDETERMINATE"}};
            }
            pair_owds[pi] = peers.at(want).get<double>();
        }
        const auto decision =
            slv::slv_verify(asserted, positions, rtts, pair_owds, cfg_.epsilon_slv_ms);
        if (decision.indeterminate) {
            results_.record("slv " + ip + " INDETERMINATE");
            return json{{"ok", true}, {"outcome", "INDETERMINATE"}};
        }
        slv::SlvVerdict verdict;
        {
            std::lock_guard lk(mu_);
            verdict = slv::classify_verdict(domain.empty() ? ip : domain, asserted,
                                            decision.verification_passed, pins_, net::now_ms());
        }
        json per_pair = json::array();
        for (const auto& p : decision.pairs)
            per_pair.push_back({{"v1", p.v1},
                                {"v2", p.v2},
                                {"covers", p.covers_assertion},
                                {"contains", p.contains_server}});
        results_.record("slv " + ip + " " + slv::to_string(verdict.outcome));
        return json{{"ok", true},
                    {"outcome", slv::to_string(verdict.outcome)},
                    {"verification_passed", verdict.verification_passed},
                    {"per_pair", per_pair}};
    }

    void join_serve_threads() {
        std::vector<std::thread> threads;
        {
            std::lock_guard lk(serve_mu_);
            threads.swap(serve_threads_);
        }
        for (auto& t : threads)
            if (t.joinable()) t.join();
    }

    ManagerConfig cfg_;
    std::optional<net::TcpListener> listener_;
    std::atomic<bool> running_{false};
    std::thread accept_thread_;
    std::mutex serve_mu_;
    std::vector<std::thread> serve_threads_;
    std::mutex mu_;
    manager::ResultsLog results_;
    slv::PinStore pins_;
    std::map<std::string, PendingSession> pending_;
};

// ---------------------------------------------------------------------------
// Client relay: establishes the session, forwards each verifier timestamp to
// the other two verifiers (solving any attached puzzle first), then fetches
// the manager's decision.
// ---------------------------------------------------------------------------

struct ClientResult {
    std::string outcome = "INDETERMINATE";
    int passed = 0;
    int valid = 0;
};

class ClientRelay {
public:
    ClientRelay(std::string manager_host, std::uint16_t manager_port,
                std::vector<std::uint8_t> client_key)
        : manager_host_(std::move(manager_host)),
          manager_port_(manager_port),
          client_key_(std::move(client_key)) {}

    ClientResult run(double lat, double lon) {
        auto mconn = net::TcpConn::connect(manager_host_, manager_port_, 5000);
        const json start = manager_rpc(mconn, json{{"kind", "cpv"}, {"lat", lat}, {"lon", lon}});
        if (!start.value("ok", false))
            throw std::runtime_error("manager refused: " + start.value("error", "?"));
        const auto grant = SessionGrant::from_json(start.at("grant"));
        const int n = start.at("n").get<int>();
        const double interval_ms = start.at("interval_ms").get<double>();

        std::map<int, net::TcpConn> conns;
        for (const auto& v : start.at("verifiers")) {
            auto conn = net::TcpConn::connect(v.at("host").get<std::string>(),
                                              v.at("port").get<std::uint16_t>(), 2000);
            conn.set_timeout(20);
            wire::WireMessage init;
            init.msg_type = wire::MsgType::SESSION_INIT;
            init.session_id = grant.session_id;
            init.origin_id = kClientId;
            init.sent_ts_ms = net::now_ms();
            const std::string s =
                json{{"grant", grant.to_json()}, {"n", n}, {"interval_ms", interval_ms}}.dump();
            init.payload.assign(s.begin(), s.end());
            conn.send_frame(wire::frame_encode(init, grant.session_key));
            conns.emplace(v.at("id").get<int>(), std::move(conn));
        }

        const std::uint64_t deadline =
            net::now_ms() + static_cast<std::uint64_t>(n * interval_ms + 2000);
        while (net::now_ms() < deadline) {
            for (auto& [vid, conn] : conns) {
                auto frame = conn.recv_frame();
                if (!frame) continue;
                relay(*frame, grant, conns);
            }
        }

        // fresh connection: the first one sat idle through the measurement
        // phase and the manager is free to drop idle connections meanwhile
        auto rconn = net::TcpConn::connect(manager_host_, manager_port_, 5000);
        const json result = manager_rpc(
            rconn, json{{"kind", "cpv_result"}, {"sid", crypto::to_hex(grant.session_id)}});
        ClientResult out;
        out.outcome = result.value("outcome", "INDETERMINATE");
        out.passed = result.value("passed", 0);
        out.valid = result.value("valid", 0);
        return out;
    }

private:
    json manager_rpc(net::TcpConn& conn, const json& payload) {
        wire::WireMessage msg;
        msg.msg_type = wire::MsgType::VERIFY_REQUEST;
        msg.origin_id = kClientId;
        msg.sent_ts_ms = net::now_ms();
        const std::string s = payload.dump();
        msg.payload.assign(s.begin(), s.end());
        conn.send_frame(wire::frame_encode(msg, client_key_));
        auto reply = conn.recv_frame();
        if (!reply) throw std::runtime_error("manager timeout");
        auto decoded = wire::frame_decode(*reply, client_key_);
        if (!decoded.ok()) throw std::runtime_error("manager reply rejected");
        return json::parse(
            std::string(decoded.message->payload.begin(), decoded.message->payload.end()));
    }

    /// Forward a verifier's TIMESTAMP to its destination, solving the
    /// attached puzzle first. The original frame travels opaque inside a
    /// RELAY envelope; the client cannot alter it without tripping the MAC.
    void relay(const std::vector<std::uint8_t>& frame, const SessionGrant& grant,
               std::map<int, net::TcpConn>& conns) {
        if (frame.size() < wire::kHeaderSize + wire::kMacSize) return;
        const std::size_t plen = (static_cast<std::size_t>(frame[wire::kHeaderSize - 2]) << 8) |
                                 frame[wire::kHeaderSize - 1];
        if (frame.size() != wire::kHeaderSize + plen + wire::kMacSize) return;
        json payload;
        try {
            payload = json::parse(std::string(frame.begin() + wire::kHeaderSize,
                                              frame.begin() + wire::kHeaderSize +
                                                  static_cast<long>(plen)));
        } catch (...) {
            return;
        }
        const int dest = payload.value("dest", -1);
        auto it = conns.find(dest);
        if (it == conns.end()) return;

        json relay_payload{{"frame", crypto::to_hex(frame)}};
        if (payload.contains("puzzle")) {
            puzzle::PuzzleSpec spec;
            const auto nonce = crypto::from_hex(payload["puzzle"].at("nonce").get<std::string>());
            const auto binding =
                crypto::from_hex(payload["puzzle"].at("binding").get<std::string>());
            if (nonce.size() != spec.nonce.size() || binding.size() != spec.binding.size()) return;
            std::copy(nonce.begin(), nonce.end(), spec.nonce.begin());
            std::copy(binding.begin(), binding.end(), spec.binding.begin());
            spec.difficulty = payload["puzzle"].at("difficulty").get<int>();
            const auto solved = puzzle::puzzle_solve(spec);
            relay_payload["solution"] = crypto::to_hex(solved.solution.bytes);
        }

        wire::WireMessage relay_msg;
        relay_msg.msg_type = wire::MsgType::RELAY;
        relay_msg.session_id = grant.session_id;
        relay_msg.origin_id = kClientId;
        relay_msg.sent_ts_ms = net::now_ms();
        const std::string s = relay_payload.dump();
        relay_msg.payload.assign(s.begin(), s.end());
        it->second.send_frame(wire::frame_encode(relay_msg, grant.session_key));
    }

    std::string manager_host_;
    std::uint16_t manager_port_;
    std::vector<std::uint8_t> client_key_;
};

}  // namespace geoverity::node
