#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "geoverity/crypto.hpp"

namespace geoverity::wire {

inline constexpr std::uint8_t kVersion = 1;

enum class MsgType : std::uint8_t {
    TIMESTAMP = 0x01,
    RELAY = 0x02,
    SESSION_INIT = 0x03,
    BASELINE_PROBE = 0x04,
    VERIFY_REQUEST = 0x05,
    VERIFY_RESPONSE = 0x06,
    OFFSET_PROBE = 0x07,
};

inline bool is_known_msg_type(std::uint8_t t) { return t >= 0x01 && t <= 0x07; }

/// Header layout (big-endian multi-byte fields), followed by payload and a
/// 32-byte HMAC-SHA256 over everything preceding it:
///   version(1) type(1) session_id(16) seq(4) origin_id(2) sent_ts_ms(8) payload_len(2)
inline constexpr std::size_t kHeaderSize = 1 + 1 + 16 + 4 + 2 + 8 + 2;
inline constexpr std::size_t kMacSize = 32;
inline constexpr std::size_t kMaxPayload = 0xffff;

struct WireMessage {
    MsgType msg_type = MsgType::TIMESTAMP;
    std::array<std::uint8_t, 16> session_id{};
    std::uint32_t seq = 0;
    std::uint16_t origin_id = 0;
    std::uint64_t sent_ts_ms = 0;
    std::vector<std::uint8_t> payload;

    bool operator==(const WireMessage& o) const {
        return msg_type == o.msg_type && session_id == o.session_id && seq == o.seq &&
               origin_id == o.origin_id && sent_ts_ms == o.sent_ts_ms && payload == o.payload;
    }
};

enum class DecodeError { MAC_FAIL, TRUNCATED, BAD_VERSION, BAD_TYPE };

struct DecodeResult {
    std::optional<WireMessage> message;
    DecodeError error = DecodeError::TRUNCATED;
    bool ok() const { return message.has_value(); }
};

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
    b.push_back(static_cast<std::uint8_t>(v >> 8));
    b.push_back(static_cast<std::uint8_t>(v));
}
inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int i = 3; i >= 0; --i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u64(std::vector<std::uint8_t>& b, std::uint64_t v) {
    for (int i = 7; i >= 0; --i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] << 8 | p[1]);
}
inline std::uint32_t get_u32(const std::uint8_t* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = v << 8 | p[i];
    return v;
}
inline std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = v << 8 | p[i];
    return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> frame_encode(const WireMessage& msg,
                                              std::span<const std::uint8_t> key) {
    if (msg.payload.size() > kMaxPayload) throw std::length_error("payload too large");
    std::vector<std::uint8_t> buf;
    buf.reserve(kHeaderSize + msg.payload.size() + kMacSize);
    buf.push_back(kVersion);
    buf.push_back(static_cast<std::uint8_t>(msg.msg_type));
    buf.insert(buf.end(), msg.session_id.begin(), msg.session_id.end());
    detail::put_u32(buf, msg.seq);
    detail::put_u16(buf, msg.origin_id);
    detail::put_u64(buf, msg.sent_ts_ms);
    detail::put_u16(buf, static_cast<std::uint16_t>(msg.payload.size()));
    buf.insert(buf.end(), msg.payload.begin(), msg.payload.end());
    const auto mac = crypto::hmac_sha256(key, buf);
    buf.insert(buf.end(), mac.begin(), mac.end());
    return buf;
}

/// Decode one exact frame. No field is exposed before the MAC verifies;
/// the typed message is the only trusted output.
inline DecodeResult frame_decode(std::span<const std::uint8_t> frame,
                                 std::span<const std::uint8_t> key) {
    DecodeResult result;
    if (frame.size() < kHeaderSize + kMacSize) {
        result.error = DecodeError::TRUNCATED;
        return result;
    }
    const std::uint16_t payload_len = detail::get_u16(frame.data() + kHeaderSize - 2);
    if (frame.size() != kHeaderSize + payload_len + kMacSize) {
        result.error = DecodeError::TRUNCATED;
        return result;
    }
    const std::size_t mac_off = frame.size() - kMacSize;
    const auto mac = crypto::hmac_sha256(key, frame.subspan(0, mac_off));
    if (!std::equal(mac.begin(), mac.end(), frame.begin() + static_cast<long>(mac_off))) {
        result.error = DecodeError::MAC_FAIL;
        return result;
    }
    if (frame[0] != kVersion) {
        result.error = DecodeError::BAD_VERSION;
        return result;
    }
    if (!is_known_msg_type(frame[1])) {
        result.error = DecodeError::BAD_TYPE;
        return result;
    }
    WireMessage msg;
    msg.msg_type = static_cast<MsgType>(frame[1]);
    std::copy_n(frame.begin() + 2, 16, msg.session_id.begin());
    msg.seq = detail::get_u32(frame.data() + 18);
    msg.origin_id = detail::get_u16(frame.data() + 22);
    msg.sent_ts_ms = detail::get_u64(frame.data() + 24);
    msg.payload.assign(frame.begin() + kHeaderSize, frame.begin() + static_cast<long>(mac_off));
    return {msg, DecodeError::TRUNCATED};
}

/// Standard symmetric-path clock-offset estimator over a four-timestamp
/// exchange: t1 request send (local), t2 request receive (peer), t3 response
/// send (peer), t4 response receive (local). Positive means the peer's clock
/// is ahead.
inline double offset_from_timestamps(double t1, double t2, double t3, double t4) {
    return ((t2 - t1) + (t3 - t4)) / 2.0;
}

struct ClockSyncEntry {
    double offset_ms = 0.0;
    double last_measured_ms = -1.0;  // < 0: never measured
    bool aged = false;
};

/// Sliding window of baseline OWD measurements toward one peer; the window
/// minimum is the baseline (min filtering rejects congestion inflation).
class BaselineTracker {
public:
    explicit BaselineTracker(std::size_t window = 10, double staleness_bound_ms = 60'000.0)
        : window_(window), staleness_bound_ms_(staleness_bound_ms) {}

    void record(double owd_ms, double now_ms) {
        history_.push_back(owd_ms);
        while (history_.size() > window_) history_.pop_front();
        last_update_ms_ = now_ms;
    }

    void mark_stale() { last_update_ms_ = -1.0; }

    std::optional<double> baseline(double now_ms) const {
        if (history_.empty() || last_update_ms_ < 0.0) return std::nullopt;
        if (now_ms - last_update_ms_ > staleness_bound_ms_) return std::nullopt;
        return *std::min_element(history_.begin(), history_.end());
    }

private:
    std::size_t window_;
    double staleness_bound_ms_;
    std::deque<double> history_;
    double last_update_ms_ = -1.0;
};

/// One bidirectional timestamp exchange with a peer: corrected OWDs are
/// min'ed into the tracker. The exchange function reports (owd_forward_raw,
/// owd_reverse_raw) in the two clock domains; offset correction is applied
/// here so a known peer offset cancels exactly.
struct BaselineExchange {
    double forward_raw_ms;  // peer_recv_ts - local_send_ts (uncorrected)
    double reverse_raw_ms;  // local_recv_ts - peer_send_ts (uncorrected)
};

inline double corrected_pair_min(const BaselineExchange& ex, double peer_offset_ms) {
    // forward crosses into the peer clock domain: subtract its offset.
    const double fwd = ex.forward_raw_ms - peer_offset_ms;
    const double rev = ex.reverse_raw_ms + peer_offset_ms;
    return std::min(fwd, rev);
}

}  // namespace geoverity::wire
