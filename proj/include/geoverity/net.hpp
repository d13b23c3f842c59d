#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstdint>
#include <cstring>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace geoverity::net {

inline std::uint64_t now_ms() {
    return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                          std::chrono::system_clock::now().time_since_epoch())
                                          .count());
}

/// Blocking TCP connection carrying length-prefixed wire frames
/// (u16 big-endian frame length, then the frame bytes).
class TcpConn {
public:
    TcpConn() = default;
    explicit TcpConn(int fd) : fd_(fd) {}
    TcpConn(const TcpConn&) = delete;
    TcpConn& operator=(const TcpConn&) = delete;
    TcpConn(TcpConn&& o) noexcept : fd_(o.fd_) { o.fd_ = -1; }
    TcpConn& operator=(TcpConn&& o) noexcept {
        close_fd();
        fd_ = o.fd_;
        o.fd_ = -1;
        return *this;
    }
    ~TcpConn() { close_fd(); }

    static TcpConn connect(const std::string& host, std::uint16_t port,
                           int timeout_ms = 2000) {
        int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) throw std::runtime_error("socket() failed");
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(port);
        if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
            ::close(fd);
            throw std::runtime_error("bad address: " + host);
        }
        if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
            ::close(fd);
            throw std::runtime_error("connect to " + host + " failed");
        }
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        TcpConn c(fd);
        c.set_timeout(timeout_ms);
        return c;
    }

    void set_timeout(int timeout_ms) {
        timeval tv{timeout_ms / 1000, (timeout_ms % 1000) * 1000};
        ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
        ::setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));
    }

    void send_frame(const std::vector<std::uint8_t>& frame) {
        if (frame.size() > 0xffff) throw std::length_error("frame too large");
        std::vector<std::uint8_t> buf;
        buf.reserve(frame.size() + 2);
        buf.push_back(static_cast<std::uint8_t>(frame.size() >> 8));
        buf.push_back(static_cast<std::uint8_t>(frame.size()));
        buf.insert(buf.end(), frame.begin(), frame.end());
        write_all(buf.data(), buf.size());
    }

    /// nullopt on timeout or orderly shutdown.
    std::optional<std::vector<std::uint8_t>> recv_frame() {
        std::uint8_t len_buf[2];
        if (!read_all(len_buf, 2)) return std::nullopt;
        const std::size_t len = static_cast<std::size_t>(len_buf[0]) << 8 | len_buf[1];
        std::vector<std::uint8_t> frame(len);
        if (!read_all(frame.data(), len)) return std::nullopt;
        return frame;
    }

    /// Raw stream I/O, for plain protocols (HTTP probes) on this socket.
    void send_raw(const std::uint8_t* p, std::size_t n) { write_all(p, n); }
    ssize_t recv_some(std::uint8_t* p, std::size_t n) { return ::recv(fd_, p, n, 0); }

    bool valid() const { return fd_ >= 0; }

private:
    void write_all(const std::uint8_t* p, std::size_t n) {
        while (n > 0) {
            const ssize_t w = ::send(fd_, p, n, MSG_NOSIGNAL);
            if (w <= 0) throw std::runtime_error("send failed");
            p += w;
            n -= static_cast<std::size_t>(w);
        }
    }
    bool read_all(std::uint8_t* p, std::size_t n) {
        while (n > 0) {
            const ssize_t r = ::recv(fd_, p, n, 0);
            if (r <= 0) return false;
            p += r;
            n -= static_cast<std::size_t>(r);
        }
        return true;
    }
    void close_fd() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

    int fd_ = -1;
};

class TcpListener {
public:
    explicit TcpListener(std::uint16_t port) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd_ < 0) throw std::runtime_error("socket() failed");
        int one = 1;
        ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_ANY);
        addr.sin_port = htons(port);
        if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
            ::close(fd_);
            throw std::runtime_error("bind failed on port " + std::to_string(port));
        }
        if (::listen(fd_, 16) != 0) {
            ::close(fd_);
            throw std::runtime_error("listen failed");
        }
    }
    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;
    ~TcpListener() {
        if (fd_ >= 0) ::close(fd_);
    }

    std::uint16_t port() const {
        sockaddr_in addr{};
        socklen_t len = sizeof(addr);
        ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        return ntohs(addr.sin_port);
    }

    std::optional<TcpConn> accept(int timeout_ms = -1) {
        if (timeout_ms >= 0) {
            timeval tv{timeout_ms / 1000, (timeout_ms % 1000) * 1000};
            ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
        }
        const int cfd = ::accept(fd_, nullptr, nullptr);
        if (cfd < 0) return std::nullopt;
        return TcpConn(cfd);
    }

    void close() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

private:
    int fd_ = -1;
};

}  // namespace geoverity::net
