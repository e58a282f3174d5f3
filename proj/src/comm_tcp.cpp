#include "nadmm/comm.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>

namespace nadmm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_left(Clock::time_point deadline) {
    return std::chrono::duration<double>(deadline - Clock::now()).count();
}

void write_all(int fd, const std::uint8_t* data, std::size_t len, const std::string& who) {
    std::size_t sent = 0;
    while (sent < len) {
        const ssize_t n = ::send(fd, data + sent, len - sent, MSG_NOSIGNAL);
        if (n <= 0) throw TransportError("send failed to " + who + ": " + std::strerror(errno));
        sent += static_cast<std::size_t>(n);
    }
}

void read_exact(int fd, std::uint8_t* out, std::size_t len, Clock::time_point deadline,
                const std::string& who) {
    std::size_t got = 0;
    while (got < len) {
        const double left = seconds_left(deadline);
        if (left <= 0.0) throw TransportError("timeout reading from " + who);
        pollfd pfd{fd, POLLIN, 0};
        const int pr = ::poll(&pfd, 1, static_cast<int>(left * 1000.0) + 1);
        if (pr < 0) throw TransportError("poll failed: " + std::string(std::strerror(errno)));
        if (pr == 0) throw TransportError("timeout reading from " + who);
        const ssize_t n = ::recv(fd, out + got, len - got, 0);
        if (n == 0) throw TransportError("connection closed by " + who);
        if (n < 0) throw TransportError("recv failed from " + who + ": " + std::strerror(errno));
        got += static_cast<std::size_t>(n);
    }
}

// Reads one full frame: header first (fixed 18 bytes), then the payload.
std::vector<std::uint8_t> read_frame(int fd, Clock::time_point deadline, const std::string& who) {
    std::vector<std::uint8_t> buf(18);
    read_exact(fd, buf.data(), buf.size(), deadline, who);
    std::uint64_t payload_len = 0;
    for (int i = 0; i < 8; ++i) payload_len |= static_cast<std::uint64_t>(buf[10 + i]) << (8 * i);
    if (payload_len > (1ull << 32)) throw ProtocolError("implausible frame length from " + who);
    buf.resize(18 + payload_len);
    read_exact(fd, buf.data() + 18, payload_len, deadline, who);
    return buf;
}

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        throw ConfigError("bad IPv4 address: " + host);
    }
    return addr;
}

}  // namespace

TcpTransport::TcpTransport(const std::string& host, std::uint16_t port, int n_workers,
                           double timeout_seconds)
    : n_workers_(n_workers), timeout_(timeout_seconds) {
    if (n_workers < 1) throw ConfigError("transport needs at least one worker");
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw TransportError("socket: " + std::string(std::strerror(errno)));
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr = make_addr(host, port);
    if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
        throw TransportError("bind " + host + ":" + std::to_string(port) + ": " +
                             std::strerror(errno));
    }
    if (::listen(listen_fd_, n_workers) != 0) {
        throw TransportError("listen: " + std::string(std::strerror(errno)));
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    worker_fds_.assign(static_cast<std::size_t>(n_workers), -1);
}

TcpTransport::~TcpTransport() {
    for (int fd : worker_fds_) {
        if (fd >= 0) ::close(fd);
    }
    if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpTransport::accept_workers() {
    const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                             std::chrono::duration<double>(timeout_));
    int registered = 0;
    while (registered < n_workers_) {
        const double left = seconds_left(deadline);
        if (left <= 0.0) throw TransportError("timed out waiting for worker registrations");
        pollfd pfd{listen_fd_, POLLIN, 0};
        const int pr = ::poll(&pfd, 1, static_cast<int>(left * 1000.0) + 1);
        if (pr <= 0) throw TransportError("timed out waiting for worker registrations");
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) throw TransportError("accept: " + std::string(std::strerror(errno)));
        const int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        Envelope env = wire::decode_frame(read_frame(fd, deadline, "registering worker"));
        if (env.kind != MsgKind::control || decode_control(env.payload).op != ControlOp::start) {
            ::close(fd);
            throw ProtocolError("expected start-control registration frame");
        }
        if (env.worker_id >= static_cast<std::uint32_t>(n_workers_)) {
            ::close(fd);
            throw ProtocolError("worker id out of range: " + std::to_string(env.worker_id));
        }
        if (worker_fds_[env.worker_id] >= 0) {
            ::close(fd);
            throw ProtocolError("duplicate registration for worker " +
                                std::to_string(env.worker_id));
        }
        worker_fds_[env.worker_id] = fd;
        ++registered;
    }
}

void TcpTransport::send_to(int worker_id, const Envelope& env) {
    const int fd = worker_fds_[static_cast<std::size_t>(worker_id)];
    if (fd < 0) throw TransportError("worker " + std::to_string(worker_id) + " not connected");
    const auto frame = wire::encode_frame(env);
    write_all(fd, frame.data(), frame.size(), "worker " + std::to_string(worker_id));
    stats_.messages_sent += 1;
    stats_.bytes_sent += frame.size();
}

void TcpTransport::scatter(const std::vector<Envelope>& envelopes) {
    if (round_open_) throw ProtocolError("scatter called twice without an intervening gather");
    if (static_cast<int>(envelopes.size()) != n_workers_) {
        throw ConfigError("scatter requires exactly one envelope per worker");
    }
    for (int i = 0; i < n_workers_; ++i) {
        send_to(i, envelopes[static_cast<std::size_t>(i)]);
        stats_.data_messages += 1;
    }
    round_open_ = true;
}

std::vector<Envelope> TcpTransport::gather(std::uint32_t iteration) {
    if (!round_open_) throw ProtocolError("gather without a preceding scatter");
    const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                             std::chrono::duration<double>(timeout_));
    std::vector<Envelope> out;
    out.reserve(static_cast<std::size_t>(n_workers_));
    std::vector<int> missing;
    for (int i = 0; i < n_workers_; ++i) {
        const std::string who = "worker " + std::to_string(i);
        std::vector<std::uint8_t> frame;
        try {
            frame = read_frame(worker_fds_[static_cast<std::size_t>(i)], deadline, who);
        } catch (const TransportError&) {
            missing.push_back(i);
            continue;
        }
        Envelope env = wire::decode_frame(frame);
        stats_.messages_sent += 1;
        stats_.bytes_sent += frame.size();
        stats_.data_messages += 1;
        if (env.iteration != iteration) {
            throw ProtocolError("stale envelope from worker " + std::to_string(env.worker_id) +
                                ": iteration " + std::to_string(env.iteration) + ", expected " +
                                std::to_string(iteration));
        }
        if (env.worker_id != static_cast<std::uint32_t>(i)) {
            throw ProtocolError("worker id mismatch on connection " + std::to_string(i));
        }
        out.push_back(std::move(env));
    }
    if (!missing.empty()) {
        std::string ids;
        for (int id : missing) ids += (ids.empty() ? "" : ", ") + std::to_string(id);
        throw TransportError("gather timed out; missing workers: " + ids);
    }
    round_open_ = false;
    stats_.rounds += 1;
    return out;
}

void TcpTransport::send_control(ControlOp op, std::span<const std::uint8_t> blob) {
    Envelope env;
    env.kind = MsgKind::control;
    ControlBody body;
    body.op = op;
    body.blob.assign(blob.begin(), blob.end());
    env.payload = encode_control(body);
    for (int i = 0; i < n_workers_; ++i) send_to(i, env);
}

TcpWorkerChannel::TcpWorkerChannel(const std::string& host, std::uint16_t port, int worker_id,
                                   double timeout_seconds)
    : worker_id_(worker_id), timeout_(timeout_seconds) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw TransportError("socket: " + std::string(std::strerror(errno)));
    sockaddr_in addr = make_addr(host, port);
    if (::connect(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(fd_);
        fd_ = -1;
        throw TransportError("connect " + host + ":" + std::to_string(port) + ": " +
                             std::strerror(errno));
    }
    const int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    Envelope reg;
    reg.kind = MsgKind::control;
    reg.worker_id = static_cast<std::uint32_t>(worker_id);
    reg.payload = encode_control(ControlBody{ControlOp::start, {}});
    send(reg);
}

TcpWorkerChannel::~TcpWorkerChannel() {
    if (fd_ >= 0) ::close(fd_);
}

Envelope TcpWorkerChannel::receive() {
    const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                             std::chrono::duration<double>(timeout_));
    return wire::decode_frame(read_frame(fd_, deadline, "coordinator"));
}

void TcpWorkerChannel::send(const Envelope& env) {
    const auto frame = wire::encode_frame(env);
    write_all(fd_, frame.data(), frame.size(), "coordinator");
}

}  // namespace nadmm
