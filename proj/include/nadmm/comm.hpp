#pragma once

#include "nadmm/common.hpp"

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace nadmm {

// Wire frame: [u8 version][u8 kind][u32 iteration][u32 worker_id][u64 payload_len][payload],
// all integers and payload reals little-endian.
inline constexpr std::uint8_t kWireVersion = 1;

enum class MsgKind : std::uint8_t { scatter = 1, gather = 2, control = 3 };

enum class ControlOp : std::uint8_t { start = 1, stop = 2, config = 3 };

struct Envelope {
    MsgKind kind = MsgKind::control;
    std::uint32_t iteration = 0;
    std::uint32_t worker_id = 0;
    std::vector<std::uint8_t> payload;
};

namespace wire {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f64(std::vector<std::uint8_t>& out, double v);
void put_vector(std::vector<std::uint8_t>& out, const Vector& v);

/// Bounds-checked little-endian reader; any overrun raises ProtocolError.
class Reader {
  public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    double f64();
    Vector vector();
    bool done() const { return pos_ == bytes_.size(); }

  private:
    void need(std::size_t n) const;
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> encode_frame(const Envelope& env);
/// Decodes one full frame; `bytes` must be exactly one frame.
Envelope decode_frame(std::span<const std::uint8_t> bytes);

}  // namespace wire

/// Coordinator -> worker payload: consensus iterate, this worker's dual, and
/// its current penalty. SGD broadcasts reuse the kind with y empty.
struct ScatterBody {
    Vector z;
    Vector y;
    double rho = 0.0;
};

struct InnerStats {
    double grad_norm = 0.0;
    std::uint32_t inner_iters = 0;
    std::uint32_t cg_iters = 0;
    std::uint32_t fn_evals = 0;
    std::uint8_t flags = 0;  // bit 0: line-search capped, bit 1: CG fallback
};

/// Worker -> coordinator payload: the local iterate (or batch gradient) plus
/// inner-solver counters.
struct GatherBody {
    Vector x;
    InnerStats stats;
};

struct ControlBody {
    ControlOp op = ControlOp::start;
    std::vector<std::uint8_t> blob;
};

std::vector<std::uint8_t> encode_scatter(const ScatterBody& body);
ScatterBody decode_scatter(std::span<const std::uint8_t> payload);
std::vector<std::uint8_t> encode_gather(const GatherBody& body);
GatherBody decode_gather(std::span<const std::uint8_t> payload);
std::vector<std::uint8_t> encode_control(const ControlBody& body);
ControlBody decode_control(std::span<const std::uint8_t> payload);

struct TransportStats {
    std::uint64_t messages_sent = 0;  // every envelope, both directions
    std::uint64_t bytes_sent = 0;     // framed bytes, both directions
    std::uint64_t data_messages = 0;  // scatter + gather envelopes only
    std::uint64_t rounds = 0;         // completed scatter+gather cycles
};

/// Average data messages per completed round; 2N for every solver driven
/// through the scatter/gather discipline.
std::uint64_t message_count_per_iteration(const TransportStats& stats);

/// Worker-side endpoint: blocking receive of coordinator frames, send of
/// replies.
class WorkerChannel {
  public:
    virtual ~WorkerChannel() = default;
    virtual Envelope receive() = 0;
    virtual void send(const Envelope& env) = 0;
};

/// Coordinator-side endpoint. scatter() and gather() must alternate; the pair
/// forms exactly one communication round.
class Transport {
  public:
    virtual ~Transport() = default;
    virtual int worker_count() const = 0;
    /// One envelope per worker, ascending worker id. Blocks until delivered.
    virtual void scatter(const std::vector<Envelope>& envelopes) = 0;
    /// Collects one envelope per worker, sorted by worker id; every envelope
    /// must carry `iteration` or the call raises ProtocolError.
    virtual std::vector<Envelope> gather(std::uint32_t iteration) = 0;
    /// Control broadcast (start/config/stop); not part of any round.
    virtual void send_control(ControlOp op, std::span<const std::uint8_t> blob) = 0;

    const TransportStats& stats() const { return stats_; }

  protected:
    TransportStats stats_;
};

namespace detail {

/// Single-producer single-consumer frame queue used by the in-process backend.
class FrameQueue {
  public:
    void push(std::vector<std::uint8_t> frame);
    /// Pops one frame; empty optional on timeout.
    bool pop(std::vector<std::uint8_t>& out, double timeout_seconds);

  private:
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::vector<std::uint8_t>> frames_;
};

}  // namespace detail

/// Shared-memory transport: envelopes still pass through the wire codec so
/// both backends exercise identical serialization.
class InProcessTransport : public Transport {
  public:
    explicit InProcessTransport(int n_workers, double timeout_seconds = 60.0);
    ~InProcessTransport() override;

    int worker_count() const override { return static_cast<int>(mailboxes_.size()); }
    void scatter(const std::vector<Envelope>& envelopes) override;
    std::vector<Envelope> gather(std::uint32_t iteration) override;
    void send_control(ControlOp op, std::span<const std::uint8_t> blob) override;

    WorkerChannel& channel(int worker_id);

  private:
    struct Mailbox;
    std::vector<std::unique_ptr<Mailbox>> mailboxes_;
    double timeout_;
    bool round_open_ = false;
};

/// TCP star topology: the coordinator listens, workers connect and register
/// with their id via a start-control frame.
class TcpTransport : public Transport {
  public:
    /// Binds and listens; pass port 0 for an ephemeral port (see port()).
    TcpTransport(const std::string& host, std::uint16_t port, int n_workers,
                 double timeout_seconds = 60.0);
    ~TcpTransport() override;

    std::uint16_t port() const { return port_; }
    /// Blocks until all n_workers have connected and registered.
    void accept_workers();

    int worker_count() const override { return n_workers_; }
    void scatter(const std::vector<Envelope>& envelopes) override;
    std::vector<Envelope> gather(std::uint32_t iteration) override;
    void send_control(ControlOp op, std::span<const std::uint8_t> blob) override;

  private:
    void send_to(int worker_id, const Envelope& env);

    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    int n_workers_ = 0;
    double timeout_;
    bool round_open_ = false;
    std::vector<int> worker_fds_;
};

/// Worker side of the TCP transport; registers `worker_id` on construction.
class TcpWorkerChannel : public WorkerChannel {
  public:
    TcpWorkerChannel(const std::string& host, std::uint16_t port, int worker_id,
                     double timeout_seconds = 60.0);
    ~TcpWorkerChannel() override;

    Envelope receive() override;
    void send(const Envelope& env) override;

  private:
    int fd_ = -1;
    int worker_id_ = 0;
    double timeout_;
};

}  // namespace nadmm
