#include "nadmm/comm.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>

namespace nadmm {

namespace wire {

namespace {
constexpr std::size_t kHeaderBytes = 1 + 1 + 4 + 4 + 8;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64(out, bits);
}

void put_vector(std::vector<std::uint8_t>& out, const Vector& v) {
    put_u64(out, static_cast<std::uint64_t>(v.size()));
    for (Index i = 0; i < v.size(); ++i) put_f64(out, v(i));
}

void Reader::need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ProtocolError("truncated payload");
}

std::uint8_t Reader::u8() {
    need(1);
    return bytes_[pos_++];
}

std::uint32_t Reader::u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
}

std::uint64_t Reader::u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
}

double Reader::f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

Vector Reader::vector() {
    const std::uint64_t count = u64();
    need(count * 8);
    Vector v(static_cast<Index>(count));
    for (std::uint64_t i = 0; i < count; ++i) v(static_cast<Index>(i)) = f64();
    return v;
}

std::vector<std::uint8_t> encode_frame(const Envelope& env) {
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderBytes + env.payload.size());
    out.push_back(kWireVersion);
    out.push_back(static_cast<std::uint8_t>(env.kind));
    put_u32(out, env.iteration);
    put_u32(out, env.worker_id);
    put_u64(out, static_cast<std::uint64_t>(env.payload.size()));
    out.insert(out.end(), env.payload.begin(), env.payload.end());
    return out;
}

Envelope decode_frame(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    const std::uint8_t version = r.u8();
    if (version != kWireVersion) {
        throw ProtocolError("unsupported wire version " + std::to_string(version));
    }
    Envelope env;
    const std::uint8_t kind = r.u8();
    if (kind < 1 || kind > 3) throw ProtocolError("unknown message kind " + std::to_string(kind));
    env.kind = static_cast<MsgKind>(kind);
    env.iteration = r.u32();
    env.worker_id = r.u32();
    const std::uint64_t len = r.u64();
    if (len != bytes.size() - kHeaderBytes) throw ProtocolError("frame length mismatch");
    env.payload.assign(bytes.begin() + kHeaderBytes, bytes.end());
    return env;
}

}  // namespace wire

std::vector<std::uint8_t> encode_scatter(const ScatterBody& body) {
    std::vector<std::uint8_t> out;
    wire::put_vector(out, body.z);
    wire::put_vector(out, body.y);
    wire::put_f64(out, body.rho);
    return out;
}

ScatterBody decode_scatter(std::span<const std::uint8_t> payload) {
    wire::Reader r(payload);
    ScatterBody body;
    body.z = r.vector();
    body.y = r.vector();
    body.rho = r.f64();
    if (!r.done()) throw ProtocolError("trailing bytes in scatter payload");
    return body;
}

std::vector<std::uint8_t> encode_gather(const GatherBody& body) {
    std::vector<std::uint8_t> out;
    wire::put_vector(out, body.x);
    wire::put_f64(out, body.stats.grad_norm);
    wire::put_u32(out, body.stats.inner_iters);
    wire::put_u32(out, body.stats.cg_iters);
    wire::put_u32(out, body.stats.fn_evals);
    out.push_back(body.stats.flags);
    return out;
}

GatherBody decode_gather(std::span<const std::uint8_t> payload) {
    wire::Reader r(payload);
    GatherBody body;
    body.x = r.vector();
    body.stats.grad_norm = r.f64();
    body.stats.inner_iters = r.u32();
    body.stats.cg_iters = r.u32();
    body.stats.fn_evals = r.u32();
    body.stats.flags = r.u8();
    if (!r.done()) throw ProtocolError("trailing bytes in gather payload");
    return body;
}

std::vector<std::uint8_t> encode_control(const ControlBody& body) {
    std::vector<std::uint8_t> out;
    out.push_back(static_cast<std::uint8_t>(body.op));
    wire::put_u64(out, static_cast<std::uint64_t>(body.blob.size()));
    out.insert(out.end(), body.blob.begin(), body.blob.end());
    return out;
}

ControlBody decode_control(std::span<const std::uint8_t> payload) {
    wire::Reader r(payload);
    ControlBody body;
    const std::uint8_t op = r.u8();
    if (op < 1 || op > 3) throw ProtocolError("unknown control op " + std::to_string(op));
    body.op = static_cast<ControlOp>(op);
    const std::uint64_t len = r.u64();
    body.blob.resize(len);
    for (std::uint64_t i = 0; i < len; ++i) body.blob[i] = r.u8();
    if (!r.done()) throw ProtocolError("trailing bytes in control payload");
    return body;
}

std::uint64_t message_count_per_iteration(const TransportStats& stats) {
    if (stats.rounds == 0) throw ConfigError("no completed rounds to account");
    return stats.data_messages / stats.rounds;
}

namespace detail {

void FrameQueue::push(std::vector<std::uint8_t> frame) {
    {
        std::lock_guard lock(mu_);
        frames_.push_back(std::move(frame));
    }
    cv_.notify_one();
}

bool FrameQueue::pop(std::vector<std::uint8_t>& out, double timeout_seconds) {
    std::unique_lock lock(mu_);
    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                              std::chrono::duration<double>(timeout_seconds));
    if (!cv_.wait_until(lock, deadline, [&] { return !frames_.empty(); })) return false;
    out = std::move(frames_.front());
    frames_.pop_front();
    return true;
}

}  // namespace detail

namespace {
class InProcessChannel;
}

struct InProcessTransport::Mailbox {
    detail::FrameQueue to_worker;
    detail::FrameQueue to_coordinator;
    std::unique_ptr<WorkerChannel> channel;
};

namespace {

/// In-process worker endpoint backed by a mailbox pair.
class InProcessChannel : public WorkerChannel {
  public:
    InProcessChannel(InProcessTransport::Mailbox& box, double timeout)
        : box_(box), timeout_(timeout) {}

    Envelope receive() override;
    void send(const Envelope& env) override;

  private:
    InProcessTransport::Mailbox& box_;
    double timeout_;
};

}  // namespace

InProcessTransport::InProcessTransport(int n_workers, double timeout_seconds)
    : timeout_(timeout_seconds) {
    if (n_workers < 1) throw ConfigError("transport needs at least one worker");
    mailboxes_.reserve(static_cast<std::size_t>(n_workers));
    for (int i = 0; i < n_workers; ++i) {
        auto box = std::make_unique<Mailbox>();
        box->channel = std::make_unique<InProcessChannel>(*box, timeout_seconds);
        mailboxes_.push_back(std::move(box));
    }
}

InProcessTransport::~InProcessTransport() = default;

Envelope InProcessChannel::receive() {
    std::vector<std::uint8_t> frame;
    if (!box_.to_worker.pop(frame, timeout_)) {
        throw TransportError("worker timed out waiting for coordinator");
    }
    return wire::decode_frame(frame);
}

void InProcessChannel::send(const Envelope& env) {
    box_.to_coordinator.push(wire::encode_frame(env));
}

WorkerChannel& InProcessTransport::channel(int worker_id) {
    if (worker_id < 0 || worker_id >= worker_count()) {
        throw ConfigError("channel: bad worker id " + std::to_string(worker_id));
    }
    return *mailboxes_[static_cast<std::size_t>(worker_id)]->channel;
}

void InProcessTransport::scatter(const std::vector<Envelope>& envelopes) {
    if (round_open_) throw ProtocolError("scatter called twice without an intervening gather");
    if (static_cast<int>(envelopes.size()) != worker_count()) {
        throw ConfigError("scatter requires exactly one envelope per worker");
    }
    for (std::size_t i = 0; i < envelopes.size(); ++i) {
        auto frame = wire::encode_frame(envelopes[i]);
        stats_.messages_sent += 1;
        stats_.bytes_sent += frame.size();
        stats_.data_messages += 1;
        mailboxes_[i]->to_worker.push(std::move(frame));
    }
    round_open_ = true;
}

std::vector<Envelope> InProcessTransport::gather(std::uint32_t iteration) {
    if (!round_open_) throw ProtocolError("gather without a preceding scatter");
    std::vector<Envelope> out;
    out.reserve(mailboxes_.size());
    std::vector<int> missing;
    for (std::size_t i = 0; i < mailboxes_.size(); ++i) {
        std::vector<std::uint8_t> frame;
        if (!mailboxes_[i]->to_coordinator.pop(frame, timeout_)) {
            missing.push_back(static_cast<int>(i));
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
        if (env.worker_id != i) {
            throw ProtocolError("worker id mismatch on mailbox " + std::to_string(i));
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

void InProcessTransport::send_control(ControlOp op, std::span<const std::uint8_t> blob) {
    Envelope env;
    env.kind = MsgKind::control;
    ControlBody body;
    body.op = op;
    body.blob.assign(blob.begin(), blob.end());
    env.payload = encode_control(body);
    for (auto& box : mailboxes_) {
        auto frame = wire::encode_frame(env);
        stats_.messages_sent += 1;
        stats_.bytes_sent += frame.size();
        box->to_worker.push(std::move(frame));
    }
}

}  // namespace nadmm
