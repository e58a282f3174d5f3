#include "nadmm/worker.hpp"

#include "nadmm/data_io.hpp"
#include "nadmm/objective.hpp"
#include "nadmm/softmax.hpp"

#include <json.hpp>

#include <condition_variable>
#include <cstdio>
#include <cstdlib>
#include <mutex>

namespace nadmm {

namespace {

using nlohmann::json;

// Caps the number of workers computing at once when NADMM_THREADS is set.
// Purely a CPU-usage pin: worker results do not depend on scheduling.
class ComputeGate {
  public:
    ComputeGate() {
        if (const char* env = std::getenv("NADMM_THREADS")) {
            const long v = std::strtol(env, nullptr, 10);
            if (v >= 1) limit_ = static_cast<int>(v);
        }
    }

    void acquire() {
        if (limit_ <= 0) return;
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return active_ < limit_; });
        ++active_;
    }

    void release() {
        if (limit_ <= 0) return;
        {
            std::lock_guard lock(mu_);
            --active_;
        }
        cv_.notify_one();
    }

  private:
    int limit_ = 0;  // 0: unlimited
    int active_ = 0;
    std::mutex mu_;
    std::condition_variable cv_;
};

ComputeGate& compute_gate() {
    static ComputeGate gate;
    return gate;
}

struct GateScope {
    GateScope() { compute_gate().acquire(); }
    ~GateScope() { compute_gate().release(); }
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace

std::vector<std::uint8_t> WorkerSessionConfig::to_blob() const {
    json j;
    j["mode"] = mode;
    j["solver"] = solver == InnerSolverKind::newton ? "newton" : "lbfgs";
    j["inner_iters"] = inner_iters;
    j["newton"] = {{"cg_tol", newton.cg_tol},
                   {"cg_max_iters", newton.cg_max_iters},
                   {"armijo_beta", newton.armijo_beta},
                   {"backtrack_gamma", newton.backtrack_gamma},
                   {"ls_max_iters", newton.ls_max_iters},
                   {"grad_tol", newton.grad_tol}};
    j["lbfgs"] = {{"history", lbfgs.history},
                  {"wolfe_c1", lbfgs.wolfe_c1},
                  {"wolfe_c2", lbfgs.wolfe_c2},
                  {"ls_max_iters", lbfgs.ls_max_iters},
                  {"grad_tol", lbfgs.grad_tol}};
    j["sgd_batch"] = sgd_batch;
    j["steps_per_epoch"] = steps_per_epoch;
    j["seed"] = seed;
    const std::string text = j.dump();
    return {text.begin(), text.end()};
}

WorkerSessionConfig WorkerSessionConfig::from_blob(std::span<const std::uint8_t> blob) {
    WorkerSessionConfig cfg;
    json j;
    try {
        j = json::parse(blob.begin(), blob.end());
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("bad session config blob: ") + e.what());
    }
    cfg.mode = j.at("mode").get<std::string>();
    cfg.solver = j.at("solver").get<std::string>() == "lbfgs" ? InnerSolverKind::lbfgs
                                                              : InnerSolverKind::newton;
    cfg.inner_iters = j.at("inner_iters").get<int>();
    const auto& n = j.at("newton");
    cfg.newton.cg_tol = n.at("cg_tol").get<double>();
    cfg.newton.cg_max_iters = n.at("cg_max_iters").get<int>();
    cfg.newton.armijo_beta = n.at("armijo_beta").get<double>();
    cfg.newton.backtrack_gamma = n.at("backtrack_gamma").get<double>();
    cfg.newton.ls_max_iters = n.at("ls_max_iters").get<int>();
    cfg.newton.grad_tol = n.at("grad_tol").get<double>();
    const auto& l = j.at("lbfgs");
    cfg.lbfgs.history = l.at("history").get<int>();
    cfg.lbfgs.wolfe_c1 = l.at("wolfe_c1").get<double>();
    cfg.lbfgs.wolfe_c2 = l.at("wolfe_c2").get<double>();
    cfg.lbfgs.ls_max_iters = l.at("ls_max_iters").get<int>();
    cfg.lbfgs.grad_tol = l.at("grad_tol").get<double>();
    cfg.sgd_batch = j.at("sgd_batch").get<int>();
    cfg.steps_per_epoch = j.at("steps_per_epoch").get<int>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

void run_worker(WorkerChannel& channel, const Dataset& shard) {
    auto data = std::make_shared<const Dataset>(shard);
    // Local loss only; the global regularizer belongs to the z-update.
    const Objective base = make_softmax_objective(data, 0.0);
    const Index d = data->weight_dim();

    WorkerSessionConfig session;
    bool configured = false;
    Vector x_local = Vector::Zero(d);

    // SGD shard traversal: epoch-keyed permutation shared by every worker.
    std::vector<Index> perm;
    int shuffled_epoch = -1;

    for (;;) {
        Envelope env = channel.receive();
        if (env.kind == MsgKind::control) {
            const ControlBody body = decode_control(env.payload);
            if (body.op == ControlOp::stop) return;
            if (body.op == ControlOp::config) {
                session = WorkerSessionConfig::from_blob(body.blob);
                if (session.mode == "sgd" &&
                    (session.sgd_batch < 1 || session.sgd_batch > data->n())) {
                    throw ConfigError("sgd batch size must lie in [1, local n]");
                }
                configured = true;
            }
            continue;
        }
        if (env.kind != MsgKind::scatter) {
            throw ProtocolError("worker received unexpected message kind");
        }
        if (!configured) throw ProtocolError("scatter before session config");

        const ScatterBody body = decode_scatter(env.payload);
        Envelope reply;
        reply.kind = MsgKind::gather;
        reply.iteration = env.iteration;
        reply.worker_id = env.worker_id;

        GatherBody out;
        if (session.mode == "admm") {
            GateScope gate;
            Objective aug = make_augmented_objective(base, body.rho, body.z, body.y);
            if (session.solver == InnerSolverKind::newton) {
                NewtonConfig cfg = session.newton;
                cfg.newton_max_iters = session.inner_iters;
                NewtonResult res = newton_solve(aug, x_local, cfg);
                x_local = std::move(res.x);
                out.stats.grad_norm = res.final_grad_norm;
                out.stats.inner_iters = static_cast<std::uint32_t>(res.trace.size());
                for (const auto& t : res.trace) {
                    out.stats.cg_iters += static_cast<std::uint32_t>(t.cg_iters);
                    out.stats.fn_evals += static_cast<std::uint32_t>(t.fn_evals);
                    if (t.ls_capped) out.stats.flags |= 1;
                    if (t.cg_fallback) out.stats.flags |= 2;
                }
            } else {
                LbfgsConfig cfg = session.lbfgs;
                cfg.max_iters = session.inner_iters;
                LbfgsResult res = lbfgs_solve(aug, x_local, cfg);
                x_local = std::move(res.x);
                out.stats.grad_norm = res.final_grad_norm;
                out.stats.inner_iters = static_cast<std::uint32_t>(res.trace.size());
                for (const auto& t : res.trace) {
                    out.stats.fn_evals += static_cast<std::uint32_t>(t.fn_evals);
                    if (t.ls_fallback) out.stats.flags |= 1;
                }
            }
            out.x = x_local;
        } else {
            GateScope gate;
            const int epoch = static_cast<int>(env.iteration) / session.steps_per_epoch;
            if (epoch != shuffled_epoch) {
                perm.resize(static_cast<std::size_t>(data->n()));
                for (Index i = 0; i < data->n(); ++i) perm[static_cast<std::size_t>(i)] = i;
                detail::Rng rng(mix_seed(session.seed, static_cast<std::uint64_t>(epoch)));
                rng.shuffle(perm);
                shuffled_epoch = epoch;
            }
            const int step = static_cast<int>(env.iteration) % session.steps_per_epoch;
            const Index m = session.sgd_batch;
            std::vector<Index> batch(static_cast<std::size_t>(m));
            for (Index j = 0; j < m; ++j) {
                batch[static_cast<std::size_t>(j)] =
                    perm[static_cast<std::size_t>((static_cast<Index>(step) * m + j) %
                                                  data->n())];
            }
            const Dataset minibatch = data->subset(batch);
            out.x = gradient(minibatch, body.z, 0.0) / static_cast<double>(m);
            out.stats.inner_iters = 1;
            out.stats.fn_evals = 1;
        }
        reply.payload = encode_gather(out);
        channel.send(reply);
    }
}

WorkerPool::WorkerPool(InProcessTransport& transport, std::vector<Dataset> shards)
    : shards_(std::move(shards)) {
    if (static_cast<int>(shards_.size()) != transport.worker_count()) {
        throw ConfigError("shard count does not match transport worker count");
    }
    threads_.reserve(shards_.size());
    for (std::size_t i = 0; i < shards_.size(); ++i) {
        WorkerChannel& ch = transport.channel(static_cast<int>(i));
        const Dataset& shard = shards_[i];
        threads_.emplace_back([&ch, &shard, i] {
            try {
                run_worker(ch, shard);
            } catch (const std::exception& e) {
                std::fprintf(stderr, "[worker %zu] fatal: %s\n", i, e.what());
            }
        });
    }
}

WorkerPool::WorkerPool(const std::string& host, std::uint16_t port, std::vector<Dataset> shards,
                       double timeout_seconds)
    : shards_(std::move(shards)) {
    threads_.reserve(shards_.size());
    owned_channels_.resize(shards_.size());
    for (std::size_t i = 0; i < shards_.size(); ++i) {
        const Dataset& shard = shards_[i];
        auto* slot = &owned_channels_[i];
        threads_.emplace_back([host, port, timeout_seconds, &shard, slot, i] {
            try {
                auto channel = std::make_unique<TcpWorkerChannel>(host, port, static_cast<int>(i),
                                                                  timeout_seconds);
                *slot = std::move(channel);
                run_worker(**slot, shard);
            } catch (const std::exception& e) {
                std::fprintf(stderr, "[worker %zu] fatal: %s\n", i, e.what());
            }
        });
    }
}

WorkerPool::~WorkerPool() {
    for (auto& t : threads_) {
        if (t.joinable()) t.join();
    }
}

}  // namespace nadmm
