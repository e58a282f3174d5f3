#pragma once

#include "nadmm/admm.hpp"
#include "nadmm/comm.hpp"
#include "nadmm/dataset.hpp"

#include <string>
#include <thread>
#include <vector>

namespace nadmm {

/// Worker event loop: waits for a config control frame, then serves scatter
/// frames until a stop control arrives. In ADMM mode each scatter triggers a
/// warm-started inner solve of the rho-augmented local objective; in SGD mode
/// it answers with a mini-batch gradient of the local shard.
void run_worker(WorkerChannel& channel, const Dataset& shard);

/// Session parameters broadcast as the config control blob (JSON).
struct WorkerSessionConfig {
    std::string mode = "admm";  // "admm" | "sgd"
    InnerSolverKind solver = InnerSolverKind::newton;
    int inner_iters = 1;
    NewtonConfig newton;
    LbfgsConfig lbfgs;
    int sgd_batch = 100;
    int steps_per_epoch = 1;
    std::uint64_t seed = 0;

    std::vector<std::uint8_t> to_blob() const;
    static WorkerSessionConfig from_blob(std::span<const std::uint8_t> blob);
};

/// Spawns one run_worker thread per shard, bound either to an in-process
/// transport or to a TCP coordinator on host:port. Threads exit on the stop
/// control; the destructor joins them. NADMM_THREADS caps how many workers
/// compute concurrently (results are thread-count independent; the cap only
/// pins CPU usage).
class WorkerPool {
  public:
    WorkerPool(InProcessTransport& transport, std::vector<Dataset> shards);
    WorkerPool(const std::string& host, std::uint16_t port, std::vector<Dataset> shards,
               double timeout_seconds = 60.0);
    ~WorkerPool();

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

  private:
    std::vector<Dataset> shards_;
    std::vector<std::unique_ptr<WorkerChannel>> owned_channels_;
    std::vector<std::thread> threads_;
};

}  // namespace nadmm
