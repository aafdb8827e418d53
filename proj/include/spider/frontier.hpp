#ifndef SPIDER_FRONTIER_HPP
#define SPIDER_FRONTIER_HPP

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "spider/store.hpp"
#include "spider/util.hpp"

namespace spider::frontier {

struct DownloadTask {
    std::int64_t taskId = 0;
    store::HostId hostId = 0;
    store::OnionAddress host;
    std::string subdomain;
    std::string path;
    store::PathId pathId = 0;
};

enum class StrategyKind { Naive, Random, NewHostFirst, Prioritized, Iterative };

struct Strategy {
    StrategyKind kind = StrategyKind::Naive;
    std::uint64_t rngSeed = 0;
};

std::optional<StrategyKind> strategyFromName(std::string_view name);
const char* strategyName(StrategyKind kind);

struct BlackHolePolicy {
    std::int64_t maxPathsPerHost = 10000;  // undownloaded paths before a host is suspect
    int window = 200;                      // downloaded pages the yield is measured over
    double minYield = 0.01;                // new hosts per downloaded page
};

struct FrontierConfig {
    int cap = 4;  // live connections per hidden service
    std::size_t poolMax = 1000;
    std::size_t poolLow = 200;
    Strategy strategy;
    BlackHolePolicy blackhole;
};

struct CompletionInfo {
    int newHostsDiscovered = 0;
};

struct FrontierStats {
    std::int64_t tasksDispatched = 0;
    std::int64_t repopulations = 0;
    std::int64_t blackHolesFlagged = 0;
    std::int64_t lastRepopAdded = 0;
    std::int64_t lastRepopFreshHosts = 0;  // tasks for hosts with no downloads yet
};

/// The download scheduler: a bounded in-memory pool of tasks refilled from
/// the store by the active prioritization strategy, plus the per-host
/// push-back mechanism (cap of live connections per host with FIFO waiting
/// queues).
///
/// All methods are linearizable behind one internal mutex. Repopulation runs
/// inside acquire when the pool drops below the low-water mark, never
/// concurrently with another acquire.
class Frontier {
public:
    Frontier(store::Store& store, FrontierConfig config);

    /// Fills the pool from the store. Returns the number of tasks added.
    std::size_t repopulate();

    /// Non-blocking: next runnable task, or nothing if every candidate host
    /// is saturated or the pool and queues are empty.
    std::optional<DownloadTask> acquire();

    /// Blocks until a task is runnable, the crawl is exhausted (store has no
    /// candidates and nothing is in flight) or shutdown is requested.
    /// Returns nothing exactly when the caller should exit.
    std::optional<DownloadTask> acquireBlocking();

    /// Reports a finished task. Returns the next waiting task to run, if any
    /// host queue has work for a free slot; otherwise the caller goes back
    /// to the pool. Throws std::logic_error on double completion.
    std::optional<DownloadTask> complete(const DownloadTask& task, const CompletionInfo& info);

    /// Applies the black-hole policy to the host. True when newly flagged.
    bool markBlackHole(store::HostId host);
    bool isBlackHole(store::HostId host) const;

    void setStrategy(Strategy strategy);
    Strategy strategy() const;

    /// Ask workers to drain: no new tasks are handed out, in-flight tasks
    /// complete normally.
    void shutdown();
    bool isShutdown() const;

    FrontierStats stats() const;
    std::size_t poolSize() const;
    int activeCount(store::HostId host) const;
    std::size_t waitingCount(store::HostId host) const;
    std::int64_t liveTaskCount() const;

private:
    struct HostState {
        int active = 0;
        std::deque<DownloadTask> waiting;
        std::uint64_t lastServed = 0;
        // black-hole bookkeeping
        std::int64_t downloads = 0;
        std::deque<int> yieldWindow;
        std::int64_t yieldSum = 0;
    };

    std::size_t repopulateLocked();
    bool markBlackHoleLockedEval(store::HostId host);
    std::optional<DownloadTask> tryAcquireLocked();
    std::optional<DownloadTask> popEligibleQueueLocked();
    DownloadTask makeTask(const store::CandidateInfo& info);
    void startTaskLocked(HostState& hs, const DownloadTask& task);

    store::Store& store_;
    FrontierConfig config_;
    Rng rng_;

    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<DownloadTask> pool_;
    std::map<store::HostId, HostState> hostStates_;
    std::unordered_set<std::int64_t> liveTasks_;
    std::unordered_set<store::HostId> blackHoles_;
    std::size_t waitingTotal_ = 0;
    std::int64_t nextTaskId_ = 1;
    std::uint64_t serveSeq_ = 0;
    bool shutdown_ = false;
    bool lastRepopEmpty_ = false;
    std::uint64_t lastRepopStamp_ = 0;
    FrontierStats stats_;
};

}  // namespace spider::frontier

#endif
