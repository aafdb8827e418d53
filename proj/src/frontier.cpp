#include "spider/frontier.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>

#include "spider/util.hpp"

namespace spider::frontier {

std::optional<StrategyKind> strategyFromName(std::string_view name) {
    std::string n = toLowerAscii(name);
    if (n == "naive") return StrategyKind::Naive;
    if (n == "random") return StrategyKind::Random;
    if (n == "newhostfirst" || n == "new-host-first") return StrategyKind::NewHostFirst;
    if (n == "prioritized") return StrategyKind::Prioritized;
    if (n == "iterative") return StrategyKind::Iterative;
    return std::nullopt;
}

const char* strategyName(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::Naive: return "naive";
        case StrategyKind::Random: return "random";
        case StrategyKind::NewHostFirst: return "newhostfirst";
        case StrategyKind::Prioritized: return "prioritized";
        case StrategyKind::Iterative: return "iterative";
    }
    return "?";
}

Frontier::Frontier(store::Store& store, FrontierConfig config)
    : store_(store), config_(config), rng_(config.strategy.rngSeed) {}

DownloadTask Frontier::makeTask(const store::CandidateInfo& info) {
    DownloadTask t;
    t.taskId = nextTaskId_++;
    t.hostId = info.hostId;
    auto host = store_.hostById(info.hostId);
    assert(host);
    t.host = host->address;
    t.subdomain = info.subdomain;
    t.path = info.path;
    t.pathId = info.id;
    return t;
}

std::size_t Frontier::repopulateLocked() {
    if (pool_.size() >= config_.poolMax) return 0;

    // Hosts that already have queued work are skipped, as are flagged black
    // holes. Tasks in the pool are invisible to the store because their
    // paths were marked in progress when pooled.
    std::unordered_set<store::HostId> exclude(blackHoles_);
    for (const auto& [host, hs] : hostStates_)
        if (!hs.waiting.empty()) exclude.insert(host);

    store::CandidateFilter filter;
    filter.excludeHosts = &exclude;
    std::vector<store::CandidateInfo> candidates = store_.snapshotCandidates(filter);

    // Late black-hole check: a host may have crossed the policy thresholds
    // since the last round.
    for (const auto& c : candidates)
        if (!blackHoles_.count(c.hostId) && markBlackHoleLockedEval(c.hostId)) exclude.insert(c.hostId);
    if (!blackHoles_.empty()) {
        std::erase_if(candidates,
                      [&](const store::CandidateInfo& c) { return blackHoles_.count(c.hostId) != 0; });
    }

    const std::size_t space = config_.poolMax - pool_.size();
    std::vector<const store::CandidateInfo*> chosen;
    chosen.reserve(std::min(space, candidates.size()));

    switch (config_.strategy.kind) {
        case StrategyKind::Naive: {
            // Insertion order: ascending path id.
            std::vector<const store::CandidateInfo*> byId;
            byId.reserve(candidates.size());
            for (const auto& c : candidates) byId.push_back(&c);
            std::sort(byId.begin(), byId.end(),
                      [](auto* a, auto* b) { return a->id < b->id; });
            for (auto* c : byId) {
                if (chosen.size() >= space) break;
                chosen.push_back(c);
            }
            break;
        }
        case StrategyKind::Random: {
            std::vector<const store::CandidateInfo*> shuffled;
            shuffled.reserve(candidates.size());
            for (const auto& c : candidates) shuffled.push_back(&c);
            std::shuffle(shuffled.begin(), shuffled.end(), rng_);
            for (auto* c : shuffled) {
                if (chosen.size() >= space) break;
                chosen.push_back(c);
            }
            break;
        }
        case StrategyKind::NewHostFirst: {
            // One page per hidden service, hosts without any download first.
            std::vector<std::pair<bool, const store::CandidateInfo*>> perHost;
            store::HostId current = 0;
            for (const auto& c : candidates) {
                if (c.hostId == current) continue;  // snapshot is (host, id) ordered
                current = c.hostId;
                bool fresh = store_.downloadedCountOfHost(c.hostId) == 0;
                perHost.emplace_back(!fresh, &c);
            }
            std::stable_sort(perHost.begin(), perHost.end(),
                             [](const auto& a, const auto& b) { return a.first < b.first; });
            for (const auto& [seen, c] : perHost) {
                if (chosen.size() >= space) break;
                chosen.push_back(c);
            }
            break;
        }
        case StrategyKind::Prioritized: {
            std::vector<const store::CandidateInfo*> byCount;
            byCount.reserve(candidates.size());
            for (const auto& c : candidates) byCount.push_back(&c);
            std::sort(byCount.begin(), byCount.end(), [](auto* a, auto* b) {
                if (a->distinctIncomingCount != b->distinctIncomingCount)
                    return a->distinctIncomingCount > b->distinctIncomingCount;
                return a->id < b->id;  // secondary rule: the path found earlier
            });
            for (auto* c : byCount) {
                if (chosen.size() >= space) break;
                chosen.push_back(c);
            }
            break;
        }
        case StrategyKind::Iterative: {
            // Pass one walks the hosts, pass two picks one path per host:
            // highest distinct incoming count, draws resolved towards the
            // path found earlier.
            const store::CandidateInfo* best = nullptr;
            std::vector<const store::CandidateInfo*> perHost;
            for (const auto& c : candidates) {
                if (best && best->hostId != c.hostId) {
                    perHost.push_back(best);
                    best = nullptr;
                }
                if (!best || c.distinctIncomingCount > best->distinctIncomingCount ||
                    (c.distinctIncomingCount == best->distinctIncomingCount && c.id < best->id))
                    best = &c;
            }
            if (best) perHost.push_back(best);
            for (auto* c : perHost) {
                if (chosen.size() >= space) break;
                chosen.push_back(c);
            }
            break;
        }
    }

    std::vector<store::PathId> ids;
    ids.reserve(chosen.size());
    std::int64_t fresh = 0;
    for (auto* c : chosen) {
        ids.push_back(c->id);
        if (store_.downloadedCountOfHost(c->hostId) == 0) ++fresh;
        pool_.push_back(makeTask(*c));
    }
    if (!ids.empty()) store_.markInProgressBatch(ids);

    ++stats_.repopulations;
    stats_.lastRepopAdded = static_cast<std::int64_t>(ids.size());
    stats_.lastRepopFreshHosts = fresh;
    lastRepopEmpty_ = ids.empty();
    lastRepopStamp_ = store_.mutationStamp();
    if (!ids.empty()) cv_.notify_all();
    return ids.size();
}

std::size_t Frontier::repopulate() {
    std::lock_guard lock(mu_);
    return repopulateLocked();
}

void Frontier::startTaskLocked(HostState& hs, const DownloadTask& task) {
    hs.active += 1;
    hs.lastServed = ++serveSeq_;
    liveTasks_.insert(task.taskId);
    ++stats_.tasksDispatched;
}

std::optional<DownloadTask> Frontier::popEligibleQueueLocked() {
    store::HostId bestHost = 0;
    std::uint64_t bestServed = 0;
    for (auto& [host, hs] : hostStates_) {
        if (hs.waiting.empty() || hs.active >= config_.cap) continue;
        if (bestHost == 0 || hs.lastServed < bestServed) {
            bestHost = host;
            bestServed = hs.lastServed;
        }
    }
    if (bestHost == 0) return std::nullopt;
    HostState& hs = hostStates_[bestHost];
    DownloadTask task = std::move(hs.waiting.front());
    hs.waiting.pop_front();
    --waitingTotal_;
    startTaskLocked(hs, task);
    return task;
}

std::optional<DownloadTask> Frontier::tryAcquireLocked() {
    while (!pool_.empty()) {
        DownloadTask task = std::move(pool_.front());
        pool_.pop_front();
        HostState& hs = hostStates_[task.hostId];
        if (hs.active < config_.cap) {
            startTaskLocked(hs, task);
            return task;
        }
        // Saturated host: the task moves to that host's waiting queue and
        // acquisition continues with the next pool entry.
        hs.waiting.push_back(std::move(task));
        ++waitingTotal_;
    }
    return popEligibleQueueLocked();
}

std::optional<DownloadTask> Frontier::acquire() {
    std::lock_guard lock(mu_);
    if (shutdown_) return std::nullopt;
    if (pool_.size() < config_.poolLow &&
        !(lastRepopEmpty_ && store_.mutationStamp() == lastRepopStamp_))
        repopulateLocked();
    return tryAcquireLocked();
}

std::optional<DownloadTask> Frontier::acquireBlocking() {
    std::unique_lock lock(mu_);
    while (true) {
        if (shutdown_) return std::nullopt;
        if (pool_.size() < config_.poolLow &&
            !(lastRepopEmpty_ && store_.mutationStamp() == lastRepopStamp_))
            repopulateLocked();
        if (auto task = tryAcquireLocked()) return task;
        if (liveTasks_.empty() && pool_.empty() && waitingTotal_ == 0) {
            if (repopulateLocked() == 0) {
                shutdown_ = true;
                cv_.notify_all();
                return std::nullopt;
            }
            continue;
        }
        cv_.wait(lock);
    }
}

std::optional<DownloadTask> Frontier::complete(const DownloadTask& task,
                                               const CompletionInfo& info) {
    std::lock_guard lock(mu_);
    if (liveTasks_.erase(task.taskId) == 0)
        throw std::logic_error("task completed twice or never acquired: " +
                               std::to_string(task.taskId));
    HostState& hs = hostStates_[task.hostId];
    hs.active -= 1;
    assert(hs.active >= 0);

    hs.downloads += 1;
    hs.yieldWindow.push_back(info.newHostsDiscovered);
    hs.yieldSum += info.newHostsDiscovered;
    while (static_cast<int>(hs.yieldWindow.size()) > config_.blackhole.window) {
        hs.yieldSum -= hs.yieldWindow.front();
        hs.yieldWindow.pop_front();
    }

    std::optional<DownloadTask> successor;
    if (!shutdown_) successor = popEligibleQueueLocked();
    cv_.notify_all();
    return successor;
}

bool Frontier::markBlackHoleLockedEval(store::HostId host) {
    if (blackHoles_.count(host)) return false;
    if (store_.undownloadedCountOfHost(host) <= config_.blackhole.maxPathsPerHost) return false;
    auto it = hostStates_.find(host);
    if (it == hostStates_.end()) return false;
    const HostState& hs = it->second;
    if (static_cast<int>(hs.yieldWindow.size()) < config_.blackhole.window) return false;
    double yield = static_cast<double>(hs.yieldSum) / static_cast<double>(hs.yieldWindow.size());
    if (yield >= config_.blackhole.minYield) return false;
    blackHoles_.insert(host);
    ++stats_.blackHolesFlagged;
    return true;
}

bool Frontier::markBlackHole(store::HostId host) {
    std::lock_guard lock(mu_);
    return markBlackHoleLockedEval(host);
}

bool Frontier::isBlackHole(store::HostId host) const {
    std::lock_guard lock(mu_);
    return blackHoles_.count(host) != 0;
}

void Frontier::setStrategy(Strategy strategy) {
    std::lock_guard lock(mu_);
    config_.strategy = strategy;
    rng_.seed(strategy.rngSeed);
    lastRepopEmpty_ = false;
}

Strategy Frontier::strategy() const {
    std::lock_guard lock(mu_);
    return config_.strategy;
}

void Frontier::shutdown() {
    std::lock_guard lock(mu_);
    shutdown_ = true;
    cv_.notify_all();
}

bool Frontier::isShutdown() const {
    std::lock_guard lock(mu_);
    return shutdown_;
}

FrontierStats Frontier::stats() const {
    std::lock_guard lock(mu_);
    return stats_;
}

std::size_t Frontier::poolSize() const {
    std::lock_guard lock(mu_);
    return pool_.size();
}

int Frontier::activeCount(store::HostId host) const {
    std::lock_guard lock(mu_);
    auto it = hostStates_.find(host);
    return it == hostStates_.end() ? 0 : it->second.active;
}

std::size_t Frontier::waitingCount(store::HostId host) const {
    std::lock_guard lock(mu_);
    auto it = hostStates_.find(host);
    return it == hostStates_.end() ? 0 : it->second.waiting.size();
}

std::int64_t Frontier::liveTaskCount() const {
    std::lock_guard lock(mu_);
    return static_cast<std::int64_t>(liveTasks_.size());
}

}  // namespace spider::frontier
