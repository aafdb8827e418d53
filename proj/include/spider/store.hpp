#ifndef SPIDER_STORE_HPP
#define SPIDER_STORE_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace spider::store {

using HostId = std::int64_t;
using PathId = std::int64_t;
using ContentId = std::int64_t;

/// Identity of a hidden service: the base32 label of a `<label>.onion`
/// hostname. 16 characters for version 2, 56 for version 3. Canonical form
/// is lowercase; comparison is case-insensitive by construction.
struct OnionAddress {
    std::string label;
    int version = 2;

    /// Accepts "label", "label.onion" or "sub.label.onion" in any case.
    /// When a subdomain prefix is present it is returned separately.
    static std::optional<OnionAddress> parse(std::string_view host,
                                             std::string* subdomainOut = nullptr);
    static bool validLabel(std::string_view label);

    std::string hostname() const { return label + ".onion"; }
    bool operator==(const OnionAddress& o) const { return label == o.label; }
};

struct HostRecord {
    HostId id = 0;
    OnionAddress address;
    std::int64_t hitCount = 0;  // stored link edges whose target is on this host
};

struct PathRecord {
    PathId id = 0;
    HostId hostId = 0;
    std::string subdomain;
    std::string path;  // begins with "/"
    int depth = 0;     // hops from seed at first discovery (min over discoveries)
    bool inProgress = false;
    std::optional<std::int64_t> lastFinished;
    std::int64_t distinctIncomingCount = 0;  // distinct source hosts linking here
};

struct ContentRecord {
    ContentId id = 0;
    PathId pathId = 0;
    std::string body;  // empty when the download was rejected or failed
    std::string mimeType;
    int statusCode = 0;
    std::int64_t crawlTimestamp = 0;
};

struct LinkEdge {
    PathId sourcePathId = 0;
    PathId targetPathId = 0;
};

struct OutLink {
    OnionAddress host;
    std::string subdomain;
    std::string path;
};

struct RecordPageResult {
    ContentRecord content;
    std::vector<PathRecord> newPaths;
    int newHosts = 0;  // hosts first seen through this page's out-links
};

struct CandidateFilter {
    /// Hosts to skip entirely (black holes, hosts with queued work).
    const std::unordered_set<HostId>* excludeHosts = nullptr;
};

/// Copy of the fields the prioritization strategies need, taken under one
/// store lock.
struct CandidateInfo {
    PathId id = 0;
    HostId hostId = 0;
    std::string subdomain;
    std::string path;
    int depth = 0;
    std::int64_t distinctIncomingCount = 0;
};

struct CounterMismatch {
    std::string table;  // "host.hitCount" or "path.distinctIncomingCount"
    std::int64_t rowId = 0;
    std::int64_t stored = 0;
    std::int64_t recomputed = 0;
};

struct NotFoundError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct StoreIoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Relational-style store of hidden services, paths, downloaded contents and
/// the hyperlink graph. All tables live in memory; `save`/`load` move the
/// whole store through the newline-delimited JSON export format, which is
/// also the on-disk database file.
///
/// Concurrency: mutations are serialized behind an internal writer lock;
/// reads may run concurrently with reads. Counter updates inside recordPage
/// are atomic with the edge insertion.
class Store {
public:
    Store() = default;
    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    // -- hosts ------------------------------------------------------------
    HostRecord upsertHost(const OnionAddress& address);
    std::optional<HostRecord> hostById(HostId id) const;
    std::optional<HostRecord> hostByAddress(const OnionAddress& address) const;
    std::vector<HostRecord> allHosts() const;
    std::int64_t hostCount() const;

    // -- paths ------------------------------------------------------------
    /// Registers a path (creating its host if needed). Existing paths keep
    /// their identity; depth is lowered to `depth` if the new sighting is
    /// shallower. Returns the path id and whether the row is new.
    std::pair<PathId, bool> upsertPath(const OnionAddress& host, const std::string& subdomain,
                                       const std::string& path, int depth);
    std::optional<PathRecord> pathById(PathId id) const;
    std::vector<PathRecord> pathsOfHost(HostId host) const;
    std::int64_t pathCount() const;
    void setInProgress(PathId id, bool inProgress);

    // -- crawl results ----------------------------------------------------
    RecordPageResult recordPage(PathId pathId, std::string_view body, const std::string& mimeType,
                                int statusCode, std::int64_t timestamp,
                                const std::vector<OutLink>& outLinks);

    std::vector<ContentRecord> contentsOfPath(PathId id) const;
    std::int64_t contentCount() const;
    std::int64_t linkCount() const;
    void forEachLink(const std::function<void(const LinkEdge&)>& fn) const;
    void forEachPath(const std::function<void(const PathRecord&)>& fn) const;
    void forEachContent(const std::function<void(const ContentRecord&)>& fn) const;

    // -- frontier queries ---------------------------------------------------
    /// Paths never downloaded and not in progress, in insertion order,
    /// skipping excluded hosts. Up to `limit` rows.
    std::vector<PathRecord> candidatePaths(const CandidateFilter& filter, std::size_t limit) const;
    /// Ids of every eligible path (for the randomized strategy).
    std::vector<PathId> allCandidateIds(const CandidateFilter& filter) const;
    /// Every eligible path with its priority fields, ordered by
    /// (hostId, pathId). One lock acquisition for the whole snapshot.
    std::vector<CandidateInfo> snapshotCandidates(const CandidateFilter& filter) const;
    void markInProgressBatch(const std::vector<PathId>& ids);
    /// Paths of the host that were never downloaded, whether or not they are
    /// currently queued for download.
    std::int64_t undownloadedCountOfHost(HostId host) const;
    std::int64_t pathCountOfHost(HostId host) const;
    std::int64_t downloadedCountOfHost(HostId host) const;
    std::int64_t downloadedPathCount() const;
    /// Monotone counter bumped by every mutation; lets callers skip
    /// recomputing candidate sets when nothing changed.
    std::uint64_t mutationStamp() const;

    // -- integrity ----------------------------------------------------------
    /// Recomputes every denormalized counter from the raw edge table and
    /// reports mismatches. Empty report on a consistent store.
    std::vector<CounterMismatch> recountInvariants() const;
    /// Test hook: overwrite a stored counter to exercise the recount report.
    void corruptHitCountForTest(HostId id, std::int64_t value);

    // -- stats ----------------------------------------------------------------
    std::int64_t hostsResponding() const;  // hosts with at least one 2xx content row
    std::int64_t hostsUseable() const;     // hosts with at least one non-empty body
    std::int64_t useableContentCount() const;
    /// depth -> number of hosts first discovered at that depth.
    std::map<int, std::int64_t> hostDepthHistogram() const;

    // -- persistence --------------------------------------------------------
    /// One JSON object per line, tagged {"t":"host"|"path"|"content"|"link"}.
    void exportTo(std::ostream& out) const;
    void save(const std::filesystem::path& file) const;
    static void importInto(Store& target, std::istream& in);
    static void loadInto(Store& target, const std::filesystem::path& file);

private:
    struct PathKey {
        HostId host;
        std::string subdomain;
        std::string path;
        bool operator==(const PathKey& o) const {
            return host == o.host && subdomain == o.subdomain && path == o.path;
        }
    };
    struct PathKeyHash {
        std::size_t operator()(const PathKey& k) const;
    };

    PathId upsertPathLocked(const OnionAddress& host, const std::string& subdomain,
                            const std::string& path, int depth, bool* isNew, bool* isNewHost);
    HostRecord upsertHostLocked(const OnionAddress& address, bool* isNew);
    void eraseCandidateLocked(PathId id);

    mutable std::shared_mutex mu_;
    std::vector<HostRecord> hosts_;                      // id == index + 1
    std::vector<PathRecord> paths_;                      // id == index + 1
    std::vector<ContentRecord> contents_;                // id == index + 1
    std::vector<LinkEdge> links_;
    std::unordered_map<std::string, HostId> hostByLabel_;
    std::unordered_map<PathKey, PathId, PathKeyHash> pathByKey_;
    std::unordered_set<std::uint64_t> edgeSet_;          // collapsed (source,target) pairs
    std::unordered_map<PathId, std::unordered_set<HostId>> incomingHosts_;
    std::map<HostId, std::vector<PathId>> candidatesByHost_;  // eligible = !downloaded && !inProgress
    std::unordered_map<HostId, std::int64_t> pathsByHost_;
    std::unordered_map<HostId, std::int64_t> downloadedByHost_;
    std::int64_t downloadedPaths_ = 0;
    std::uint64_t mutationStamp_ = 0;
};

/// Seed list: one onion hostname per line, `#` comments allowed.
/// Invalid lines are reported in `errors` and skipped.
struct SeedList {
    struct Entry {
        OnionAddress address;
        std::string subdomain;
    };
    std::vector<Entry> entries;
    std::vector<std::string> errors;
};
SeedList loadSeedList(const std::filesystem::path& file);
SeedList parseSeedList(std::string_view text);

}  // namespace spider::store

#endif
