#include "spider/store.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <ostream>

#include <json.hpp>

#include "spider/util.hpp"

namespace spider::store {

namespace {

bool isBase32Char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '2' && c <= '7');
}

std::uint64_t edgeKey(PathId s, PathId t) {
    return (static_cast<std::uint64_t>(s) << 32) | static_cast<std::uint32_t>(t);
}

}  // namespace

bool OnionAddress::validLabel(std::string_view label) {
    if (label.size() != 16 && label.size() != 56) return false;
    return std::all_of(label.begin(), label.end(), isBase32Char);
}

std::optional<OnionAddress> OnionAddress::parse(std::string_view host, std::string* subdomainOut) {
    std::string lower = toLowerAscii(trimView(host));
    std::string_view v = lower;
    if (v.size() > 6 && v.substr(v.size() - 6) == ".onion") v.remove_suffix(6);
    // The onion label is the rightmost dot-separated component; anything to
    // the left is subdomain.
    std::string sub;
    auto lastDot = v.rfind('.');
    std::string_view label = v;
    if (lastDot != std::string_view::npos) {
        sub = std::string(v.substr(0, lastDot));
        label = v.substr(lastDot + 1);
    }
    if (!validLabel(label)) return std::nullopt;
    if (subdomainOut) *subdomainOut = sub;
    else if (!sub.empty()) return std::nullopt;  // caller did not expect a subdomain
    OnionAddress a;
    a.label = std::string(label);
    a.version = label.size() == 16 ? 2 : 3;
    return a;
}

std::size_t Store::PathKeyHash::operator()(const PathKey& k) const {
    std::size_t h = std::hash<HostId>()(k.host);
    h = h * 1099511628211ULL ^ std::hash<std::string>()(k.subdomain);
    h = h * 1099511628211ULL ^ std::hash<std::string>()(k.path);
    return h;
}

HostRecord Store::upsertHostLocked(const OnionAddress& address, bool* isNew) {
    auto it = hostByLabel_.find(address.label);
    if (it != hostByLabel_.end()) {
        if (isNew) *isNew = false;
        return hosts_[static_cast<std::size_t>(it->second - 1)];
    }
    HostRecord rec;
    rec.id = static_cast<HostId>(hosts_.size()) + 1;
    rec.address = address;
    rec.hitCount = 0;
    hosts_.push_back(rec);
    hostByLabel_.emplace(address.label, rec.id);
    ++mutationStamp_;
    if (isNew) *isNew = true;
    return rec;
}

HostRecord Store::upsertHost(const OnionAddress& address) {
    if (!OnionAddress::validLabel(address.label))
        throw ValidationError("malformed onion label: " + address.label);
    std::unique_lock lock(mu_);
    return upsertHostLocked(address, nullptr);
}

std::optional<HostRecord> Store::hostById(HostId id) const {
    std::shared_lock lock(mu_);
    if (id < 1 || id > static_cast<HostId>(hosts_.size())) return std::nullopt;
    return hosts_[static_cast<std::size_t>(id - 1)];
}

std::optional<HostRecord> Store::hostByAddress(const OnionAddress& address) const {
    std::shared_lock lock(mu_);
    auto it = hostByLabel_.find(address.label);
    if (it == hostByLabel_.end()) return std::nullopt;
    return hosts_[static_cast<std::size_t>(it->second - 1)];
}

std::vector<HostRecord> Store::allHosts() const {
    std::shared_lock lock(mu_);
    return hosts_;
}

std::int64_t Store::hostCount() const {
    std::shared_lock lock(mu_);
    return static_cast<std::int64_t>(hosts_.size());
}

PathId Store::upsertPathLocked(const OnionAddress& host, const std::string& subdomain,
                               const std::string& path, int depth, bool* isNew, bool* isNewHost) {
    HostRecord h = upsertHostLocked(host, isNewHost);
    PathKey key{h.id, subdomain, path};
    auto it = pathByKey_.find(key);
    if (it != pathByKey_.end()) {
        if (isNew) *isNew = false;
        PathRecord& existing = paths_[static_cast<std::size_t>(it->second - 1)];
        if (depth < existing.depth) {
            existing.depth = depth;
            ++mutationStamp_;
        }
        return it->second;
    }
    PathRecord rec;
    rec.id = static_cast<PathId>(paths_.size()) + 1;
    rec.hostId = h.id;
    rec.subdomain = subdomain;
    rec.path = path.empty() ? "/" : path;
    rec.depth = depth;
    paths_.push_back(rec);
    pathByKey_.emplace(std::move(key), rec.id);
    candidatesByHost_[h.id].push_back(rec.id);
    ++pathsByHost_[h.id];
    ++mutationStamp_;
    if (isNew) *isNew = true;
    return rec.id;
}

std::pair<PathId, bool> Store::upsertPath(const OnionAddress& host, const std::string& subdomain,
                                          const std::string& path, int depth) {
    if (!OnionAddress::validLabel(host.label))
        throw ValidationError("malformed onion label: " + host.label);
    std::unique_lock lock(mu_);
    bool isNew = false;
    PathId id = upsertPathLocked(host, subdomain, path, depth, &isNew, nullptr);
    return {id, isNew};
}

std::optional<PathRecord> Store::pathById(PathId id) const {
    std::shared_lock lock(mu_);
    if (id < 1 || id > static_cast<PathId>(paths_.size())) return std::nullopt;
    return paths_[static_cast<std::size_t>(id - 1)];
}

std::vector<PathRecord> Store::pathsOfHost(HostId host) const {
    std::shared_lock lock(mu_);
    std::vector<PathRecord> out;
    for (const auto& p : paths_)
        if (p.hostId == host) out.push_back(p);
    return out;
}

std::int64_t Store::pathCount() const {
    std::shared_lock lock(mu_);
    return static_cast<std::int64_t>(paths_.size());
}

void Store::eraseCandidateLocked(PathId id) {
    const PathRecord& p = paths_[static_cast<std::size_t>(id - 1)];
    auto it = candidatesByHost_.find(p.hostId);
    if (it == candidatesByHost_.end()) return;
    auto& vec = it->second;
    vec.erase(std::remove(vec.begin(), vec.end(), id), vec.end());
    if (vec.empty()) candidatesByHost_.erase(it);
}

void Store::setInProgress(PathId id, bool inProgress) {
    std::unique_lock lock(mu_);
    if (id < 1 || id > static_cast<PathId>(paths_.size()))
        throw NotFoundError("unknown path id: " + std::to_string(id));
    PathRecord& p = paths_[static_cast<std::size_t>(id - 1)];
    if (p.inProgress == inProgress) return;
    p.inProgress = inProgress;
    if (inProgress) {
        eraseCandidateLocked(id);
    } else if (!p.lastFinished) {
        candidatesByHost_[p.hostId].push_back(id);  // back into the pool of candidates
    }
    ++mutationStamp_;
}

RecordPageResult Store::recordPage(PathId pathId, std::string_view body,
                                   const std::string& mimeType, int statusCode,
                                   std::int64_t timestamp, const std::vector<OutLink>& outLinks) {
    std::unique_lock lock(mu_);
    if (pathId < 1 || pathId > static_cast<PathId>(paths_.size()))
        throw NotFoundError("unknown path id: " + std::to_string(pathId));
    // paths_ grows inside the loop below, so no reference into it may be
    // held across upsertPathLocked calls.
    const HostId pageHost = paths_[static_cast<std::size_t>(pathId - 1)].hostId;
    const int childDepth = paths_[static_cast<std::size_t>(pathId - 1)].depth + 1;

    RecordPageResult result;

    ContentRecord content;
    content.id = static_cast<ContentId>(contents_.size()) + 1;
    content.pathId = pathId;
    content.body = std::string(body);
    content.mimeType = mimeType;
    content.statusCode = statusCode;
    content.crawlTimestamp = timestamp;
    contents_.push_back(content);
    result.content = content;

    for (const OutLink& link : outLinks) {
        bool isNewPath = false;
        bool isNewHost = false;
        PathId target =
            upsertPathLocked(link.host, link.subdomain, link.path, childDepth, &isNewPath, &isNewHost);
        if (isNewHost) ++result.newHosts;
        if (isNewPath) result.newPaths.push_back(paths_[static_cast<std::size_t>(target - 1)]);
        std::uint64_t key = edgeKey(pathId, target);
        if (edgeSet_.insert(key).second) {
            links_.push_back(LinkEdge{pathId, target});
            PathRecord& tgt = paths_[static_cast<std::size_t>(target - 1)];
            hosts_[static_cast<std::size_t>(tgt.hostId - 1)].hitCount += 1;
            if (incomingHosts_[target].insert(pageHost).second)
                tgt.distinctIncomingCount += 1;
        }
    }

    PathRecord& page = paths_[static_cast<std::size_t>(pathId - 1)];
    bool wasDownloaded = page.lastFinished.has_value();
    page.lastFinished = timestamp;
    if (page.inProgress) {
        page.inProgress = false;
    } else {
        eraseCandidateLocked(pathId);  // direct recordPage without a prior task
    }
    if (!wasDownloaded) {
        ++downloadedPaths_;
        ++downloadedByHost_[page.hostId];
    }
    ++mutationStamp_;
    return result;
}

std::vector<ContentRecord> Store::contentsOfPath(PathId id) const {
    std::shared_lock lock(mu_);
    std::vector<ContentRecord> out;
    for (const auto& c : contents_)
        if (c.pathId == id) out.push_back(c);
    return out;
}

std::int64_t Store::contentCount() const {
    std::shared_lock lock(mu_);
    return static_cast<std::int64_t>(contents_.size());
}

std::int64_t Store::linkCount() const {
    std::shared_lock lock(mu_);
    return static_cast<std::int64_t>(links_.size());
}

void Store::forEachLink(const std::function<void(const LinkEdge&)>& fn) const {
    std::shared_lock lock(mu_);
    for (const auto& e : links_) fn(e);
}

void Store::forEachPath(const std::function<void(const PathRecord&)>& fn) const {
    std::shared_lock lock(mu_);
    for (const auto& p : paths_) fn(p);
}

void Store::forEachContent(const std::function<void(const ContentRecord&)>& fn) const {
    std::shared_lock lock(mu_);
    for (const auto& c : contents_) fn(c);
}

std::vector<PathRecord> Store::candidatePaths(const CandidateFilter& filter,
                                              std::size_t limit) const {
    std::shared_lock lock(mu_);
    std::vector<PathRecord> out;
    // Insertion order across hosts: gather and sort by path id. Candidate
    // lists are per host, so collect then order.
    std::vector<PathId> ids;
    for (const auto& [host, vec] : candidatesByHost_) {
        if (filter.excludeHosts && filter.excludeHosts->count(host)) continue;
        ids.insert(ids.end(), vec.begin(), vec.end());
    }
    std::sort(ids.begin(), ids.end());
    if (ids.size() > limit) ids.resize(limit);
    out.reserve(ids.size());
    for (PathId id : ids) out.push_back(paths_[static_cast<std::size_t>(id - 1)]);
    return out;
}

std::vector<PathId> Store::allCandidateIds(const CandidateFilter& filter) const {
    std::shared_lock lock(mu_);
    std::vector<PathId> ids;
    for (const auto& [host, vec] : candidatesByHost_) {
        if (filter.excludeHosts && filter.excludeHosts->count(host)) continue;
        ids.insert(ids.end(), vec.begin(), vec.end());
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<CandidateInfo> Store::snapshotCandidates(const CandidateFilter& filter) const {
    std::shared_lock lock(mu_);
    std::vector<CandidateInfo> out;
    for (const auto& [host, vec] : candidatesByHost_) {
        if (filter.excludeHosts && filter.excludeHosts->count(host)) continue;
        std::vector<PathId> sorted(vec);
        std::sort(sorted.begin(), sorted.end());
        for (PathId id : sorted) {
            const PathRecord& p = paths_[static_cast<std::size_t>(id - 1)];
            out.push_back({p.id, p.hostId, p.subdomain, p.path, p.depth, p.distinctIncomingCount});
        }
    }
    return out;
}

void Store::markInProgressBatch(const std::vector<PathId>& ids) {
    std::unique_lock lock(mu_);
    for (PathId id : ids) {
        if (id < 1 || id > static_cast<PathId>(paths_.size()))
            throw NotFoundError("unknown path id: " + std::to_string(id));
        PathRecord& p = paths_[static_cast<std::size_t>(id - 1)];
        if (p.inProgress) continue;
        p.inProgress = true;
        eraseCandidateLocked(id);
    }
    ++mutationStamp_;
}

std::int64_t Store::undownloadedCountOfHost(HostId host) const {
    std::shared_lock lock(mu_);
    auto paths = pathsByHost_.find(host);
    if (paths == pathsByHost_.end()) return 0;
    auto dl = downloadedByHost_.find(host);
    return paths->second - (dl == downloadedByHost_.end() ? 0 : dl->second);
}

std::int64_t Store::pathCountOfHost(HostId host) const {
    std::shared_lock lock(mu_);
    auto it = pathsByHost_.find(host);
    return it == pathsByHost_.end() ? 0 : it->second;
}

std::int64_t Store::downloadedCountOfHost(HostId host) const {
    std::shared_lock lock(mu_);
    auto it = downloadedByHost_.find(host);
    return it == downloadedByHost_.end() ? 0 : it->second;
}

std::int64_t Store::downloadedPathCount() const {
    std::shared_lock lock(mu_);
    return downloadedPaths_;
}

std::uint64_t Store::mutationStamp() const {
    std::shared_lock lock(mu_);
    return mutationStamp_;
}

std::vector<CounterMismatch> Store::recountInvariants() const {
    std::shared_lock lock(mu_);
    std::vector<CounterMismatch> report;
    std::unordered_map<HostId, std::int64_t> hits;
    std::unordered_map<PathId, std::unordered_set<HostId>> sources;
    for (const LinkEdge& e : links_) {
        const PathRecord& tgt = paths_[static_cast<std::size_t>(e.targetPathId - 1)];
        const PathRecord& src = paths_[static_cast<std::size_t>(e.sourcePathId - 1)];
        hits[tgt.hostId] += 1;
        sources[e.targetPathId].insert(src.hostId);
    }
    for (const HostRecord& h : hosts_) {
        std::int64_t expect = hits.count(h.id) ? hits[h.id] : 0;
        if (h.hitCount != expect)
            report.push_back({"host.hitCount", h.id, h.hitCount, expect});
    }
    for (const PathRecord& p : paths_) {
        auto it = sources.find(p.id);
        std::int64_t expect = it == sources.end() ? 0 : static_cast<std::int64_t>(it->second.size());
        if (p.distinctIncomingCount != expect)
            report.push_back({"path.distinctIncomingCount", p.id, p.distinctIncomingCount, expect});
    }
    return report;
}

void Store::corruptHitCountForTest(HostId id, std::int64_t value) {
    std::unique_lock lock(mu_);
    hosts_.at(static_cast<std::size_t>(id - 1)).hitCount = value;
}

std::int64_t Store::hostsResponding() const {
    std::shared_lock lock(mu_);
    std::unordered_set<HostId> responding;
    for (const ContentRecord& c : contents_)
        if (c.statusCode >= 200 && c.statusCode < 300)
            responding.insert(paths_[static_cast<std::size_t>(c.pathId - 1)].hostId);
    return static_cast<std::int64_t>(responding.size());
}

std::int64_t Store::hostsUseable() const {
    std::shared_lock lock(mu_);
    std::unordered_set<HostId> useable;
    for (const ContentRecord& c : contents_)
        if (!c.body.empty() && c.statusCode >= 200 && c.statusCode < 300)
            useable.insert(paths_[static_cast<std::size_t>(c.pathId - 1)].hostId);
    return static_cast<std::int64_t>(useable.size());
}

std::int64_t Store::useableContentCount() const {
    std::shared_lock lock(mu_);
    std::int64_t n = 0;
    for (const ContentRecord& c : contents_)
        if (!c.body.empty() && c.statusCode >= 200 && c.statusCode < 300) ++n;
    return n;
}

std::map<int, std::int64_t> Store::hostDepthHistogram() const {
    std::shared_lock lock(mu_);
    std::unordered_map<HostId, int> minDepth;
    for (const PathRecord& p : paths_) {
        auto it = minDepth.find(p.hostId);
        if (it == minDepth.end() || p.depth < it->second) minDepth[p.hostId] = p.depth;
    }
    std::map<int, std::int64_t> hist;
    for (const auto& [host, d] : minDepth) hist[d] += 1;
    return hist;
}

void Store::exportTo(std::ostream& out) const {
    std::shared_lock lock(mu_);
    using nlohmann::ordered_json;
    for (const HostRecord& h : hosts_) {
        ordered_json j{{"t", "host"},
                       {"id", h.id},
                       {"address", {{"label", h.address.label}, {"version", h.address.version}}},
                       {"hitCount", h.hitCount}};
        out << j.dump() << '\n';
    }
    for (const PathRecord& p : paths_) {
        ordered_json j{{"t", "path"},         {"id", p.id},
                       {"hostId", p.hostId},  {"subdomain", p.subdomain},
                       {"path", p.path},      {"depth", p.depth},
                       {"inProgress", p.inProgress}};
        j["lastFinished"] = p.lastFinished ? ordered_json(*p.lastFinished) : ordered_json(nullptr);
        j["distinctIncomingCount"] = p.distinctIncomingCount;
        out << j.dump() << '\n';
    }
    for (const ContentRecord& c : contents_) {
        ordered_json j{{"t", "content"},       {"id", c.id},
                       {"pathId", c.pathId},   {"body", c.body},
                       {"mimeType", c.mimeType}, {"statusCode", c.statusCode},
                       {"crawlTimestamp", c.crawlTimestamp}};
        out << j.dump() << '\n';
    }
    for (const LinkEdge& e : links_) {
        ordered_json j{{"t", "link"}, {"sourcePathId", e.sourcePathId}, {"targetPathId", e.targetPathId}};
        out << j.dump() << '\n';
    }
}

void Store::save(const std::filesystem::path& file) const {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw StoreIoError("cannot write store file: " + file.string());
    exportTo(out);
    if (!out) throw StoreIoError("write failed: " + file.string());
}

void Store::importInto(Store& target, std::istream& in) {
    using nlohmann::json;
    std::unique_lock lock(target.mu_);
    std::string line;
    int lineNo = 0;
    // Records may arrive in any order, so resolve links and contents after
    // the id-carrying rows are in place.
    while (std::getline(in, line)) {
        ++lineNo;
        auto t = trimView(line);
        if (t.empty()) continue;
        json j = json::parse(t, nullptr, false);
        if (j.is_discarded()) throw StoreIoError("bad JSON on line " + std::to_string(lineNo));
        const std::string kind = j.at("t").get<std::string>();
        if (kind == "host") {
            HostRecord h;
            h.id = j.at("id").get<HostId>();
            h.address.label = j.at("address").at("label").get<std::string>();
            h.address.version = j.at("address").at("version").get<int>();
            h.hitCount = j.at("hitCount").get<std::int64_t>();
            if (h.id != static_cast<HostId>(target.hosts_.size()) + 1)
                throw StoreIoError("host ids must be dense and ordered");
            target.hosts_.push_back(h);
            target.hostByLabel_.emplace(h.address.label, h.id);
        } else if (kind == "path") {
            PathRecord p;
            p.id = j.at("id").get<PathId>();
            p.hostId = j.at("hostId").get<HostId>();
            p.subdomain = j.at("subdomain").get<std::string>();
            p.path = j.at("path").get<std::string>();
            p.depth = j.at("depth").get<int>();
            p.inProgress = j.at("inProgress").get<bool>();
            if (!j.at("lastFinished").is_null())
                p.lastFinished = j.at("lastFinished").get<std::int64_t>();
            p.distinctIncomingCount = j.at("distinctIncomingCount").get<std::int64_t>();
            if (p.id != static_cast<PathId>(target.paths_.size()) + 1)
                throw StoreIoError("path ids must be dense and ordered");
            target.paths_.push_back(p);
            target.pathByKey_.emplace(PathKey{p.hostId, p.subdomain, p.path}, p.id);
            ++target.pathsByHost_[p.hostId];
            if (!p.lastFinished && !p.inProgress)
                target.candidatesByHost_[p.hostId].push_back(p.id);
            if (p.lastFinished) {
                ++target.downloadedPaths_;
                ++target.downloadedByHost_[p.hostId];
            }
        } else if (kind == "content") {
            ContentRecord c;
            c.id = j.at("id").get<ContentId>();
            c.pathId = j.at("pathId").get<PathId>();
            c.body = j.at("body").get<std::string>();
            c.mimeType = j.at("mimeType").get<std::string>();
            c.statusCode = j.at("statusCode").get<int>();
            c.crawlTimestamp = j.at("crawlTimestamp").get<std::int64_t>();
            target.contents_.push_back(c);
        } else if (kind == "link") {
            LinkEdge e;
            e.sourcePathId = j.at("sourcePathId").get<PathId>();
            e.targetPathId = j.at("targetPathId").get<PathId>();
            target.links_.push_back(e);
            target.edgeSet_.insert(edgeKey(e.sourcePathId, e.targetPathId));
        } else {
            throw StoreIoError("unknown record kind: " + kind);
        }
    }
    for (const LinkEdge& e : target.links_) {
        if (e.sourcePathId < 1 || e.sourcePathId > static_cast<PathId>(target.paths_.size()) ||
            e.targetPathId < 1 || e.targetPathId > static_cast<PathId>(target.paths_.size()))
            throw StoreIoError("link references unknown path");
        const PathRecord& src = target.paths_[static_cast<std::size_t>(e.sourcePathId - 1)];
        target.incomingHosts_[e.targetPathId].insert(src.hostId);
    }
    ++target.mutationStamp_;
}

void Store::loadInto(Store& target, const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw StoreIoError("cannot open store file: " + file.string());
    importInto(target, in);
}

SeedList parseSeedList(std::string_view text) {
    SeedList out;
    int lineNo = 0;
    for (const std::string& raw : splitLines(text)) {
        ++lineNo;
        std::string_view line(raw);
        auto hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        line = trimView(line);
        if (line.empty()) continue;
        std::string sub;
        auto addr = OnionAddress::parse(line, &sub);
        if (!addr) {
            out.errors.push_back("line " + std::to_string(lineNo) + ": not an onion hostname: " +
                                 std::string(line));
            continue;
        }
        out.entries.push_back({*addr, sub});
    }
    return out;
}

SeedList loadSeedList(const std::filesystem::path& file) {
    return parseSeedList(readFileOrThrow(file));
}

}  // namespace spider::store
