#include "spider/graphlab.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>
#include <thread>
#include <unordered_set>

#include "spider/util.hpp"

namespace spider::graph {

std::int64_t HostGraph::edgeCount() const {
    std::int64_t total = 0;
    for (const auto& v : out) total += static_cast<std::int64_t>(v.size());
    return total;
}

HostGraph HostGraph::withNodes(std::int64_t n) {
    HostGraph g;
    g.n = n;
    g.out.resize(static_cast<std::size_t>(n));
    g.in.resize(static_cast<std::size_t>(n));
    return g;
}

void HostGraph::addEdge(std::int32_t from, std::int32_t to) {
    if (from == to) return;
    auto& o = out[static_cast<std::size_t>(from)];
    if (std::find(o.begin(), o.end(), to) != o.end()) return;
    o.push_back(to);
    in[static_cast<std::size_t>(to)].push_back(from);
}

HostGraph buildHostGraph(const store::Store& s) {
    const std::int64_t n = s.hostCount();
    HostGraph g = HostGraph::withNodes(n);
    g.hostIds.resize(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) g.hostIds[static_cast<std::size_t>(i)] = i + 1;

    // Collapse path-level edges to host level with a dedup set; addEdge's
    // linear scan would be quadratic on high-degree hubs.
    std::vector<store::HostId> pathHost(static_cast<std::size_t>(s.pathCount()) + 1, 0);
    s.forEachPath([&](const store::PathRecord& p) {
        pathHost[static_cast<std::size_t>(p.id)] = p.hostId;
    });
    std::unordered_set<std::uint64_t> seen;
    s.forEachLink([&](const store::LinkEdge& e) {
        store::HostId a = pathHost[static_cast<std::size_t>(e.sourcePathId)];
        store::HostId b = pathHost[static_cast<std::size_t>(e.targetPathId)];
        if (a == b || a == 0 || b == 0) return;
        std::uint64_t key = (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
        if (!seen.insert(key).second) return;
        g.out[static_cast<std::size_t>(a - 1)].push_back(static_cast<std::int32_t>(b - 1));
        g.in[static_cast<std::size_t>(b - 1)].push_back(static_cast<std::int32_t>(a - 1));
    });
    return g;
}

namespace {

std::vector<std::int64_t> totalDegrees(const HostGraph& g) {
    std::vector<std::int64_t> deg(static_cast<std::size_t>(g.n), 0);
    std::vector<std::unordered_set<std::int32_t>> neigh(static_cast<std::size_t>(g.n));
    for (std::int64_t u = 0; u < g.n; ++u) {
        for (std::int32_t v : g.out[static_cast<std::size_t>(u)])
            neigh[static_cast<std::size_t>(u)].insert(v);
        for (std::int32_t v : g.in[static_cast<std::size_t>(u)])
            neigh[static_cast<std::size_t>(u)].insert(v);
    }
    for (std::int64_t u = 0; u < g.n; ++u)
        deg[static_cast<std::size_t>(u)] = static_cast<std::int64_t>(neigh[static_cast<std::size_t>(u)].size());
    return deg;
}

/// Symmetrized adjacency with merged duplicates.
std::vector<std::vector<std::int32_t>> undirectedAdjacency(const HostGraph& g) {
    std::vector<std::vector<std::int32_t>> adj(static_cast<std::size_t>(g.n));
    for (std::int64_t u = 0; u < g.n; ++u) {
        auto& a = adj[static_cast<std::size_t>(u)];
        a.reserve(g.out[static_cast<std::size_t>(u)].size() + g.in[static_cast<std::size_t>(u)].size());
        a.insert(a.end(), g.out[static_cast<std::size_t>(u)].begin(), g.out[static_cast<std::size_t>(u)].end());
        a.insert(a.end(), g.in[static_cast<std::size_t>(u)].begin(), g.in[static_cast<std::size_t>(u)].end());
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
    }
    return adj;
}

}  // namespace

std::map<std::int64_t, std::int64_t> degreeHistogram(const HostGraph& g, Direction direction) {
    std::map<std::int64_t, std::int64_t> hist;
    if (direction == Direction::total) {
        for (std::int64_t d : totalDegrees(g)) hist[d] += 1;
        return hist;
    }
    const auto& adj = direction == Direction::in ? g.in : g.out;
    for (const auto& v : adj) hist[static_cast<std::int64_t>(v.size())] += 1;
    return hist;
}

std::map<std::int64_t, std::int64_t> pathIncomingHistogram(const store::Store& s) {
    std::map<std::int64_t, std::int64_t> hist;
    s.forEachPath([&](const store::PathRecord& p) { hist[p.distinctIncomingCount] += 1; });
    return hist;
}

double hurwitzZeta(double s, double q) {
    // Direct sum plus an Euler-Maclaurin tail. Accurate to well below any
    // tolerance used here for s in (1, 12].
    constexpr int kDirect = 32;
    double sum = 0;
    for (int k = 0; k < kDirect; ++k) sum += std::pow(q + k, -s);
    const double a = q + kDirect;
    sum += std::pow(a, 1 - s) / (s - 1);
    sum += 0.5 * std::pow(a, -s);
    sum += s / 12.0 * std::pow(a, -s - 1);
    sum -= s * (s + 1) * (s + 2) / 720.0 * std::pow(a, -s - 3);
    return sum;
}

namespace {

struct TailData {
    std::vector<std::int64_t> values;  // distinct degrees >= xmin, ascending
    std::vector<std::int64_t> counts;
    std::int64_t total = 0;
    double sumLog = 0;
};

TailData tailAt(const std::map<std::int64_t, std::int64_t>& hist, std::int64_t xmin) {
    TailData t;
    for (const auto& [deg, cnt] : hist) {
        if (deg < xmin) continue;
        t.values.push_back(deg);
        t.counts.push_back(cnt);
        t.total += cnt;
        t.sumLog += static_cast<double>(cnt) * std::log(static_cast<double>(deg));
    }
    return t;
}

double mleAlpha(const TailData& t, std::int64_t xmin) {
    // Maximize -alpha * sumLog - total * ln zeta(alpha, xmin) by golden
    // section; the log-likelihood is unimodal in alpha.
    auto negLogLik = [&](double alpha) {
        return alpha * t.sumLog +
               static_cast<double>(t.total) * std::log(hurwitzZeta(alpha, static_cast<double>(xmin)));
    };
    double lo = 1.0001, hi = 12.0;
    const double phi = (std::sqrt(5.0) - 1) / 2;
    double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
    double f1 = negLogLik(x1), f2 = negLogLik(x2);
    for (int it = 0; it < 90; ++it) {
        if (f1 < f2) {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = negLogLik(x1);
        } else {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = negLogLik(x2);
        }
    }
    return (lo + hi) / 2;
}

double ksDistance(const TailData& t, std::int64_t xmin, double alpha) {
    const double z = hurwitzZeta(alpha, static_cast<double>(xmin));
    double worst = 0;
    double empCum = 0;
    double modelCum = 0;
    std::int64_t prev = xmin;
    for (std::size_t i = 0; i < t.values.size(); ++i) {
        // advance the model CDF over degrees without observations
        for (std::int64_t d = prev; d <= t.values[i]; ++d)
            modelCum += std::pow(static_cast<double>(d), -alpha) / z;
        prev = t.values[i] + 1;
        empCum += static_cast<double>(t.counts[i]) / static_cast<double>(t.total);
        worst = std::max(worst, std::abs(empCum - modelCum));
        if (t.values[i] - xmin > 200000) break;  // degenerate spread guard
    }
    return worst;
}

}  // namespace

PowerLawFit fitPowerLaw(const std::map<std::int64_t, std::int64_t>& histogram) {
    std::map<std::int64_t, std::int64_t> hist;
    for (const auto& [deg, cnt] : histogram)
        if (deg >= 1 && cnt > 0) hist[deg] = cnt;  // degree-zero nodes carry no information
    if (hist.empty()) throw InsufficientData("empty degree histogram");

    constexpr std::int64_t kMinTail = 50;
    std::vector<std::int64_t> candidates;
    for (const auto& [deg, cnt] : hist) candidates.push_back(deg);
    if (candidates.size() > 150) candidates.resize(150);  // xmin candidates: smallest degrees

    std::optional<PowerLawFit> best;
    for (std::int64_t xmin : candidates) {
        TailData tail = tailAt(hist, xmin);
        if (tail.total < kMinTail) continue;
        double alpha = mleAlpha(tail, xmin);
        double ks = ksDistance(tail, xmin, alpha);
        if (!best || ks < best->ksDistance) {
            PowerLawFit fit;
            fit.alpha = alpha;
            fit.xmin = xmin;
            fit.ksDistance = ks;
            fit.tailCount = tail.total;
            best = fit;
        }
    }
    if (!best) throw InsufficientData("fewer than 50 observations above any cutoff");
    best->poorFit = best->ksDistance > 0.1;
    return *best;
}

ComponentResult largestComponent(const HostGraph& g, bool treatAsUndirected) {
    ComponentResult result;
    if (g.n == 0) return result;
    // The paper's reachability notion is undirected; a directed variant
    // would be strongly-connected components, which nothing here needs.
    (void)treatAsUndirected;
    auto adj = undirectedAdjacency(g);
    std::vector<std::int32_t> comp(static_cast<std::size_t>(g.n), -1);
    std::int32_t nComp = 0;
    std::vector<std::int64_t> sizes;
    std::vector<std::int32_t> stack;
    for (std::int32_t s = 0; s < g.n; ++s) {
        if (comp[static_cast<std::size_t>(s)] != -1) continue;
        std::int64_t size = 0;
        stack.push_back(s);
        comp[static_cast<std::size_t>(s)] = nComp;
        while (!stack.empty()) {
            std::int32_t u = stack.back();
            stack.pop_back();
            ++size;
            for (std::int32_t v : adj[static_cast<std::size_t>(u)]) {
                if (comp[static_cast<std::size_t>(v)] == -1) {
                    comp[static_cast<std::size_t>(v)] = nComp;
                    stack.push_back(v);
                }
            }
        }
        sizes.push_back(size);
        ++nComp;
    }
    std::int32_t bestComp = static_cast<std::int32_t>(
        std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    result.size = sizes[static_cast<std::size_t>(bestComp)];
    result.members.reserve(static_cast<std::size_t>(result.size));
    for (std::int32_t u = 0; u < g.n; ++u)
        if (comp[static_cast<std::size_t>(u)] == bestComp) result.members.push_back(u);
    return result;
}

std::vector<RemovalStep> hubRemovalCurve(const HostGraph& g, std::size_t maxRemovals,
                                         std::int64_t minDegreeExclusive) {
    auto adj = undirectedAdjacency(g);
    std::vector<bool> removed(static_cast<std::size_t>(g.n), false);
    std::vector<std::int64_t> degree(static_cast<std::size_t>(g.n), 0);
    for (std::int64_t u = 0; u < g.n; ++u)
        degree[static_cast<std::size_t>(u)] = static_cast<std::int64_t>(adj[static_cast<std::size_t>(u)].size());

    std::vector<RemovalStep> curve;
    for (std::size_t step = 0; step < maxRemovals; ++step) {
        std::int32_t hub = -1;
        std::int64_t best = -1;
        for (std::int32_t u = 0; u < g.n; ++u) {
            if (removed[static_cast<std::size_t>(u)]) continue;
            if (degree[static_cast<std::size_t>(u)] > best) {
                best = degree[static_cast<std::size_t>(u)];
                hub = u;
            }
        }
        if (hub < 0 || best <= minDegreeExclusive) break;

        removed[static_cast<std::size_t>(hub)] = true;
        for (std::int32_t v : adj[static_cast<std::size_t>(hub)])
            if (!removed[static_cast<std::size_t>(v)]) degree[static_cast<std::size_t>(v)] -= 1;
        degree[static_cast<std::size_t>(hub)] = 0;

        // BFS over the survivors for the largest component size.
        std::vector<std::int8_t> seen(static_cast<std::size_t>(g.n), 0);
        std::int64_t lcc = 0;
        std::vector<std::int32_t> stack;
        for (std::int32_t s = 0; s < g.n; ++s) {
            if (removed[static_cast<std::size_t>(s)] || seen[static_cast<std::size_t>(s)]) continue;
            std::int64_t size = 0;
            stack.push_back(s);
            seen[static_cast<std::size_t>(s)] = 1;
            while (!stack.empty()) {
                std::int32_t u = stack.back();
                stack.pop_back();
                ++size;
                for (std::int32_t v : adj[static_cast<std::size_t>(u)]) {
                    if (removed[static_cast<std::size_t>(v)] || seen[static_cast<std::size_t>(v)]) continue;
                    seen[static_cast<std::size_t>(v)] = 1;
                    stack.push_back(v);
                }
            }
            lcc = std::max(lcc, size);
        }
        RemovalStep s;
        s.removedNode = hub;
        s.removedDegree = best;
        s.lccSize = lcc;
        curve.push_back(s);
    }
    return curve;
}

PathMetrics pathMetrics(const HostGraph& g, std::int64_t sampleSize, std::uint64_t seed,
                        std::int64_t exactLimit) {
    if (g.n == 0) throw std::invalid_argument("path metrics of an empty graph");
    auto lcc = largestComponent(g, true);
    auto adj = undirectedAdjacency(g);

    PathMetrics metrics;
    metrics.exact = lcc.size <= exactLimit;
    std::vector<std::int32_t> sources;
    if (metrics.exact) {
        sources = lcc.members;
    } else {
        std::vector<std::int32_t> pool = lcc.members;
        Rng rng(seed);
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(static_cast<std::size_t>(std::min<std::int64_t>(sampleSize, lcc.size)));
        sources = pool;
    }
    metrics.sources = static_cast<std::int64_t>(sources.size());

    std::vector<std::int8_t> inLcc(static_cast<std::size_t>(g.n), 0);
    for (std::int32_t u : lcc.members) inLcc[static_cast<std::size_t>(u)] = 1;

    const unsigned threads = std::max(1u, std::min(std::thread::hardware_concurrency(), 8u));
    std::vector<double> sums(threads, 0);
    std::vector<std::int64_t> counts(threads, 0);
    std::vector<std::int64_t> eccs(threads, 0);

    auto worker = [&](unsigned tid) {
        std::vector<std::int32_t> dist(static_cast<std::size_t>(g.n));
        std::vector<std::int32_t> queue(static_cast<std::size_t>(lcc.size));
        for (std::size_t si = tid; si < sources.size(); si += threads) {
            std::int32_t src = sources[si];
            std::fill(dist.begin(), dist.end(), -1);
            std::size_t head = 0, tail = 0;
            dist[static_cast<std::size_t>(src)] = 0;
            queue[tail++] = src;
            std::int64_t ecc = 0;
            while (head < tail) {
                std::int32_t u = queue[head++];
                std::int32_t du = dist[static_cast<std::size_t>(u)];
                ecc = std::max<std::int64_t>(ecc, du);
                for (std::int32_t v : adj[static_cast<std::size_t>(u)]) {
                    if (!inLcc[static_cast<std::size_t>(v)]) continue;
                    if (dist[static_cast<std::size_t>(v)] != -1) continue;
                    dist[static_cast<std::size_t>(v)] = du + 1;
                    queue[tail++] = v;
                }
            }
            for (std::size_t k = 0; k < tail; ++k) {
                std::int32_t d = dist[static_cast<std::size_t>(queue[k])];
                if (d > 0) {
                    sums[tid] += d;
                    counts[tid] += 1;
                }
            }
            eccs[tid] = std::max(eccs[tid], ecc);
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker, t);
    worker(0);
    for (auto& t : pool) t.join();

    double sum = std::accumulate(sums.begin(), sums.end(), 0.0);
    std::int64_t count = std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
    metrics.averagePathLength = count > 0 ? sum / static_cast<double>(count) : 0;
    metrics.diameter = *std::max_element(eccs.begin(), eccs.end());
    return metrics;
}

double expectedScaleFreePathLength(std::int64_t n) {
    if (n < 16) throw std::domain_error("ln ln n is not positive below n = 16");
    double ln = std::log(static_cast<double>(n));
    return ln / std::log(ln);
}

std::vector<HubEntry> topHubs(const HostGraph& g, std::size_t k, Direction direction) {
    std::vector<HubEntry> entries(static_cast<std::size_t>(g.n));
    std::vector<std::int64_t> degree;
    if (direction == Direction::total) {
        degree = totalDegrees(g);
    } else {
        const auto& adj = direction == Direction::in ? g.in : g.out;
        degree.resize(static_cast<std::size_t>(g.n));
        for (std::int64_t u = 0; u < g.n; ++u)
            degree[static_cast<std::size_t>(u)] = static_cast<std::int64_t>(adj[static_cast<std::size_t>(u)].size());
    }
    for (std::int32_t u = 0; u < g.n; ++u) {
        entries[static_cast<std::size_t>(u)].node = u;
        entries[static_cast<std::size_t>(u)].hostId =
            g.hostIds.empty() ? u + 1 : g.hostIds[static_cast<std::size_t>(u)];
        entries[static_cast<std::size_t>(u)].degree = degree[static_cast<std::size_t>(u)];
    }
    std::sort(entries.begin(), entries.end(), [](const HubEntry& a, const HubEntry& b) {
        if (a.degree != b.degree) return a.degree > b.degree;
        return a.node < b.node;
    });
    if (entries.size() > k) entries.resize(k);
    return entries;
}

}  // namespace spider::graph
