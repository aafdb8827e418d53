#ifndef SPIDER_GRAPHLAB_HPP
#define SPIDER_GRAPHLAB_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spider/store.hpp"

namespace spider::graph {

/// Host-level directed graph: path edges collapsed, self-loops dropped,
/// parallel edges merged. Node indexes are dense [0, n); `hostIds` maps an
/// index back to the originating store host when the graph came from one.
struct HostGraph {
    std::int64_t n = 0;
    std::vector<std::vector<std::int32_t>> out;
    std::vector<std::vector<std::int32_t>> in;
    std::vector<store::HostId> hostIds;

    std::int64_t edgeCount() const;
    void addEdge(std::int32_t from, std::int32_t to);  // dedups, ignores self-loops
    static HostGraph withNodes(std::int64_t n);
};

HostGraph buildHostGraph(const store::Store& store);

enum class Direction { in, out, total };

/// degree -> number of nodes with that degree. `total` counts each
/// neighbour once on the symmetrized graph.
std::map<std::int64_t, std::int64_t> degreeHistogram(const HostGraph& g, Direction direction);

/// Fig. 4 style variant: distinct-incoming-link count -> number of paths.
std::map<std::int64_t, std::int64_t> pathIncomingHistogram(const store::Store& store);

struct PowerLawFit {
    double alpha = 0;
    std::int64_t xmin = 1;
    double ksDistance = 0;
    bool poorFit = false;  // ksDistance > 0.1
    std::int64_t tailCount = 0;
    std::string method = "mle";
};

struct InsufficientData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Discrete maximum-likelihood exponent with the cutoff chosen by the
/// smallest Kolmogorov-Smirnov distance. Needs at least 50 observations at
/// or above the chosen cutoff.
PowerLawFit fitPowerLaw(const std::map<std::int64_t, std::int64_t>& histogram);

/// Hurwitz zeta, exposed for the fit and its tests.
double hurwitzZeta(double s, double q);

struct ComponentResult {
    std::int64_t size = 0;
    std::vector<std::int32_t> members;
};

ComponentResult largestComponent(const HostGraph& g, bool treatAsUndirected = true);

struct RemovalStep {
    std::int32_t removedNode = -1;
    std::int64_t removedDegree = 0;
    std::int64_t lccSize = 0;
};

/// Iteratively deletes the currently highest-degree node (ties by node id)
/// from the symmetrized graph, recording the largest component after each
/// deletion. Stops after maxRemovals, or earlier once the highest degree is
/// not above minDegreeExclusive.
std::vector<RemovalStep> hubRemovalCurve(const HostGraph& g, std::size_t maxRemovals,
                                         std::int64_t minDegreeExclusive = 0);

struct PathMetrics {
    double averagePathLength = 0;
    std::int64_t diameter = 0;
    bool exact = false;  // sampled diameters are lower bounds
    std::int64_t sources = 0;
};

/// BFS over the symmetrized graph, restricted to the largest component.
/// Exact all-pairs up to `exactLimit` nodes, sampled sources beyond that.
PathMetrics pathMetrics(const HostGraph& g, std::int64_t sampleSize, std::uint64_t seed = 0,
                        std::int64_t exactLimit = 20000);

/// ln n / ln ln n, defined for n >= 16.
double expectedScaleFreePathLength(std::int64_t n);

struct HubEntry {
    std::int32_t node = -1;
    store::HostId hostId = 0;
    std::int64_t degree = 0;
};

std::vector<HubEntry> topHubs(const HostGraph& g, std::size_t k, Direction direction);

}  // namespace spider::graph

#endif
