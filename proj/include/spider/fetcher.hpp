#ifndef SPIDER_FETCHER_HPP
#define SPIDER_FETCHER_HPP

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "spider/util.hpp"

namespace spider::fetch {

struct Request {
    std::string host;  // "<label>.onion"
    std::string subdomain;
    std::string path;
};

enum class TransportStatus { ok, timeout, unreachable };

struct Response {
    TransportStatus transport = TransportStatus::ok;
    int statusCode = 0;
    std::optional<std::string> mimeHeader;  // servers may omit the Content-Type
    std::optional<std::string> location;    // redirect target, when 3xx
    std::string bytes;
};

/// A route into the network. Endpoint indexes are interchangeable circuits;
/// the dispatcher spreads requests across them round-robin.
class Transport {
public:
    virtual ~Transport() = default;
    virtual int endpointCount() const = 0;
    virtual Response get(const Request& request, int endpointIndex) = 0;
};

/// Textual whitelist. Anything else is flushed before it can be stored.
struct MimePolicy {
    std::set<std::string> whitelist = {"application/json",    "application/xml",
                                       "application/javascript", "application/rss+xml",
                                       "application/atom+xml"};
    bool allowTextFamily = true;        // any text/*
    bool allowStructuredSuffix = true;  // any +xml / +json subtype
    std::string placeholder = "[SCRUBBED]";

    bool isWhitelisted(std::string_view mime) const;
    static MimePolicy fromConfig(const Config& cfg);
};

/// Strips any "; charset=..." style parameters and lowercases.
std::string canonicalMime(std::string_view mime);

/// Content inspection for responses without a Content-Type header.
/// Recognizes the common binary magic numbers, HTML preambles, and falls
/// back to text/plain for clean UTF-8.
std::string sniffMime(std::string_view bytes);

/// Replaces every data URI of a non-textual media type by the placeholder.
/// Textual data URIs pass through untouched. Idempotent.
std::string scrubDataUris(std::string_view text, const std::string& placeholder);

enum class RejectReason { none, mimeRejected, httpError, timeout, unreachable };

struct FetchResult {
    std::int64_t taskId = 0;
    int statusCode = 0;
    std::string mimeType;
    std::optional<std::string> body;
    bool rejected = false;
    RejectReason reason = RejectReason::none;
    std::int64_t fetchedAt = 0;
};

struct FetcherOptions {
    int maxRedirects = 5;
};

/// Issues one download through the next round-robin endpoint and applies the
/// staged MIME filter. Same-host redirects are followed up to the limit.
class Fetcher {
public:
    Fetcher(Transport& transport, MimePolicy policy, Clock& clock, FetcherOptions options = {});

    FetchResult fetch(std::int64_t taskId, const Request& request);

    std::int64_t dispatchCount() const { return dispatchCounter_.load(); }

private:
    Transport& transport_;
    MimePolicy policy_;
    Clock& clock_;
    FetcherOptions options_;
    std::atomic<std::int64_t> dispatchCounter_{0};
};

const char* rejectReasonName(RejectReason reason);

}  // namespace spider::fetch

#endif
