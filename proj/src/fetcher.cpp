#include "spider/fetcher.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "spider/extractor.hpp"

namespace spider::fetch {

std::string canonicalMime(std::string_view mime) {
    auto semi = mime.find(';');
    if (semi != std::string_view::npos) mime = mime.substr(0, semi);
    return toLowerAscii(trimView(mime));
}

bool MimePolicy::isWhitelisted(std::string_view mime) const {
    std::string m = canonicalMime(mime);
    if (m.empty()) return false;
    if (allowTextFamily && m.rfind("text/", 0) == 0) return true;
    if (whitelist.count(m)) return true;
    if (allowStructuredSuffix) {
        auto slash = m.find('/');
        if (slash != std::string::npos) {
            std::string_view subtype = std::string_view(m).substr(slash + 1);
            if (subtype.size() > 4 && subtype.substr(subtype.size() - 4) == "+xml") return true;
            if (subtype.size() > 5 && subtype.substr(subtype.size() - 5) == "+json") return true;
        }
    }
    return false;
}

MimePolicy MimePolicy::fromConfig(const Config& cfg) {
    MimePolicy policy;
    policy.placeholder = cfg.getString("fetch.placeholder", policy.placeholder);
    std::string extra = cfg.getString("fetch.whitelist", "");
    if (!extra.empty()) {
        std::istringstream ss(extra);
        std::string item;
        while (std::getline(ss, item, ','))
            if (auto t = trimView(item); !t.empty()) policy.whitelist.insert(toLowerAscii(t));
    }
    return policy;
}

namespace {

bool validUtf8NoNul(std::string_view bytes) {
    std::size_t i = 0;
    const std::size_t n = bytes.size();
    while (i < n) {
        unsigned char c = static_cast<unsigned char>(bytes[i]);
        if (c == 0) return false;
        if (c < 0x80) { ++i; continue; }
        int len;
        if ((c & 0xE0) == 0xC0) len = 2;
        else if ((c & 0xF0) == 0xE0) len = 3;
        else if ((c & 0xF8) == 0xF0) len = 4;
        else return false;
        if (i + len > n) return false;
        for (int k = 1; k < len; ++k)
            if ((static_cast<unsigned char>(bytes[i + k]) & 0xC0) != 0x80) return false;
        if (len == 2 && c < 0xC2) return false;  // overlong
        i += len;
    }
    return true;
}

bool startsWithIgnoreCase(std::string_view text, std::string_view prefix) {
    if (text.size() < prefix.size()) return false;
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        char a = text[i], b = prefix[i];
        if (a >= 'A' && a <= 'Z') a = static_cast<char>(a - 'A' + 'a');
        if (a != b) return false;
    }
    return true;
}

}  // namespace

std::string sniffMime(std::string_view bytes) {
    if (bytes.empty()) return "application/x-empty";

    static constexpr unsigned char png[] = {0x89, 0x50, 0x4E, 0x47, 0x0D, 0x0A, 0x1A, 0x0A};
    if (bytes.size() >= 8 && std::equal(std::begin(png), std::end(png),
                                        reinterpret_cast<const unsigned char*>(bytes.data())))
        return "image/png";
    if (bytes.size() >= 3 && static_cast<unsigned char>(bytes[0]) == 0xFF &&
        static_cast<unsigned char>(bytes[1]) == 0xD8 && static_cast<unsigned char>(bytes[2]) == 0xFF)
        return "image/jpeg";
    if (bytes.size() >= 6 &&
        (bytes.substr(0, 6) == "GIF87a" || bytes.substr(0, 6) == "GIF89a"))
        return "image/gif";
    if (bytes.size() >= 5 && bytes.substr(0, 5) == "%PDF-") return "application/pdf";
    if (bytes.size() >= 4 && bytes.substr(0, 2) == "PK" &&
        (bytes[2] == 3 || bytes[2] == 5 || bytes[2] == 7))
        return "application/zip";

    std::string_view t = bytes;
    while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.remove_prefix(1);
    if (startsWithIgnoreCase(t, "<!doctype html") || startsWithIgnoreCase(t, "<html"))
        return "text/html";

    if (validUtf8NoNul(bytes)) return "text/plain";
    return "application/octet-stream";
}

namespace {

bool isUriChar(char c) {
    if (std::isalnum(static_cast<unsigned char>(c))) return true;
    switch (c) {
        case '+': case '/': case '=': case '%': case '.': case '_': case '~': case ':':
        case '@': case '!': case '$': case '&': case '*': case ',': case ';': case '-':
        case '?': case '#':
            return true;
        default:
            return false;
    }
}

bool isTextualMime(std::string_view mime) {
    std::string m = canonicalMime(mime);
    if (m.empty()) return true;  // "data:,foo" defaults to text/plain
    if (m.rfind("text/", 0) == 0) return true;
    if (m == "application/json" || m == "application/xml" || m == "application/javascript")
        return true;
    auto slash = m.find('/');
    if (slash != std::string::npos) {
        std::string_view subtype = std::string_view(m).substr(slash + 1);
        if (subtype.size() > 4 && subtype.substr(subtype.size() - 4) == "+xml") return true;
        if (subtype.size() > 5 && subtype.substr(subtype.size() - 5) == "+json") return true;
    }
    return false;
}

}  // namespace

std::string scrubDataUris(std::string_view text, const std::string& placeholder) {
    std::string out;
    out.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        auto pos = text.find("data:", i);
        if (pos == std::string_view::npos) {
            out.append(text.substr(i));
            break;
        }
        out.append(text.substr(i, pos - i));
        // Parse the media type between "data:" and the payload comma.
        std::size_t p = pos + 5;
        std::size_t metaEnd = p;
        while (metaEnd < text.size() && metaEnd - p < 256 && text[metaEnd] != ',' &&
               isUriChar(text[metaEnd]) && text[metaEnd] != '?' && text[metaEnd] != '#')
            ++metaEnd;
        if (metaEnd >= text.size() || text[metaEnd] != ',') {
            // Not a data URI after all; copy the token and move on.
            out.append(text.substr(pos, 5));
            i = pos + 5;
            continue;
        }
        std::string_view meta = text.substr(p, metaEnd - p);
        auto semi = meta.find(';');
        std::string_view mime = semi == std::string_view::npos ? meta : meta.substr(0, semi);
        std::size_t payloadEnd = metaEnd + 1;
        while (payloadEnd < text.size() && isUriChar(text[payloadEnd]) && text[payloadEnd] != '?' &&
               text[payloadEnd] != '#')
            ++payloadEnd;
        if (isTextualMime(mime)) {
            out.append(text.substr(pos, payloadEnd - pos));
        } else {
            out.append(placeholder);
        }
        i = payloadEnd;
    }
    return out;
}

Fetcher::Fetcher(Transport& transport, MimePolicy policy, Clock& clock, FetcherOptions options)
    : transport_(transport), policy_(std::move(policy)), clock_(clock), options_(options) {}

FetchResult Fetcher::fetch(std::int64_t taskId, const Request& request) {
    FetchResult result;
    result.taskId = taskId;

    Request current = request;
    Response resp;
    int hops = 0;
    while (true) {
        int endpoint = static_cast<int>(dispatchCounter_.fetch_add(1) %
                                        std::max(1, transport_.endpointCount()));
        resp = transport_.get(current, endpoint);
        if (resp.transport != TransportStatus::ok) break;
        if (resp.statusCode >= 300 && resp.statusCode < 400 && resp.location && hops < options_.maxRedirects) {
            extract::BaseUrl base;
            auto addr = store::OnionAddress::parse(current.host);
            if (!addr) break;
            base.host = *addr;
            base.subdomain = current.subdomain;
            base.path = current.path;
            auto target = extract::resolveHref(*resp.location, base);
            if (!target || target->host.label != base.host.label) break;  // cross-host: stop here
            current.subdomain = target->subdomain;
            current.path = target->path;
            ++hops;
            continue;
        }
        break;
    }

    result.fetchedAt = clock_.nowMs();
    if (resp.transport == TransportStatus::timeout) {
        result.rejected = true;
        result.reason = RejectReason::timeout;
        return result;
    }
    if (resp.transport == TransportStatus::unreachable) {
        result.rejected = true;
        result.reason = RejectReason::unreachable;
        return result;
    }

    result.statusCode = resp.statusCode;
    if (resp.statusCode < 200 || resp.statusCode >= 300) {
        result.rejected = true;
        result.reason = RejectReason::httpError;
        if (resp.mimeHeader) result.mimeType = canonicalMime(*resp.mimeHeader);
        return result;
    }

    // Stage 1: header whitelist. A disallowed header means the buffer is
    // dropped; only status, type and timestamp survive.
    if (resp.mimeHeader) {
        std::string mime = canonicalMime(*resp.mimeHeader);
        result.mimeType = mime;
        if (!policy_.isWhitelisted(mime)) {
            result.rejected = true;
            result.reason = RejectReason::mimeRejected;
            return result;
        }
    } else {
        // Stage 2: no header, so the full body is inspected.
        std::string sniffed = sniffMime(resp.bytes);
        result.mimeType = sniffed;
        if (!policy_.isWhitelisted(sniffed)) {
            result.rejected = true;
            result.reason = RejectReason::mimeRejected;
            return result;
        }
    }

    result.body = scrubDataUris(resp.bytes, policy_.placeholder);
    return result;
}

const char* rejectReasonName(RejectReason reason) {
    switch (reason) {
        case RejectReason::none: return "none";
        case RejectReason::mimeRejected: return "mimeRejected";
        case RejectReason::httpError: return "httpError";
        case RejectReason::timeout: return "timeout";
        case RejectReason::unreachable: return "unreachable";
    }
    return "?";
}

}  // namespace spider::fetch
