#include "spider/extractor.hpp"

#include <algorithm>
#include <cctype>

#include "spider/util.hpp"

namespace spider::extract {

namespace {

constexpr std::size_t kMaxSubdomainScan = 200;  // DNS hostnames cap at 255 bytes
constexpr std::size_t kMaxPathScan = 2048;

bool isBase32(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '2' && c <= '7');
}

bool isHostChar(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
}

bool isPathTerminator(char c) {
    if (static_cast<unsigned char>(c) < 0x21 || static_cast<unsigned char>(c) >= 0x80) return true;
    switch (c) {
        case '"': case '\'': case '<': case '>': case '`':
        case '(': case ')': case '[': case ']': case '{': case '}':
        case '|': case '\\': case '^':
            return true;
        default:
            return false;
    }
}

std::string decodeBasicEntities(std::string_view s) {
    if (s.find('&') == std::string_view::npos) return std::string(s);
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '&') {
            if (s.substr(i, 5) == "&amp;") { out += '&'; i += 5; continue; }
            if (s.substr(i, 4) == "&lt;") { out += '<'; i += 4; continue; }
            if (s.substr(i, 4) == "&gt;") { out += '>'; i += 4; continue; }
            if (s.substr(i, 6) == "&quot;") { out += '"'; i += 6; continue; }
            if (s.substr(i, 5) == "&#39;") { out += '\''; i += 5; continue; }
        }
        out += s[i++];
    }
    return out;
}

}  // namespace

std::string normalizePath(std::string_view raw) {
    // Fragment goes away entirely; the query survives untouched.
    auto hash = raw.find('#');
    if (hash != std::string_view::npos) raw = raw.substr(0, hash);
    std::string_view query;
    auto qm = raw.find('?');
    if (qm != std::string_view::npos) {
        query = raw.substr(qm);
        raw = raw.substr(0, qm);
    }
    bool trailingSlash = !raw.empty() && raw.back() == '/';

    std::vector<std::string_view> segs;
    std::size_t i = 0;
    while (i <= raw.size()) {
        auto slash = raw.find('/', i);
        std::string_view seg =
            slash == std::string_view::npos ? raw.substr(i) : raw.substr(i, slash - i);
        if (seg == "..") {
            if (!segs.empty()) segs.pop_back();
        } else if (!seg.empty() && seg != ".") {
            segs.push_back(seg);
        }
        if (slash == std::string_view::npos) break;
        i = slash + 1;
    }

    std::string out = "/";
    for (std::size_t k = 0; k < segs.size(); ++k) {
        out.append(segs[k]);
        if (k + 1 < segs.size()) out += '/';
    }
    if (trailingSlash && !segs.empty()) out += '/';
    out.append(query);
    return out;
}

namespace {

/// Parses "host[:port]" (optionally with userinfo) into an onion address.
std::optional<ExtractedLink> linkFromHostAndPath(std::string_view hostPort, std::string_view path,
                                                 LinkSource source) {
    auto at = hostPort.rfind('@');
    if (at != std::string_view::npos) hostPort = hostPort.substr(at + 1);
    auto colon = hostPort.find(':');
    if (colon != std::string_view::npos) hostPort = hostPort.substr(0, colon);
    std::string sub;
    auto addr = store::OnionAddress::parse(hostPort, &sub);
    if (!addr) return std::nullopt;
    ExtractedLink link;
    link.host = *addr;
    link.subdomain = sub;
    link.path = normalizePath(path);
    link.source = source;
    return link;
}

}  // namespace

std::optional<ExtractedLink> resolveHref(std::string_view rawHref, const BaseUrl& base) {
    std::string href = decodeBasicEntities(trimView(rawHref));
    if (href.empty()) return std::nullopt;

    // Explicit scheme?
    std::size_t schemeEnd = 0;
    while (schemeEnd < href.size() &&
           (std::isalnum(static_cast<unsigned char>(href[schemeEnd])) || href[schemeEnd] == '+' ||
            href[schemeEnd] == '-' || href[schemeEnd] == '.'))
        ++schemeEnd;
    bool hasScheme = schemeEnd > 0 && schemeEnd < href.size() && href[schemeEnd] == ':';

    if (hasScheme) {
        std::string scheme = toLowerAscii(std::string_view(href).substr(0, schemeEnd));
        if (scheme != "http" && scheme != "https") return std::nullopt;
        std::string_view rest = std::string_view(href).substr(schemeEnd + 1);
        if (rest.substr(0, 2) != "//") return std::nullopt;
        rest.remove_prefix(2);
        auto end = rest.find_first_of("/?#");
        std::string_view hostPort = rest.substr(0, end);
        std::string_view path = end == std::string_view::npos ? std::string_view{} : rest.substr(end);
        return linkFromHostAndPath(hostPort, path, LinkSource::anchor);
    }
    if (href.size() >= 2 && href[0] == '/' && href[1] == '/') {
        std::string_view rest = std::string_view(href).substr(2);
        auto end = rest.find_first_of("/?#");
        std::string_view hostPort = rest.substr(0, end);
        std::string_view path = end == std::string_view::npos ? std::string_view{} : rest.substr(end);
        return linkFromHostAndPath(hostPort, path, LinkSource::anchor);
    }

    ExtractedLink link;
    link.host = base.host;
    link.subdomain = base.subdomain;
    link.source = LinkSource::anchor;
    if (href[0] == '/') {
        link.path = normalizePath(href);
        return link;
    }
    std::string_view basePath = base.path;
    auto baseQ = basePath.find('?');
    if (baseQ != std::string_view::npos) basePath = basePath.substr(0, baseQ);
    if (href[0] == '?') {
        link.path = normalizePath(std::string(basePath) + href);
        return link;
    }
    if (href[0] == '#') {
        link.path = normalizePath(basePath);
        return link;
    }
    auto lastSlash = basePath.rfind('/');
    std::string dir = lastSlash == std::string_view::npos
                          ? std::string("/")
                          : std::string(basePath.substr(0, lastSlash + 1));
    link.path = normalizePath(dir + href);
    return link;
}

std::vector<ExtractedLink> extractAnchors(std::string_view html, const BaseUrl& base) {
    std::vector<ExtractedLink> out;
    std::size_t i = 0;
    const std::size_t n = html.size();
    while (i < n) {
        auto lt = html.find('<', i);
        if (lt == std::string_view::npos) break;
        std::size_t p = lt + 1;
        if (p >= n) break;
        char c = html[p];
        if (c != 'a' && c != 'A') {
            i = lt + 1;
            continue;
        }
        ++p;
        if (p < n && !std::isspace(static_cast<unsigned char>(html[p])) && html[p] != '>') {
            i = lt + 1;  // some other tag, e.g. <abbr>
            continue;
        }
        // Walk the attribute list of this <a ...> tag.
        while (p < n && html[p] != '>') {
            while (p < n && (std::isspace(static_cast<unsigned char>(html[p])) || html[p] == '/'))
                ++p;
            if (p >= n || html[p] == '>') break;
            std::size_t nameStart = p;
            while (p < n && html[p] != '=' && html[p] != '>' &&
                   !std::isspace(static_cast<unsigned char>(html[p])))
                ++p;
            std::string name = toLowerAscii(html.substr(nameStart, p - nameStart));
            while (p < n && std::isspace(static_cast<unsigned char>(html[p]))) ++p;
            std::string_view value;
            if (p < n && html[p] == '=') {
                ++p;
                while (p < n && std::isspace(static_cast<unsigned char>(html[p]))) ++p;
                if (p < n && (html[p] == '"' || html[p] == '\'')) {
                    char quote = html[p++];
                    std::size_t vStart = p;
                    while (p < n && html[p] != quote) ++p;
                    value = html.substr(vStart, p - vStart);
                    if (p < n) ++p;
                } else {
                    std::size_t vStart = p;
                    while (p < n && html[p] != '>' &&
                           !std::isspace(static_cast<unsigned char>(html[p])))
                        ++p;
                    value = html.substr(vStart, p - vStart);
                }
            }
            if (name == "href" && !value.empty()) {
                if (auto link = resolveHref(value, base)) out.push_back(std::move(*link));
            }
        }
        i = p < n ? p + 1 : n;
    }
    return out;
}

std::vector<ExtractedLink> extractByPattern(std::string_view text) {
    std::vector<ExtractedLink> out;
    std::string lower = toLowerAscii(text);
    std::string_view lv = lower;
    std::size_t i = 0;
    while (true) {
        auto dot = lv.find(".onion", i);
        if (dot == std::string_view::npos) break;
        i = dot + 6;  // next search continues after this suffix, so URLs nested
                      // inside another URL's path are still visited

        // Reject when ".onion" is not a hostname boundary.
        std::size_t after = dot + 6;
        if (after < lv.size()) {
            char c = lv[after];
            if (isHostChar(c)) continue;
            if (c == '.' && after + 1 < lv.size() && isHostChar(lv[after + 1])) continue;  // gateway domain
        }

        // The label is the maximal base32 run directly before the dot.
        std::size_t runEnd = dot;
        std::size_t runStart = runEnd;
        while (runStart > 0 && isBase32(lv[runStart - 1]) && runEnd - runStart < 64) --runStart;
        std::size_t runLen = runEnd - runStart;
        if (runLen != 16 && runLen != 56) continue;
        if (runStart > 0) {
            char before = lv[runStart - 1];
            if (std::isalnum(static_cast<unsigned char>(before)) || before == '-') continue;
        }

        ExtractedLink link;
        link.host.label = std::string(lv.substr(runStart, runLen));
        link.host.version = runLen == 16 ? 2 : 3;
        link.source = LinkSource::pattern;

        // Optional subdomain labels to the left, dot separated.
        std::string sub;
        std::size_t cursor = runStart;
        std::size_t scanned = 0;
        while (cursor > 0 && lv[cursor - 1] == '.' && scanned < kMaxSubdomainScan) {
            std::size_t labelEnd = cursor - 1;
            std::size_t labelStart = labelEnd;
            while (labelStart > 0 && isHostChar(lv[labelStart - 1]) &&
                   labelEnd - labelStart < 64 && scanned + (labelEnd - labelStart) < kMaxSubdomainScan) {
                --labelStart;
            }
            if (labelStart == labelEnd) break;
            std::string label(lv.substr(labelStart, labelEnd - labelStart));
            sub = sub.empty() ? label : label + "." + sub;
            scanned += labelEnd - labelStart + 1;
            cursor = labelStart;
        }
        link.subdomain = sub;

        // Optional port, then the path (taken from the original text so the
        // case of path characters survives).
        std::size_t p = after;
        if (p < lv.size() && lv[p] == ':') {
            std::size_t d = p + 1;
            while (d < lv.size() && std::isdigit(static_cast<unsigned char>(lv[d])) && d - p <= 5) ++d;
            if (d > p + 1) p = d;
        }
        if (p < text.size() && text[p] == '/') {
            std::size_t pathEnd = p;
            while (pathEnd < text.size() && pathEnd - p < kMaxPathScan &&
                   !isPathTerminator(text[pathEnd]))
                ++pathEnd;
            std::string_view rawPath = text.substr(p, pathEnd - p);
            while (!rawPath.empty()) {
                char last = rawPath.back();
                if (last == '.' || last == ',' || last == ';' || last == ':' || last == '!' ||
                    last == '?')
                    rawPath.remove_suffix(1);
                else
                    break;
            }
            link.path = normalizePath(rawPath);
        } else {
            link.path = "/";
        }
        out.push_back(std::move(link));
    }
    return out;
}

std::vector<ExtractedLink> extractAll(std::string_view text, bool isHtml, const BaseUrl& base) {
    std::vector<ExtractedLink> merged;
    if (isHtml) merged = extractAnchors(text, base);
    std::vector<ExtractedLink> pattern = extractByPattern(text);
    merged.insert(merged.end(), std::make_move_iterator(pattern.begin()),
                  std::make_move_iterator(pattern.end()));

    std::vector<ExtractedLink> out;
    std::unordered_set<std::string> seen;
    out.reserve(merged.size());
    for (auto& link : merged) {
        std::string key = link.subdomain + "|" + link.host.label + "|" + link.path;
        if (seen.insert(std::move(key)).second) out.push_back(std::move(link));
    }
    return out;
}

}  // namespace spider::extract
