#ifndef SPIDER_EXTRACTOR_HPP
#define SPIDER_EXTRACTOR_HPP

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "spider/store.hpp"

namespace spider::extract {

enum class LinkSource { anchor, pattern };

struct ExtractedLink {
    store::OnionAddress host;
    std::string subdomain;
    std::string path;  // starts with "/", fragment stripped, query preserved
    LinkSource source = LinkSource::pattern;

    bool sameTarget(const ExtractedLink& o) const {
        return host.label == o.host.label && subdomain == o.subdomain && path == o.path;
    }
};

struct BaseUrl {
    store::OnionAddress host;
    std::string subdomain;
    std::string path = "/";
};

/// Lowercases, strips the fragment, keeps the query, collapses `//` and
/// resolves `.`/`..` segments. Empty input becomes "/".
std::string normalizePath(std::string_view path);

/// Resolves one href (relative or absolute) against a base URL. Returns
/// nothing for non-onion targets and non-http schemes. Also used by the
/// fetcher for redirect Location headers.
std::optional<ExtractedLink> resolveHref(std::string_view href, const BaseUrl& base);

/// Fast pass: every href of every <a> element, resolved against the base.
/// Non-onion targets are dropped. Malformed markup degrades gracefully.
std::vector<ExtractedLink> extractAnchors(std::string_view html, const BaseUrl& base);

/// Complete pass: every absolute onion URL anywhere in the text, scheme
/// optional. Single left-to-right scan, linear in the input length.
std::vector<ExtractedLink> extractByPattern(std::string_view text);

/// Hybrid result: the union of both passes, deduplicated on
/// (host, subdomain, path). The anchor pass runs only for HTML bodies.
std::vector<ExtractedLink> extractAll(std::string_view text, bool isHtml, const BaseUrl& base);

}  // namespace spider::extract

#endif
