#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <random>

#include "spider/fetcher.hpp"

using namespace spider;
using namespace spider::fetch;

namespace {

/// Scripted transport: maps path -> response, records endpoint usage.
class ScriptTransport final : public Transport {
public:
    explicit ScriptTransport(int endpoints) : endpoints_(endpoints) {}

    int endpointCount() const override { return endpoints_; }

    Response get(const Request& request, int endpointIndex) override {
        hits[endpointIndex] += 1;
        auto it = script.find(request.path);
        if (it == script.end()) {
            Response r;
            r.transport = TransportStatus::unreachable;
            return r;
        }
        return it->second;
    }

    std::map<std::string, Response> script;
    std::map<int, int> hits;

private:
    int endpoints_;
};

Response ok(std::string body, std::optional<std::string> mime) {
    Response r;
    r.statusCode = 200;
    r.mimeHeader = std::move(mime);
    r.bytes = std::move(body);
    return r;
}

const std::string kHost = "aaaaaaaaaaaaaaaa.onion";

}  // namespace

TEST_CASE("mime policy whitelist") {
    MimePolicy p;
    CHECK(p.isWhitelisted("text/html"));
    CHECK(p.isWhitelisted("text/plain; charset=utf-8"));
    CHECK(p.isWhitelisted("TEXT/HTML"));
    CHECK(p.isWhitelisted("application/json"));
    CHECK(p.isWhitelisted("application/xml"));
    CHECK(p.isWhitelisted("application/javascript"));
    CHECK(p.isWhitelisted("application/rss+xml"));
    CHECK(p.isWhitelisted("application/atom+xml"));
    CHECK(p.isWhitelisted("application/rdf+xml"));   // +xml suffix rule
    CHECK(p.isWhitelisted("application/geo+json"));  // +json suffix rule
    CHECK_FALSE(p.isWhitelisted("image/jpeg"));
    CHECK_FALSE(p.isWhitelisted("application/zip"));
    CHECK_FALSE(p.isWhitelisted("application/octet-stream"));
    CHECK_FALSE(p.isWhitelisted("application/x-empty"));
    CHECK_FALSE(p.isWhitelisted(""));
}

TEST_CASE("mime sniffing") {
    CHECK(sniffMime("") == "application/x-empty");
    CHECK(sniffMime(std::string("\x89PNG\r\n\x1a\n____", 12)) == "image/png");
    CHECK(sniffMime(std::string("\xFF\xD8\xFF\xE0rest", 7)) == "image/jpeg");
    CHECK(sniffMime("GIF89a____") == "image/gif");
    CHECK(sniffMime("%PDF-1.4 ...") == "application/pdf");
    CHECK(sniffMime(std::string("PK\x03\x04zipdata", 11)) == "application/zip");
    CHECK(sniffMime("<!DOCTYPE html><html></html>") == "text/html");
    CHECK(sniffMime("  \n\t<HTML><body>") == "text/html");
    CHECK(sniffMime("plain words only") == "text/plain");
    CHECK(sniffMime("utf8 \xC3\xA9\xC3\xA8") == "text/plain");
    CHECK(sniffMime(std::string("ab\x00zz", 5)) == "application/octet-stream");
    CHECK(sniffMime("bad utf8 \xFF\xFE") == "application/octet-stream");
}

TEST_CASE("data uri scrubbing") {
    const std::string ph = "[SCRUBBED]";
    CHECK(scrubDataUris(R"(src="data:image/png;base64,iVBORw0KGgo=")", ph) ==
          R"(src="[SCRUBBED]")");
    CHECK(scrubDataUris(R"(href="data:text/plain,hello")", ph) == R"(href="data:text/plain,hello")");
    // no data uris -> byte-identical
    std::string plain = "nothing to see here, just a colon: and data words";
    CHECK(scrubDataUris(plain, ph) == plain);
    // multiple, mixed
    std::string mixed =
        R"(<img src="data:image/gif;base64,R0lGOD=="> <a href="data:application/json,{}">j</a>)";
    auto out = scrubDataUris(mixed, ph);
    CHECK(out.find("R0lGOD") == std::string::npos);
    CHECK(out.find("data:application/json,{}") != std::string::npos);
    // idempotent
    CHECK(scrubDataUris(out, ph) == out);
    // audio/video also go away
    CHECK(scrubDataUris("data:audio/mpeg;base64,AAAA", ph) == ph);
    // svg is xml, textual by the suffix rule
    CHECK(scrubDataUris("data:image/svg+xml,<svg/>", ph) == "data:image/svg+xml,<svg/>");
}

TEST_CASE("fetch applies the staged mime filter") {
    ScriptTransport t(1);
    LogicalClock clock(100);
    Fetcher f(t, MimePolicy{}, clock);

    t.script["/img"] = ok("\xFF\xD8\xFF binary", std::string("image/jpeg"));
    auto r = f.fetch(1, {kHost, "", "/img"});
    CHECK(r.rejected);
    CHECK(r.reason == RejectReason::mimeRejected);
    CHECK_FALSE(r.body.has_value());
    CHECK(r.mimeType == "image/jpeg");
    CHECK(r.statusCode == 200);
    CHECK(r.fetchedAt == 100);

    // no header: body is sniffed
    t.script["/page"] = ok("<!doctype html><html>x</html>", std::nullopt);
    r = f.fetch(2, {kHost, "", "/page"});
    CHECK_FALSE(r.rejected);
    CHECK(r.mimeType == "text/html");
    REQUIRE(r.body);

    t.script["/blob"] = ok(std::string("\x00\x01\x02", 3), std::nullopt);
    r = f.fetch(3, {kHost, "", "/blob"});
    CHECK(r.rejected);
    CHECK(r.mimeType == "application/octet-stream");

    // whitelisted header, body scrubbed before return
    t.script["/dirty"] = ok(R"(<img src="data:image/png;base64,AAAA">)", std::string("text/html"));
    r = f.fetch(4, {kHost, "", "/dirty"});
    REQUIRE(r.body);
    CHECK(r.body->find("AAAA") == std::string::npos);
    CHECK(r.body->find("[SCRUBBED]") != std::string::npos);
}

TEST_CASE("fetch maps errors") {
    ScriptTransport t(1);
    LogicalClock clock;
    Fetcher f(t, MimePolicy{}, clock);

    auto r = f.fetch(1, {kHost, "", "/missing"});
    CHECK(r.rejected);
    CHECK(r.reason == RejectReason::unreachable);

    Response timeout;
    timeout.transport = TransportStatus::timeout;
    t.script["/slow"] = timeout;
    r = f.fetch(2, {kHost, "", "/slow"});
    CHECK(r.reason == RejectReason::timeout);

    Response notFound;
    notFound.statusCode = 404;
    notFound.mimeHeader = "text/html";
    notFound.bytes = "<html>not found</html>";
    t.script["/404"] = notFound;
    r = f.fetch(3, {kHost, "", "/404"});
    CHECK(r.rejected);
    CHECK(r.reason == RejectReason::httpError);
    CHECK(r.statusCode == 404);
    CHECK_FALSE(r.body.has_value());
}

TEST_CASE("round robin endpoint selection") {
    ScriptTransport t(3);
    LogicalClock clock;
    Fetcher f(t, MimePolicy{}, clock);
    t.script["/"] = ok("text", std::string("text/plain"));
    for (int i = 0; i < 9; ++i) f.fetch(i, {kHost, "", "/"});
    CHECK(t.hits[0] == 3);
    CHECK(t.hits[1] == 3);
    CHECK(t.hits[2] == 3);
}

TEST_CASE("same-host redirects are followed, cross-host are not") {
    ScriptTransport t(1);
    LogicalClock clock;
    Fetcher f(t, MimePolicy{}, clock);

    Response redir;
    redir.statusCode = 302;
    redir.location = "/landing";
    t.script["/"] = redir;
    t.script["/landing"] = ok("arrived", std::string("text/plain"));
    auto r = f.fetch(1, {kHost, "", "/"});
    CHECK_FALSE(r.rejected);
    REQUIRE(r.body);
    CHECK(*r.body == "arrived");

    Response cross;
    cross.statusCode = 301;
    cross.location = "http://zqktlwi4i34kbat3.onion/elsewhere";
    t.script["/cross"] = cross;
    r = f.fetch(2, {kHost, "", "/cross"});
    CHECK(r.rejected);
    CHECK(r.reason == RejectReason::httpError);
    CHECK(r.statusCode == 301);

    // redirect loops stop at the hop limit
    Response loop;
    loop.statusCode = 302;
    loop.location = "/loop";
    t.script["/loop"] = loop;
    r = f.fetch(3, {kHost, "", "/loop"});
    CHECK(r.rejected);
    CHECK(r.statusCode == 302);
}

TEST_CASE("fuzz: no accepted body ever sniffs non-textual") {
    ScriptTransport t(1);
    LogicalClock clock;
    Fetcher f(t, MimePolicy{}, clock);
    std::mt19937_64 rng(99);
    const std::string htmlBit = "<html><body>ok</body></html>";
    for (int i = 0; i < 300; ++i) {
        std::string body;
        int kind = static_cast<int>(rng() % 4);
        if (kind == 0) body = htmlBit;
        else if (kind == 1) {
            body = std::string("\x89PNG\r\n\x1a\n", 8);
            for (int k = 0; k < 40; ++k) body += static_cast<char>(rng() & 0xFF);
        } else if (kind == 2) {
            for (int k = 0; k < 60; ++k) body += static_cast<char>(rng() & 0xFF);
        } else {
            body = "words and numbers " + std::to_string(rng());
        }
        t.script["/f"] = ok(body, std::nullopt);
        auto r = f.fetch(i, {kHost, "", "/f"});
        if (r.body) {
            auto sniffed = sniffMime(*r.body);
            CHECK((sniffed.rfind("text/", 0) == 0));
        }
    }
}
