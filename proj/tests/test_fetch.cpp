#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "revgen/errors.hpp"
#include "revgen/fetch.hpp"
#include "revgen/jsonl.hpp"

using namespace revgen;

namespace {

ojson thread_node(const std::string& path, const std::string& body, const std::string& sub,
                  const std::string& rev) {
    ojson t;
    t["id"] = "th_" + path + "_" + std::to_string(body.size());
    t["path"] = path;
    t["comments"] = {{"nodes", {{{"body", body},
                                 {"createdAt", "2021-01-01T00:00:00Z"},
                                 {"author", {{"login", "alice"}}}}}}};
    t["subCode"] = sub;
    t["revCode"] = rev;
    return t;
}

std::string page_response(std::vector<ojson> threads, bool has_next, const std::string& cursor,
                          int pr_number = 1) {
    ojson pr;
    pr["number"] = pr_number;
    pr["reviewThreads"] = {{"nodes", threads}};
    ojson page;
    page["data"] = {{"repository",
                     {{"pullRequests",
                       {{"pageInfo", {{"hasNextPage", has_next}, {"endCursor", cursor}}},
                        {"nodes", {pr}}}}}}};
    return page.dump();
}

}  // namespace

TEST_CASE("parse_reviews_page extracts java triplets only") {
    std::vector<ojson> threads = {
        thread_node("src/Foo.java", "please fix this", "class A { void f() { int x; } }",
                    "class A { void f() { int y; } }"),
        thread_node("README.md", "docs comment", "a", "b"),
        thread_node("src/Bar.java", "no change followed", "same text", "same text"),
    };
    ParsedPage page = parse_reviews_page(page_response(threads, false, "CUR"), "demo/demo");
    REQUIRE(page.triplets.size() == 1);
    CHECK(page.triplets[0].comment == "please fix this");
    CHECK(page.triplets[0].repo == "demo/demo");
    CHECK(page.triplets[0].meta.author == "alice");
    CHECK(page.triplets[0].meta.pr_number == 1);
    CHECK(page.skipped_non_java == 1);
    CHECK(page.skipped_no_revision == 1);
    CHECK(page.end_cursor == "CUR");
    CHECK(!page.has_next);
}

TEST_CASE("malformed records are skipped and counted") {
    ojson broken;
    broken["path"] = "src/Broken.java";  // no comments/subCode
    std::vector<ojson> threads = {
        broken,
        thread_node("src/Ok.java", "looks wrong", "class A { void f() { int x; } }",
                    "class A { void f() { long x; } }"),
    };
    ParsedPage page = parse_reviews_page(page_response(threads, false, ""), "demo/demo");
    CHECK(page.schema_errors == 1);
    CHECK(page.triplets.size() == 1);
}

TEST_CASE("page without the envelope throws SchemaError") {
    CHECK_THROWS_AS(parse_reviews_page("{\"data\": {}}", "demo/demo"), SchemaError);
    CHECK_THROWS_AS(parse_reviews_page("not json", "demo/demo"), SchemaError);
    CHECK_THROWS_AS(parse_reviews_page("{\"errors\": [{\"message\": \"boom\"}]}", "demo/demo"),
                    SchemaError);
}

TEST_CASE("fetch_reviews paginates and resumes from the checkpoint") {
    auto ckpt = std::filesystem::temp_directory_path() / "revgen_fetch_ckpt.txt";
    std::filesystem::remove(ckpt);

    int calls = 0;
    std::vector<std::string> cursors_seen;
    Transport fake = [&](const std::string&, const std::string&,
                         const std::string& body) -> HttpResponse {
        ++calls;
        // the request embeds the cursor; record whether it is present
        cursors_seen.push_back(body.find("after:") == std::string::npos ? "" : "PAGE1");
        std::vector<ojson> threads = {
            thread_node("src/F" + std::to_string(calls) + ".java", "comment number " +
                        std::to_string(calls),
                        "class A { void f() { int a; } }", "class A { void f() { int b; } }")};
        return {200, page_response(threads, calls == 1, "PAGE1", calls), ""};
    };

    FetchOptions opts;
    opts.repo = "demo/demo";
    opts.auth_token = "tok";
    opts.max_prs = 10;
    opts.page_size = 1;
    opts.checkpoint_path = ckpt;

    std::vector<ReviewTriplet> seen;
    FetchStats stats = fetch_reviews(opts, [&](const ReviewTriplet& t) { seen.push_back(t); },
                                     fake);
    CHECK(calls == 2);
    CHECK(stats.triplets == 2);
    CHECK(cursors_seen[0] == "");
    CHECK(cursors_seen[1] == "PAGE1");

    // resume: the checkpoint holds the last cursor, first call now carries it
    calls = 0;
    cursors_seen.clear();
    fetch_reviews(opts, [](const ReviewTriplet&) {}, fake);
    CHECK(cursors_seen[0] == "PAGE1");
    std::filesystem::remove(ckpt);
}

TEST_CASE("empty repositories yield an empty stream") {
    Transport fake = [](const std::string&, const std::string&,
                        const std::string&) -> HttpResponse {
        ojson page;
        page["data"] = {{"repository",
                         {{"pullRequests",
                           {{"pageInfo", {{"hasNextPage", false}, {"endCursor", ""}}},
                            {"nodes", ojson::array()}}}}}};
        return {200, page.dump(), ""};
    };
    FetchOptions opts;
    opts.repo = "demo/empty";
    opts.auth_token = "tok";
    size_t count = 0;
    FetchStats stats = fetch_reviews(opts, [&](const ReviewTriplet&) { ++count; }, fake);
    CHECK(count == 0);
    CHECK(stats.triplets == 0);
}

TEST_CASE("auth and rate-limit errors surface as typed exceptions") {
    FetchOptions opts;
    opts.repo = "demo/demo";
    opts.auth_token = "revoked";

    Transport unauthorized = [](const std::string&, const std::string&,
                                const std::string&) -> HttpResponse {
        return {401, "{}", ""};
    };
    CHECK_THROWS_AS(fetch_reviews(opts, [](const ReviewTriplet&) {}, unauthorized), AuthError);

    Transport limited = [](const std::string&, const std::string&,
                           const std::string&) -> HttpResponse {
        return {429, "{}", "17"};
    };
    try {
        fetch_reviews(opts, [](const ReviewTriplet&) {}, limited);
        FAIL("expected RateLimitedError");
    } catch (const RateLimitedError& e) {
        CHECK(e.retry_after_seconds == 17);
    }

    FetchOptions no_token = opts;
    no_token.auth_token = "";
    CHECK_THROWS_AS(fetch_reviews(no_token, [](const ReviewTriplet&) {}, unauthorized),
                    AuthError);
}
