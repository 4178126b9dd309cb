#include "revgen/fetch.hpp"

#include <fstream>

#include "revgen/errors.hpp"
#include "revgen/jsonl.hpp"

#ifdef REVGEN_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

namespace revgen {

std::string build_reviews_query(const std::string& repo, int page_size,
                                const std::string& cursor) {
    auto slash = repo.find('/');
    std::string owner = repo.substr(0, slash);
    std::string name = slash == std::string::npos ? "" : repo.substr(slash + 1);
    std::string after = cursor.empty() ? "" : ", after: \"" + cursor + "\"";
    std::string query =
        "query { repository(owner: \"" + owner + "\", name: \"" + name + "\") {"
        " pullRequests(first: " + std::to_string(page_size) + after +
        ", states: [MERGED, CLOSED]) {"
        " pageInfo { hasNextPage endCursor }"
        " nodes { number reviewThreads(first: 50) { nodes { id path"
        " comments(first: 1) { nodes { body createdAt author { login } } }"
        " subCode: originalText revCode: headText } } } } } }";
    ojson body;
    body["query"] = query;
    return body.dump();
}

ParsedPage parse_reviews_page(const std::string& body, const std::string& repo) {
    ojson page;
    try {
        page = ojson::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(std::string("response is not JSON: ") + e.what());
    }
    if (page.contains("errors") && !page.contains("data")) {
        throw SchemaError("GraphQL error response: " + page["errors"].dump());
    }

    ParsedPage out;
    const ojson* prs = nullptr;
    try {
        prs = &page.at("data").at("repository").at("pullRequests");
        out.has_next = prs->at("pageInfo").at("hasNextPage").get<bool>();
        out.end_cursor = prs->at("pageInfo").value("endCursor", "");
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("missing pullRequests envelope: ") + e.what());
    }

    for (const auto& pr : (*prs).value("nodes", ojson::array())) {
        ++out.prs;
        int64_t number = pr.value("number", int64_t{0});
        size_t thread_idx = 0;
        for (const auto& thread :
             pr.value("reviewThreads", ojson::object()).value("nodes", ojson::array())) {
            ++thread_idx;
            try {
                std::string path = thread.at("path").get<std::string>();
                if (path.size() < 5 || path.substr(path.size() - 5) != ".java") {
                    ++out.skipped_non_java;
                    continue;
                }
                std::string sub = thread.at("subCode").get<std::string>();
                std::string rev = thread.at("revCode").get<std::string>();
                if (sub == rev || rev.empty()) {
                    ++out.skipped_no_revision;  // no revision followed this thread
                    continue;
                }
                const auto& comments = thread.at("comments").at("nodes");
                if (comments.empty()) {
                    ++out.schema_errors;
                    continue;
                }
                const auto& c0 = comments.at(0);
                ReviewTriplet t;
                t.id = thread.value("id", repo + "#" + std::to_string(number) + "#" +
                                             std::to_string(thread_idx));
                t.repo = repo;
                t.sub_code = std::move(sub);
                t.rev_code = std::move(rev);
                t.comment = c0.at("body").get<std::string>();
                t.meta.timestamp = c0.value("createdAt", "");
                if (c0.contains("author") && c0["author"].is_object()) {
                    t.meta.author = c0["author"].value("login", "");
                }
                t.meta.pr_number = number;
                out.triplets.push_back(std::move(t));
            } catch (const nlohmann::json::exception&) {
                ++out.schema_errors;
            }
        }
    }
    return out;
}

namespace {

std::string read_checkpoint(const std::filesystem::path& path) {
    if (path.empty() || !std::filesystem::exists(path)) return "";
    std::ifstream in(path);
    std::string cursor;
    std::getline(in, cursor);
    return cursor;
}

void write_checkpoint(const std::filesystem::path& path, const std::string& cursor) {
    if (path.empty()) return;
    std::ofstream out(path, std::ios::binary);
    out << cursor << "\n";
}

}  // namespace

FetchStats fetch_reviews(const FetchOptions& options,
                         const std::function<void(const ReviewTriplet&)>& sink,
                         const Transport& transport) {
    if (options.auth_token.empty()) throw AuthError("missing auth token");
    if (options.repo.find('/') == std::string::npos) {
        throw Error("repo must be owner/name, got: " + options.repo);
    }

    FetchStats stats;
    std::string cursor = read_checkpoint(options.checkpoint_path);
    while (static_cast<int>(stats.prs) < options.max_prs) {
        int page_size =
            std::min(options.page_size, options.max_prs - static_cast<int>(stats.prs));
        std::string request = build_reviews_query(options.repo, page_size, cursor);
        HttpResponse resp = transport(options.endpoint, options.auth_token, request);

        if (resp.status == 401) throw AuthError("authentication failed (401)");
        if (resp.status == 403 || resp.status == 429) {
            int retry = resp.retry_after.empty() ? 60 : std::stoi(resp.retry_after);
            throw RateLimitedError(retry, "rate limited (" + std::to_string(resp.status) + ")");
        }
        if (resp.status != 200) {
            throw SchemaError("unexpected HTTP status " + std::to_string(resp.status));
        }

        ParsedPage page = parse_reviews_page(resp.body, options.repo);
        stats.prs += page.prs;
        stats.skipped_non_java += page.skipped_non_java;
        stats.skipped_no_revision += page.skipped_no_revision;
        stats.schema_errors += page.schema_errors;
        for (const auto& t : page.triplets) {
            sink(t);
            ++stats.triplets;
        }
        write_checkpoint(options.checkpoint_path, page.end_cursor);
        if (!page.has_next || page.prs == 0) break;
        cursor = page.end_cursor;
    }
    return stats;
}

Transport default_transport() {
    return [](const std::string& endpoint, const std::string& token,
              const std::string& body) -> HttpResponse {
        // split scheme://host and path
        std::string url = endpoint;
        std::string path = "/graphql";
        auto scheme_end = url.find("://");
        if (scheme_end != std::string::npos) {
            auto path_start = url.find('/', scheme_end + 3);
            if (path_start != std::string::npos) {
                path = url.substr(path_start);
                url = url.substr(0, path_start);
            }
        }
#ifndef REVGEN_HAVE_OPENSSL
        if (url.rfind("https", 0) == 0) {
            throw Error("built without TLS support; use an http endpoint or a proxy");
        }
#endif
        httplib::Client client(url);
        client.set_connection_timeout(30);
        client.set_read_timeout(120);
        httplib::Headers headers = {{"Authorization", "Bearer " + token},
                                    {"User-Agent", "revgen"}};
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) throw Error("network error contacting " + url);
        HttpResponse out;
        out.status = res->status;
        out.body = res->body;
        if (res->has_header("Retry-After")) out.retry_after = res->get_header_value("Retry-After");
        return out;
    };
}

}  // namespace revgen
