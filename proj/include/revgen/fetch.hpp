#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "revgen/corpus.hpp"

namespace revgen {

struct FetchOptions {
    std::string endpoint = "https://api.github.com/graphql";
    std::string repo;  // "owner/name"
    std::string auth_token;
    int max_prs = 1000;
    int page_size = 50;
    std::filesystem::path checkpoint_path;  // stores the last page cursor
};

struct HttpResponse {
    int status = 0;
    std::string body;
    std::string retry_after;  // seconds, when the server sent one
};

// (endpoint, auth_token, request_body) -> response
using Transport =
    std::function<HttpResponse(const std::string&, const std::string&, const std::string&)>;

struct FetchStats {
    size_t prs = 0;
    size_t triplets = 0;
    size_t skipped_non_java = 0;
    size_t skipped_no_revision = 0;
    size_t schema_errors = 0;
};

struct ParsedPage {
    std::vector<ReviewTriplet> triplets;
    std::string end_cursor;
    bool has_next = false;
    size_t prs = 0;
    size_t skipped_non_java = 0;
    size_t skipped_no_revision = 0;
    size_t schema_errors = 0;
};

std::string build_reviews_query(const std::string& repo, int page_size,
                                const std::string& cursor);

// Pulls triplets out of one GraphQL response page. Malformed records are
// skipped and counted; a page without the expected envelope throws.
ParsedPage parse_reviews_page(const std::string& body, const std::string& repo);

// Streams triplets; resumable via the cursor checkpoint file.
// Throws AuthError / RateLimitedError / SchemaError.
FetchStats fetch_reviews(const FetchOptions& options,
                         const std::function<void(const ReviewTriplet&)>& sink,
                         const Transport& transport);

// cpp-httplib backed transport (TLS when built with OpenSSL).
Transport default_transport();

}  // namespace revgen
