#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "revgen/jsonl.hpp"

namespace revgen {

struct TripletMeta {
    std::string timestamp;  // ISO-8601
    std::string author;
    int64_t pr_number = 0;
};

// One mined review event: submitted code, revised code, reviewer comment.
struct ReviewTriplet {
    std::string id;
    std::string repo;
    std::string sub_code;
    std::string rev_code;
    std::string comment;
    TripletMeta meta;
};

ojson triplet_to_json(const ReviewTriplet& t);
ReviewTriplet triplet_from_json(const ojson& j);

std::vector<ReviewTriplet> load_triplets(const std::filesystem::path& path);
void save_triplets(const std::filesystem::path& path, const std::vector<ReviewTriplet>& triplets);

struct DedupResult {
    std::vector<ReviewTriplet> kept;
    size_t removed = 0;
};

// First occurrence of each whitespace-normalized (sub_code, comment) pair wins.
DedupResult dedup(const std::vector<ReviewTriplet>& corpus);

struct CorpusSplit {
    std::vector<ReviewTriplet> train;
    std::vector<ReviewTriplet> valid;
    std::vector<ReviewTriplet> test;
    uint64_t seed = 0;
};

// Deterministic shuffle, then 80/10/10 with floor rule; remainder to train.
// Throws TooSmallError below 10 records.
CorpusSplit split_dataset(const std::vector<ReviewTriplet>& corpus, uint64_t seed);

// Same partitioning over raw JSONL records (used for already-tagged pairs).
struct LineSplit {
    std::vector<ojson> train;
    std::vector<ojson> valid;
    std::vector<ojson> test;
};
LineSplit split_records(const std::vector<ojson>& records, uint64_t seed);

}  // namespace revgen
