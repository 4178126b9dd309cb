#include "revgen/corpus.hpp"

#include <numeric>
#include <unordered_set>

#include "revgen/errors.hpp"
#include "revgen/rng.hpp"
#include "revgen/textprep.hpp"

namespace revgen {

ojson triplet_to_json(const ReviewTriplet& t) {
    ojson j;
    j["id"] = t.id;
    j["repo"] = t.repo;
    j["sub_code"] = t.sub_code;
    j["rev_code"] = t.rev_code;
    j["comment"] = t.comment;
    j["meta"] = ojson{{"timestamp", t.meta.timestamp},
                      {"author", t.meta.author},
                      {"pr_number", t.meta.pr_number}};
    return j;
}

ReviewTriplet triplet_from_json(const ojson& j) {
    ReviewTriplet t;
    try {
        t.id = j.at("id").get<std::string>();
        t.repo = j.at("repo").get<std::string>();
        t.sub_code = j.at("sub_code").get<std::string>();
        t.rev_code = j.at("rev_code").get<std::string>();
        t.comment = j.at("comment").get<std::string>();
        const auto& m = j.at("meta");
        t.meta.timestamp = m.value("timestamp", "");
        t.meta.author = m.value("author", "");
        t.meta.pr_number = m.value("pr_number", int64_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("bad triplet record: ") + e.what());
    }
    return t;
}

std::vector<ReviewTriplet> load_triplets(const std::filesystem::path& path) {
    std::vector<ReviewTriplet> out;
    for (const auto& j : read_jsonl(path)) {
        out.push_back(triplet_from_json(j));
    }
    return out;
}

void save_triplets(const std::filesystem::path& path, const std::vector<ReviewTriplet>& triplets) {
    std::vector<ojson> records;
    records.reserve(triplets.size());
    for (const auto& t : triplets) records.push_back(triplet_to_json(t));
    write_jsonl(path, records);
}

DedupResult dedup(const std::vector<ReviewTriplet>& corpus) {
    DedupResult result;
    std::unordered_set<std::string> seen;
    for (const auto& t : corpus) {
        std::string key = normalize_whitespace(t.sub_code);
        key += '\x1f';
        key += normalize_whitespace(t.comment);
        if (seen.insert(std::move(key)).second) {
            result.kept.push_back(t);
        } else {
            ++result.removed;
        }
    }
    return result;
}

namespace {

std::vector<size_t> shuffled_indices(size_t n, uint64_t seed) {
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    Rng rng(mix_seed(seed, 0x5911ULL));
    rng.shuffle(idx);
    return idx;
}

}  // namespace

CorpusSplit split_dataset(const std::vector<ReviewTriplet>& corpus, uint64_t seed) {
    if (corpus.size() < 10) {
        throw TooSmallError("split needs at least 10 records, got " +
                            std::to_string(corpus.size()));
    }
    auto idx = shuffled_indices(corpus.size(), seed);
    size_t n = corpus.size();
    size_t n_valid = n / 10;
    size_t n_test = n / 10;
    size_t n_train = n - n_valid - n_test;
    CorpusSplit split;
    split.seed = seed;
    for (size_t i = 0; i < n; ++i) {
        const ReviewTriplet& t = corpus[idx[i]];
        if (i < n_train) {
            split.train.push_back(t);
        } else if (i < n_train + n_valid) {
            split.valid.push_back(t);
        } else {
            split.test.push_back(t);
        }
    }
    return split;
}

LineSplit split_records(const std::vector<ojson>& records, uint64_t seed) {
    if (records.size() < 10) {
        throw TooSmallError("split needs at least 10 records, got " +
                            std::to_string(records.size()));
    }
    auto idx = shuffled_indices(records.size(), seed);
    size_t n = records.size();
    size_t n_valid = n / 10;
    size_t n_test = n / 10;
    size_t n_train = n - n_valid - n_test;
    LineSplit split;
    for (size_t i = 0; i < n; ++i) {
        const ojson& r = records[idx[i]];
        if (i < n_train) {
            split.train.push_back(r);
        } else if (i < n_train + n_valid) {
            split.valid.push_back(r);
        } else {
            split.test.push_back(r);
        }
    }
    return split;
}

}  // namespace revgen
