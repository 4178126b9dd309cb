#include "revgen/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "revgen/errors.hpp"
#include "revgen/textprep.hpp"

namespace revgen {

const std::vector<std::string>& Vocabulary::special_tokens() {
    static const std::vector<std::string> specials = {"<pad>", "</s>", "<unk>", "<mask>",
                                                      std::string(kReviewTagToken)};
    return specials;
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus,
                             size_t min_freq, size_t max_size) {
    if (corpus.empty()) throw EmptyCorpusError("vocabulary build on empty corpus");

    std::map<std::string, size_t> freq;
    for (const auto& seq : corpus) {
        for (const auto& tok : seq) ++freq[tok];
    }
    if (freq.empty()) throw EmptyCorpusError("vocabulary build: no tokens");

    const auto& specials = special_tokens();
    std::vector<std::pair<std::string, size_t>> entries;
    entries.reserve(freq.size());
    for (const auto& [tok, n] : freq) {
        if (n < min_freq) continue;
        if (std::find(specials.begin(), specials.end(), tok) != specials.end()) continue;
        entries.emplace_back(tok, n);
    }
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });

    std::vector<std::string> tokens = specials;
    for (auto& [tok, n] : entries) {
        if (tokens.size() >= max_size) break;
        tokens.push_back(std::move(tok));
    }
    return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
    Vocabulary v;
    v.tokens_ = std::move(tokens);
    for (size_t i = 0; i < v.tokens_.size(); ++i) {
        v.ids_.emplace(v.tokens_[i], static_cast<int>(i));
    }
    if (v.tokens_.size() < kNumSpecials ||
        !std::equal(special_tokens().begin(), special_tokens().end(), v.tokens_.begin())) {
        throw SchemaError("vocabulary must start with the five special tokens");
    }
    return v;
}

int Vocabulary::id_of(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
    return tokens_.at(static_cast<size_t>(id));
}

void Vocabulary::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& t : tokens_) out << t << "\n";
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) tokens.push_back(line);
    }
    return from_tokens(std::move(tokens));
}

const std::vector<std::string>& comment_prefix() {
    static const std::vector<std::string> prefix = {"generating", "review", "comments", ":"};
    return prefix;
}

std::vector<int> encode(const std::vector<std::string>& body, const Vocabulary& vocab,
                        const std::vector<std::string>& prefix, size_t max_len) {
    if (max_len < prefix.size() + 2) {
        throw Error("encode: max_len must be at least |prefix| + 2");
    }
    std::vector<int> ids;
    ids.reserve(prefix.size() + body.size() + 1);
    for (const auto& t : prefix) ids.push_back(vocab.id_of(t));
    for (const auto& t : body) ids.push_back(vocab.id_of(t));
    if (ids.size() + 1 > max_len) ids.resize(max_len - 1);
    ids.push_back(Vocabulary::kEos);
    return ids;
}

std::vector<std::string> decode_ids(const std::vector<int>& ids, const Vocabulary& vocab,
                                    size_t skip_prefix) {
    std::vector<std::string> tokens;
    for (size_t i = skip_prefix; i < ids.size(); ++i) {
        int id = ids[i];
        if (id == Vocabulary::kPad || id == Vocabulary::kEos) continue;
        tokens.push_back(vocab.token_of(id));
    }
    return tokens;
}

}  // namespace revgen
