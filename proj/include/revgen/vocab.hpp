#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace revgen {

// Word-level vocabulary. The five special tokens occupy the lowest ids.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kEos = 1;
    static constexpr int kUnk = 2;
    static constexpr int kMask = 3;
    static constexpr int kReviewTag = 4;
    static constexpr int kNumSpecials = 5;

    static const std::vector<std::string>& special_tokens();

    // Frequency-ordered build; ties lexicographic; throws EmptyCorpusError.
    static Vocabulary build(const std::vector<std::vector<std::string>>& corpus,
                            size_t min_freq = 2, size_t max_size = 32000);

    static Vocabulary from_tokens(std::vector<std::string> tokens);

    int id_of(std::string_view token) const;
    const std::string& token_of(int id) const;
    size_t size() const { return tokens_.size(); }
    bool is_special(int id) const { return id >= 0 && id < kNumSpecials; }
    const std::vector<std::string>& tokens() const { return tokens_; }

    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> ids_;
};

// Task prefix, already normalized ("generating review comments :").
const std::vector<std::string>& comment_prefix();

// prefix ids + body ids + EOS, truncated to max_len with EOS forced last.
std::vector<int> encode(const std::vector<std::string>& body, const Vocabulary& vocab,
                        const std::vector<std::string>& prefix, size_t max_len);

// ids -> tokens, dropping PAD/EOS and the given number of prefix ids.
std::vector<std::string> decode_ids(const std::vector<int>& ids, const Vocabulary& vocab,
                                    size_t skip_prefix = 0);

}  // namespace revgen
