#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace revgen::assets {

// Frequency-ranked lowercase wordlist, rank = index.
const std::vector<std::string>& wordlist();

// contraction/acronym -> expansion
std::string_view contractions_tsv();

// inflected form -> lemma
std::string_view lemma_exceptions_tsv();

// word -> tab-separated synonyms
std::string_view thesaurus_tsv();

// Parse a two-plus column TSV blob into rows of columns.
std::vector<std::vector<std::string>> parse_tsv(std::string_view blob);

}  // namespace revgen::assets
