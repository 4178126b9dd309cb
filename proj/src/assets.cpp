#include "revgen/assets.hpp"

#include <zlib.h>

#include <cstring>
#include <stdexcept>

#include "asset_contractions.inc"
#include "asset_lemma_exceptions.inc"
#include "asset_thesaurus.inc"
#include "asset_wordlist.inc"

namespace revgen::assets {

namespace {

std::string gunzip(const unsigned char* data, unsigned long len) {
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK) {
        throw std::runtime_error("inflateInit2 failed");
    }
    zs.next_in = const_cast<Bytef*>(data);
    zs.avail_in = static_cast<uInt>(len);
    std::string out;
    char buf[1 << 16];
    int ret;
    do {
        zs.next_out = reinterpret_cast<Bytef*>(buf);
        zs.avail_out = sizeof(buf);
        ret = inflate(&zs, Z_NO_FLUSH);
        if (ret != Z_OK && ret != Z_STREAM_END) {
            inflateEnd(&zs);
            throw std::runtime_error("corrupt gzip asset");
        }
        out.append(buf, sizeof(buf) - zs.avail_out);
    } while (ret != Z_STREAM_END);
    inflateEnd(&zs);
    return out;
}

}  // namespace

const std::vector<std::string>& wordlist() {
    static const std::vector<std::string> words = [] {
        std::string text = gunzip(kWordlistGz, kWordlistGz_len);
        std::vector<std::string> ws;
        ws.reserve(130000);
        size_t start = 0;
        while (start < text.size()) {
            size_t end = text.find('\n', start);
            if (end == std::string::npos) end = text.size();
            if (end > start) ws.emplace_back(text.substr(start, end - start));
            start = end + 1;
        }
        return ws;
    }();
    return words;
}

std::string_view contractions_tsv() {
    return {reinterpret_cast<const char*>(kContractionsTsv), kContractionsTsv_len};
}

std::string_view lemma_exceptions_tsv() {
    return {reinterpret_cast<const char*>(kLemmaExceptionsTsv), kLemmaExceptionsTsv_len};
}

std::string_view thesaurus_tsv() {
    return {reinterpret_cast<const char*>(kThesaurusTsv), kThesaurusTsv_len};
}

std::vector<std::vector<std::string>> parse_tsv(std::string_view blob) {
    std::vector<std::vector<std::string>> rows;
    size_t start = 0;
    while (start < blob.size()) {
        size_t end = blob.find('\n', start);
        if (end == std::string_view::npos) end = blob.size();
        std::string_view line = blob.substr(start, end - start);
        start = end + 1;
        if (line.empty()) continue;
        std::vector<std::string> cols;
        size_t p = 0;
        while (p <= line.size()) {
            size_t tab = line.find('\t', p);
            if (tab == std::string_view::npos) {
                cols.emplace_back(line.substr(p));
                break;
            }
            cols.emplace_back(line.substr(p, tab - p));
            p = tab + 1;
        }
        if (!cols.empty()) rows.push_back(std::move(cols));
    }
    return rows;
}

}  // namespace revgen::assets
