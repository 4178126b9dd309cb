#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "revgen/errors.hpp"

namespace revgen {

// Insertion-ordered JSON so emitted records keep a fixed field order.
using ojson = nlohmann::ordered_json;

inline std::vector<ojson> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<ojson> records;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            records.push_back(ojson::parse(line));
        } catch (const nlohmann::json::parse_error& e) {
            throw SchemaError(path.string() + ":" + std::to_string(line_no) +
                              ": bad JSON: " + e.what());
        }
    }
    return records;
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<ojson>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& r : records) {
        out << r.dump() << "\n";
    }
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return s;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

}  // namespace revgen
