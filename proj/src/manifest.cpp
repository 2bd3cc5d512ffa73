#include "manifest.hpp"

#include <filesystem>
#include <fstream>
#include <set>

#include <json.hpp>

#include "tensor.hpp"

namespace pvs {

namespace fs = std::filesystem;
using nlohmann::json;

void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records) {
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), "manifest: cannot open for write: " + path);
    for (const auto& r : records) {
        json j;
        j["id"] = r.id;
        j["audio"] = r.audio;
        if (!r.phonemes.empty()) j["phonemes"] = r.phonemes;
        if (!r.transcript.empty()) j["transcript"] = r.transcript;
        j["lang"] = r.lang;
        j["split"] = r.split;
        os << j.dump() << "\n";
    }
    require(static_cast<bool>(os), "manifest: write failed: " + path);
}

std::vector<ManifestRecord> read_manifest(const std::string& path, bool check_files) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), "manifest: cannot open: " + path);
    fs::path base = fs::path(path).parent_path();
    std::vector<ManifestRecord> out;
    std::set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        require(!j.is_discarded(), "manifest: invalid JSON at line " + std::to_string(lineno));
        ManifestRecord r;
        r.id = j.at("id").get<std::string>();
        r.audio = j.at("audio").get<std::string>();
        r.lang = j.at("lang").get<std::string>();
        r.split = j.at("split").get<std::string>();
        if (j.contains("phonemes")) r.phonemes = j["phonemes"].get<std::string>();
        if (j.contains("transcript")) r.transcript = j["transcript"].get<std::string>();
        require(ids.insert(r.id).second, "manifest: duplicate id: " + r.id);
        if (check_files)
            require(fs::exists(base / r.audio), "manifest: missing audio file: " + r.audio);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<ManifestRecord> filter_records(const std::vector<ManifestRecord>& records,
                                           const std::string& lang, const std::string& split) {
    std::vector<ManifestRecord> out;
    for (const auto& r : records)
        if ((lang.empty() || r.lang == lang) && (split.empty() || r.split == split))
            out.push_back(r);
    return out;
}

}  // namespace pvs
