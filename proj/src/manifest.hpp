#pragma once

#include <string>
#include <vector>

namespace pvs {

// One corpus item. `audio` is relative to the manifest's directory;
// `phonemes` and `transcript` are space-separated token strings and may be
// empty.
struct ManifestRecord {
    std::string id;
    std::string audio;
    std::string phonemes;
    std::string transcript;
    std::string lang;   // "src" | "tgt" | "wr"
    std::string split;  // "train" | "dev" | "test"
};

void write_manifest(const std::string& path, const std::vector<ManifestRecord>& records);

// Validates unique ids and, when check_files is set, that every referenced
// audio file exists next to the manifest.
std::vector<ManifestRecord> read_manifest(const std::string& path, bool check_files = true);

std::vector<ManifestRecord> filter_records(const std::vector<ManifestRecord>& records,
                                           const std::string& lang, const std::string& split);

}  // namespace pvs
