#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace testutil {

// Scratch directory removed on destruction.
struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag) {
        path = std::filesystem::temp_directory_path() /
               ("pvs_test_" + tag + "_" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

// Raw 16-bit PCM WAV writer, independent of the library's writer.
inline void write_pcm16_wav(const std::string& path, const std::vector<std::int16_t>& samples,
                            int sample_rate, int channels = 1, std::uint16_t format_tag = 1,
                            int bits = 16) {
    std::ofstream os(path, std::ios::binary);
    auto u32 = [&](std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
    auto u16 = [&](std::uint16_t v) { os.write(reinterpret_cast<const char*>(&v), 2); };
    std::uint32_t data_len = static_cast<std::uint32_t>(samples.size() * 2);
    os.write("RIFF", 4);
    u32(36 + data_len);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    u32(16);
    u16(format_tag);
    u16(static_cast<std::uint16_t>(channels));
    u32(static_cast<std::uint32_t>(sample_rate));
    u32(static_cast<std::uint32_t>(sample_rate * channels * bits / 8));
    u16(static_cast<std::uint16_t>(channels * bits / 8));
    u16(static_cast<std::uint16_t>(bits));
    os.write("data", 4);
    u32(data_len);
    for (std::int16_t s : samples) os.write(reinterpret_cast<const char*>(&s), 2);
}

inline std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

inline void spit(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    os << content;
}

}  // namespace testutil
