#include "quantizer.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace pvs {

Codebook codebook_from_labels(const std::vector<std::string>& lines) {
    require(lines.size() >= 2, "codebook: need at least one symbol plus <blank>");
    require(lines.back() == "<blank>", "codebook: final label line must be <blank>");
    Codebook cb;
    cb.labels.assign(lines.begin(), lines.end() - 1);
    cb.blank_index = static_cast<int>(cb.labels.size());
    std::set<std::string> seen;
    for (const auto& s : cb.labels) {
        require(!s.empty(), "codebook: empty label");
        require(s.find(' ') == std::string::npos, "codebook: label contains a space: " + s);
        require(seen.insert(s).second, "codebook: duplicate label: " + s);
    }
    return cb;
}

Codebook load_codebook_labels(const std::string& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), "codebook: cannot open labels file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        lines.push_back(line);
    }
    return codebook_from_labels(lines);
}

std::vector<std::string> split_ws(const std::string& line) {
    std::istringstream is(line);
    std::vector<std::string> out;
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

std::string join_ws(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += ' ';
        out += parts[i];
    }
    return out;
}

std::vector<std::string> tokens_to_symbols(const std::vector<int>& tokens, const Codebook& cb) {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (int t : tokens) {
        require(t >= 0 && t < cb.phonetic_count(), "tokens_to_symbols: token out of range");
        out.push_back(cb.labels[static_cast<std::size_t>(t)]);
    }
    return out;
}

std::vector<int> symbols_to_tokens(const std::vector<std::string>& symbols, const Codebook& cb) {
    std::vector<int> out;
    out.reserve(symbols.size());
    for (const auto& s : symbols) {
        int found = -1;
        for (std::size_t i = 0; i < cb.labels.size(); ++i)
            if (cb.labels[i] == s) {
                found = static_cast<int>(i);
                break;
            }
        require(found >= 0, "symbols_to_tokens: unknown symbol: " + s);
        out.push_back(found);
    }
    return out;
}

}  // namespace pvs
