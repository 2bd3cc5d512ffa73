#include "evalkit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "tensor.hpp"

namespace pvs {

namespace {

std::string lower_ascii(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> lower_all(const std::vector<std::string>& toks) {
    std::vector<std::string> out;
    out.reserve(toks.size());
    for (const auto& t : toks) out.push_back(lower_ascii(t));
    return out;
}

using NgramCounts = std::map<std::vector<std::string>, long>;

NgramCounts count_ngrams(const std::vector<std::string>& toks, std::size_t n) {
    NgramCounts counts;
    if (toks.size() < n) return counts;
    for (std::size_t i = 0; i + n <= toks.size(); ++i)
        ++counts[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
    return counts;
}

}  // namespace

EvalReport bleu(const std::vector<std::vector<std::string>>& hypotheses,
                const std::vector<std::vector<std::vector<std::string>>>& references) {
    require(hypotheses.size() == references.size(), "bleu: hypothesis/reference count mismatch");
    require(!hypotheses.empty(), "bleu: empty corpus");

    EvalReport rep;
    rep.utterances = hypotheses.size();
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        require(!references[i].empty(), "bleu: empty reference set at sentence " + std::to_string(i));
        std::vector<std::string> hyp = lower_all(hypotheses[i]);
        std::vector<std::vector<std::string>> refs;
        refs.reserve(references[i].size());
        for (const auto& r : references[i]) refs.push_back(lower_all(r));

        long hyp_len = static_cast<long>(hyp.size());
        rep.hyp_length += hyp_len;
        // closest reference length; on equal difference the first reference wins
        long closest = 0, closest_diff = -1;
        for (const auto& r : refs) {
            long diff = std::labs(static_cast<long>(r.size()) - hyp_len);
            if (closest_diff < 0 || diff < closest_diff) {
                closest_diff = diff;
                closest = static_cast<long>(r.size());
            }
        }
        rep.ref_length += closest;

        for (std::size_t n = 1; n <= 4; ++n) {
            NgramCounts hyp_counts = count_ngrams(hyp, n);
            NgramCounts max_ref;
            for (const auto& r : refs)
                for (const auto& [gram, cnt] : count_ngrams(r, n))
                    max_ref[gram] = std::max(max_ref[gram], cnt);
            long match = 0, total = 0;
            for (const auto& [gram, cnt] : hyp_counts) {
                total += cnt;
                auto it = max_ref.find(gram);
                if (it != max_ref.end()) match += std::min(cnt, it->second);
            }
            rep.matches[n - 1] += match;
            rep.totals[n - 1] += total;
        }
    }

    double log_sum = 0.0;
    bool zero = false;
    for (std::size_t n = 0; n < 4; ++n) {
        rep.precisions[n] =
            rep.totals[n] > 0 ? static_cast<double>(rep.matches[n]) / rep.totals[n] : 0.0;
        if (rep.precisions[n] <= 0.0)
            zero = true;
        else
            log_sum += std::log(rep.precisions[n]);
    }
    if (rep.hyp_length == 0) {
        rep.bleu = 0.0;
        rep.brevity_penalty = 0.0;
        return rep;
    }
    rep.brevity_penalty =
        rep.hyp_length < rep.ref_length
            ? std::exp(1.0 - static_cast<double>(rep.ref_length) / rep.hyp_length)
            : 1.0;
    rep.bleu = zero ? 0.0 : 100.0 * rep.brevity_penalty * std::exp(log_sum / 4.0);
    return rep;
}

std::string EvalReport::to_text() const {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "BLEU = %.2f, %.1f/%.1f/%.1f/%.1f (BP=%.3f, ratio=%.3f, hyp_len=%ld, ref_len=%ld)",
                  bleu, 100.0 * precisions[0], 100.0 * precisions[1], 100.0 * precisions[2],
                  100.0 * precisions[3], brevity_penalty,
                  ref_length > 0 ? static_cast<double>(hyp_length) / ref_length : 0.0, hyp_length,
                  ref_length);
    os << buf << "\n";
    os << "utterances: " << utterances << "\n";
    for (std::size_t n = 0; n < 4; ++n)
        os << (n + 1) << "-gram: " << matches[n] << "/" << totals[n] << "\n";
    return os.str();
}

std::string EvalReport::to_kv() const {
    std::ostringstream os;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", bleu);
    os << "bleu = " << buf << "\n";
    std::snprintf(buf, sizeof(buf), "%.10g", brevity_penalty);
    os << "brevity_penalty = " << buf << "\n";
    for (std::size_t n = 0; n < 4; ++n) {
        os << "match_" << (n + 1) << " = " << matches[n] << "\n";
        os << "total_" << (n + 1) << " = " << totals[n] << "\n";
    }
    os << "hyp_length = " << hyp_length << "\n";
    os << "ref_length = " << ref_length << "\n";
    os << "utterances = " << utterances << "\n";
    return os.str();
}

namespace {

template <typename Tok>
std::size_t lev_impl(const std::vector<Tok>& a, const std::vector<Tok>& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

std::size_t levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
    return lev_impl(a, b);
}
std::size_t levenshtein(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    return lev_impl(a, b);
}

double per(const std::vector<int>& hyp, const std::vector<int>& ref) {
    require(!ref.empty(), "per: empty reference");
    return static_cast<double>(levenshtein(hyp, ref)) / static_cast<double>(ref.size());
}

double corpus_per(const std::vector<std::vector<int>>& hyps,
                  const std::vector<std::vector<int>>& refs) {
    require(hyps.size() == refs.size(), "corpus_per: size mismatch");
    std::size_t edits = 0, len = 0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        require(!refs[i].empty(), "corpus_per: empty reference");
        edits += levenshtein(hyps[i], refs[i]);
        len += refs[i].size();
    }
    return static_cast<double>(edits) / static_cast<double>(len);
}

}  // namespace pvs
