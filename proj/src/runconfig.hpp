#pragma once

#include <map>
#include <string>
#include <vector>

#include "nn.hpp"
#include "signal.hpp"
#include "toycorpus.hpp"
#include "translator.hpp"
#include "xlvae.hpp"

namespace pvs {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

// Flat dotted-key configuration; one file drives every stage. Unknown keys
// are rejected so typos in overrides fail loudly.
class RunConfig {
public:
    static RunConfig defaults();
    static RunConfig from_text(const std::string& text);
    static RunConfig load(const std::string& path);

    void save(const std::string& path) const;
    std::string to_text() const;          // canonical order, no comments
    std::string to_annotated_text() const;  // init-config output with comments

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value);
    std::string get_str(const std::string& key) const;
    long get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    std::uint64_t seed() const { return static_cast<std::uint64_t>(get_int("seed")); }
    SignalConfig signal_config() const;
    BlockConfig block_config() const;
    XlVaeTrainConfig xlvae_config() const;
    TranslatorTrainConfig translator_config() const;
    BeamConfig beam_config() const;
    ToySpec toy_spec() const;

    template <typename T>
    AdamOptimizer<T> optimizer(int hidden_size) const {
        AdamOptimizer<T> opt;
        opt.beta1 = static_cast<T>(get_double("optim.beta1"));
        opt.beta2 = static_cast<T>(get_double("optim.beta2"));
        opt.eps = static_cast<T>(get_double("optim.eps"));
        opt.lr_factor = static_cast<T>(get_double("optim.lr_factor"));
        opt.warmup_steps = static_cast<int>(get_int("optim.warmup_steps"));
        opt.hidden_size = hidden_size;
        return opt;
    }

    void validate() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace pvs
