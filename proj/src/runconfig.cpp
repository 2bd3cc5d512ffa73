#include "runconfig.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace pvs {

namespace {

struct KeySpec {
    const char* key;
    const char* value;
    const char* comment;
};

// Canonical key set; order defines the emitted file layout.
const KeySpec kKeys[] = {
    {"seed", "12345", "master seed; fixes corpora, initialization and batch order"},
    {"signal.sample_rate", "16000", "Hz; inputs must already match"},
    {"signal.frame_ms", "50", "analysis frame size in milliseconds"},
    {"signal.hop_ms", "12.5", "hop size in milliseconds"},
    {"signal.num_mels", "80", "mel filterbank size"},
    {"signal.fft_size", "1024", "FFT size; must cover one frame"},
    {"signal.mel_fmin", "0", "Hz"},
    {"signal.mel_fmax", "8000", "Hz"},
    {"signal.log_floor_eps", "1e-5", "log compression: ln(mag + eps)"},
    {"signal.griffin_lim_iters", "60", "phase reconstruction iterations"},
    {"model.hidden_size", "256", "transformer width; also the token embedding size D"},
    {"model.ffn_size", "1024", "feed-forward inner size"},
    {"model.num_blocks", "6", "transformer blocks per stack"},
    {"model.num_heads", "4", "attention heads"},
    {"model.conv_kernel", "3", "conv kernel size"},
    {"model.conv_stride", "2", "conv stride per layer"},
    {"model.conv_filters", "256", "conv channels; must equal model.hidden_size"},
    {"model.num_conv_layers", "2", "down/up-sampling layers; ratio c = stride^layers"},
    {"model.dropout", "0.1", "dropout rate in transformer sublayers"},
    {"codebook.size", "177", "number of phonetic tokens K (a blank row is added)"},
    {"codebook.labels", "data/ipa_codebook.txt", "IPA symbol file, one per line, <blank> last"},
    {"xlvae.lambda", "0.01", "weight of the recognition loss"},
    {"xlvae.steps", "2000", "training steps"},
    {"xlvae.batch_frames", "2400", "frames per step, split evenly between branches"},
    {"xlvae.straight_through", "true", "copy reconstruction gradients across the argmax"},
    {"xlvae.checkpoint_interval", "500", "steps between checkpoints"},
    {"xlvae.resume", "false", "continue from the output checkpoint when present"},
    {"xlvae.eval_interval", "250", "steps between metric lines"},
    {"translator.steps", "3000", "training steps"},
    {"translator.batch_frames", "2400", "source frames per step"},
    {"translator.checkpoint_interval", "1000", "steps between checkpoints"},
    {"translator.resume", "false", "continue from the output checkpoint when present"},
    {"translator.eval_interval", "250", "steps between metric lines"},
    {"beam.size", "4", "beam width"},
    {"beam.length_penalty", "1.0", "GNMT alpha"},
    {"beam.max_len_factor", "2.0", "max output length over encoder length"},
    {"optim.lr_factor", "1.0", "scale on the inverse-sqrt schedule"},
    {"optim.warmup_steps", "4000", "linear warmup steps"},
    {"optim.beta1", "0.9", ""},
    {"optim.beta2", "0.98", ""},
    {"optim.eps", "1e-9", ""},
    {"toy.num_phonemes", "20", "inventory size drawn from the label file"},
    {"toy.words_per_lang", "12", ""},
    {"toy.word_min_phonemes", "2", ""},
    {"toy.word_max_phonemes", "4", ""},
    {"toy.sentence_min_words", "2", ""},
    {"toy.sentence_max_words", "5", ""},
    {"toy.train_size", "500", "sentences per corpus"},
    {"toy.dev_size", "50", ""},
    {"toy.test_size", "50", ""},
    {"toy.unit_ms", "100", "per-phoneme duration"},
    {"toy.crossfade_ms", "10", "linear cross-fade across phoneme boundaries"},
    {"toy.overlap_fraction", "1.0", "share of the target inventory reused by the written language"},
};

// internal keys allowed beyond the canonical set
const char* const kInternalKeys[] = {"codebook.labels_inline"};

bool known_key(const std::string& key) {
    for (const auto& k : kKeys)
        if (key == k.key) return true;
    for (const auto* k : kInternalKeys)
        if (key == k) return true;
    return false;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig RunConfig::defaults() {
    RunConfig cfg;
    for (const auto& k : kKeys) cfg.values_[k.key] = k.value;
    return cfg;
}

RunConfig RunConfig::from_text(const std::string& text) {
    RunConfig cfg = defaults();
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: missing '=' at line " + std::to_string(lineno));
        cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("config: cannot open " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return from_text(buf.str());
}

void RunConfig::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("config: cannot open for write " + path);
    os << to_annotated_text();
    if (!os) throw ConfigError("config: write failed " + path);
}

std::string RunConfig::to_text() const {
    std::ostringstream os;
    for (const auto& k : kKeys) os << k.key << " = " << values_.at(k.key) << "\n";
    for (const auto* k : kInternalKeys) {
        auto it = values_.find(k);
        if (it != values_.end()) os << k << " = " << it->second << "\n";
    }
    return os.str();
}

std::string RunConfig::to_annotated_text() const {
    std::ostringstream os;
    std::string section;
    for (const auto& k : kKeys) {
        std::string key = k.key;
        std::string sec = key.substr(0, key.find('.'));
        if (sec != section) {
            if (!section.empty()) os << "\n";
            section = sec;
        }
        if (k.comment[0]) os << "# " << k.comment << "\n";
        os << key << " = " << values_.at(key) << "\n";
    }
    return os.str();
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!known_key(key)) throw ConfigError("config: unknown key: " + key);
    values_[key] = value;
}

std::string RunConfig::get_str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("config: missing key: " + key);
    return it->second;
}

long RunConfig::get_int(const std::string& key) const {
    const std::string v = get_str(key);
    try {
        std::size_t pos = 0;
        long out = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + " is not an integer: " + v);
    }
}

double RunConfig::get_double(const std::string& key) const {
    const std::string v = get_str(key);
    try {
        std::size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: " + key + " is not a number: " + v);
    }
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string v = get_str(key);
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError("config: " + key + " is not a boolean: " + v);
}

SignalConfig RunConfig::signal_config() const {
    SignalConfig s;
    s.sample_rate = static_cast<int>(get_int("signal.sample_rate"));
    s.frame_ms = get_double("signal.frame_ms");
    s.hop_ms = get_double("signal.hop_ms");
    s.num_mels = static_cast<int>(get_int("signal.num_mels"));
    s.fft_size = static_cast<int>(get_int("signal.fft_size"));
    s.mel_fmin = get_double("signal.mel_fmin");
    s.mel_fmax = get_double("signal.mel_fmax");
    s.log_floor_eps = get_double("signal.log_floor_eps");
    s.griffin_lim_iters = static_cast<int>(get_int("signal.griffin_lim_iters"));
    return s;
}

BlockConfig RunConfig::block_config() const {
    BlockConfig b;
    b.hidden_size = static_cast<int>(get_int("model.hidden_size"));
    b.ffn_size = static_cast<int>(get_int("model.ffn_size"));
    b.num_blocks = static_cast<int>(get_int("model.num_blocks"));
    b.num_heads = static_cast<int>(get_int("model.num_heads"));
    b.conv_kernel = static_cast<int>(get_int("model.conv_kernel"));
    b.conv_stride = static_cast<int>(get_int("model.conv_stride"));
    b.conv_filters = static_cast<int>(get_int("model.conv_filters"));
    b.num_conv_layers = static_cast<int>(get_int("model.num_conv_layers"));
    b.dropout = get_double("model.dropout");
    return b;
}

XlVaeTrainConfig RunConfig::xlvae_config() const {
    XlVaeTrainConfig c;
    c.lambda = get_double("xlvae.lambda");
    c.steps = get_int("xlvae.steps");
    c.batch_frames = get_int("xlvae.batch_frames");
    c.seed = seed();
    c.straight_through = get_bool("xlvae.straight_through");
    c.checkpoint_interval = get_int("xlvae.checkpoint_interval");
    c.eval_interval = get_int("xlvae.eval_interval");
    c.lr_factor = get_double("optim.lr_factor");
    c.warmup_steps = static_cast<int>(get_int("optim.warmup_steps"));
    return c;
}

TranslatorTrainConfig RunConfig::translator_config() const {
    TranslatorTrainConfig c;
    c.steps = get_int("translator.steps");
    c.batch_frames = get_int("translator.batch_frames");
    c.seed = seed() + 1;
    c.lr_factor = get_double("optim.lr_factor");
    c.warmup_steps = static_cast<int>(get_int("optim.warmup_steps"));
    c.checkpoint_interval = get_int("translator.checkpoint_interval");
    c.eval_interval = get_int("translator.eval_interval");
    return c;
}

BeamConfig RunConfig::beam_config() const {
    BeamConfig b;
    b.beam_size = static_cast<int>(get_int("beam.size"));
    b.length_penalty = get_double("beam.length_penalty");
    b.max_len_factor = get_double("beam.max_len_factor");
    return b;
}

ToySpec RunConfig::toy_spec() const {
    ToySpec t;
    t.num_phonemes = static_cast<int>(get_int("toy.num_phonemes"));
    t.words_per_lang = static_cast<int>(get_int("toy.words_per_lang"));
    t.word_min_phonemes = static_cast<int>(get_int("toy.word_min_phonemes"));
    t.word_max_phonemes = static_cast<int>(get_int("toy.word_max_phonemes"));
    t.sentence_min_words = static_cast<int>(get_int("toy.sentence_min_words"));
    t.sentence_max_words = static_cast<int>(get_int("toy.sentence_max_words"));
    t.train_size = static_cast<int>(get_int("toy.train_size"));
    t.dev_size = static_cast<int>(get_int("toy.dev_size"));
    t.test_size = static_cast<int>(get_int("toy.test_size"));
    t.unit_ms = get_double("toy.unit_ms");
    t.crossfade_ms = get_double("toy.crossfade_ms");
    t.overlap_fraction = get_double("toy.overlap_fraction");
    t.seed = seed();
    t.sample_rate = static_cast<int>(get_int("signal.sample_rate"));
    return t;
}

void RunConfig::validate() const {
    signal_config().validate();
    block_config().validate();
    xlvae_config().validate();
    beam_config().validate();
    toy_spec().validate();
    require(get_int("codebook.size") >= 2, "config: codebook.size must be >= 2");
    require(get_int("toy.num_phonemes") <= get_int("codebook.size"),
            "config: toy inventory larger than the codebook");
}

}  // namespace pvs
