#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "signal.hpp"
#include "testutil.hpp"

using namespace pvs;

namespace {

Waveform sine_wave(double freq, double seconds, int sr = 16000, float amp = 0.5f) {
    Waveform w;
    w.sample_rate = sr;
    std::size_t n = static_cast<std::size_t>(seconds * sr);
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        w.samples[i] = amp * static_cast<float>(std::sin(2.0 * M_PI * freq * i / sr));
    return w;
}

double rms(const std::vector<float>& s) {
    double acc = 0;
    for (float v : s) acc += static_cast<double>(v) * v;
    return std::sqrt(acc / std::max<std::size_t>(s.size(), 1));
}

}  // namespace

TEST_CASE("load_wav reads a one-second 16 kHz file") {
    testutil::TempDir tmp("wav");
    std::vector<std::int16_t> pcm(16000);
    for (std::size_t i = 0; i < pcm.size(); ++i)
        pcm[i] = static_cast<std::int16_t>(8000 * std::sin(2.0 * M_PI * 440.0 * i / 16000.0));
    testutil::write_pcm16_wav(tmp.file("a.wav"), pcm, 16000);
    Waveform w = load_wav(tmp.file("a.wav"));
    CHECK(w.samples.size() == 16000);
    CHECK(w.sample_rate == 16000);
    for (float s : w.samples) {
        CHECK(s >= -1.0f);
        CHECK(s <= 1.0f);
    }
}

TEST_CASE("load_wav: all-zero PCM gives all-zero samples") {
    testutil::TempDir tmp("wav0");
    testutil::write_pcm16_wav(tmp.file("z.wav"), std::vector<std::int16_t>(800, 0), 16000);
    Waveform w = load_wav(tmp.file("z.wav"));
    for (float s : w.samples) CHECK(s == 0.0f);
}

TEST_CASE("load_wav rejects stereo and non-PCM encodings by name") {
    testutil::TempDir tmp("wavbad");
    testutil::write_pcm16_wav(tmp.file("st.wav"), std::vector<std::int16_t>(64, 0), 16000,
                              /*channels=*/2);
    CHECK_THROWS_WITH_AS(load_wav(tmp.file("st.wav")),
                         doctest::Contains("mono"), FormatError);
    testutil::write_pcm16_wav(tmp.file("f.wav"), std::vector<std::int16_t>(64, 0), 16000,
                              /*channels=*/1, /*format_tag=*/3);
    CHECK_THROWS_WITH_AS(load_wav(tmp.file("f.wav")), doctest::Contains("PCM"), FormatError);
    CHECK_THROWS_AS(load_wav(tmp.file("missing.wav")), FormatError);
}

TEST_CASE("wav round trip through the library writer") {
    testutil::TempDir tmp("wavrt");
    Waveform w = sine_wave(440.0, 0.25);
    save_wav(tmp.file("t.wav"), w);
    Waveform r = load_wav(tmp.file("t.wav"));
    CHECK(r.samples.size() == w.samples.size());
    double err = 0;
    for (std::size_t i = 0; i < r.samples.size(); ++i)
        err = std::max(err, std::abs(static_cast<double>(r.samples[i]) - w.samples[i]));
    CHECK(err < 1.0 / 16384.0);
}

TEST_CASE("framing: 50 ms frames and 12.5 ms hops at 16 kHz") {
    SignalConfig cfg;
    CHECK(cfg.frame_length() == 800);
    CHECK(cfg.hop_length() == 200);
    CHECK(frame_count(16000, cfg) == 77);   // ceil((16000-800)/200)+1
    CHECK(frame_count(800, cfg) == 1);
    CHECK(frame_count(801, cfg) == 2);      // tail is zero-padded
    CHECK_THROWS(frame_count(799, cfg));
}

TEST_CASE("zero waveform maps every mel entry to the log floor") {
    SignalConfig cfg;
    Waveform w;
    w.samples.assign(1600, 0.0f);
    MelSpectrogram mel = mel_spectrogram(w, cfg);
    CHECK(mel.num_frames() == 5);
    CHECK(mel.num_mels() == 80);
    float floor = static_cast<float>(cfg.log_floor());
    for (float v : mel.frames.data) CHECK(v == floor);
}

TEST_CASE("1 kHz tone: per-frame argmax equals the filter with center nearest 1 kHz") {
    SignalConfig cfg;
    // oracle: mel-spaced center frequencies computed directly
    double mel_min = 2595.0 * std::log10(1.0 + cfg.mel_fmin / 700.0);
    double mel_max = 2595.0 * std::log10(1.0 + cfg.mel_fmax / 700.0);
    int nearest = -1;
    double best = 1e18;
    for (int m = 0; m < cfg.num_mels; ++m) {
        double mel = mel_min + (mel_max - mel_min) * (m + 1) / (cfg.num_mels + 1);
        double hz = 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
        if (std::abs(hz - 1000.0) < best) {
            best = std::abs(hz - 1000.0);
            nearest = m;
        }
    }
    MelSpectrogram mel = mel_spectrogram(sine_wave(1000.0, 0.5), cfg);
    for (std::size_t t = 0; t < mel.num_frames(); ++t) {
        int argmax = 0;
        for (int m = 1; m < cfg.num_mels; ++m)
            if (mel.frames.at(t, m) > mel.frames.at(t, argmax)) argmax = m;
        CHECK(argmax == nearest);
    }
}

TEST_CASE("mel extraction is deterministic bit for bit") {
    SignalConfig cfg;
    Waveform w = sine_wave(740.0, 0.3);
    MelSpectrogram a = mel_spectrogram(w, cfg);
    MelSpectrogram b = mel_spectrogram(w, cfg);
    CHECK(a.frames.data == b.frames.data);
}

TEST_CASE("mel outputs are finite for finite inputs") {
    SignalConfig cfg;
    Waveform w = sine_wave(3700.0, 0.2, 16000, 1.0f);
    MelSpectrogram mel = mel_spectrogram(w, cfg);
    CHECK(mel.frames.all_finite());
}

TEST_CASE("griffin-lim: silent mel gives near-silent audio") {
    SignalConfig cfg;
    cfg.griffin_lim_iters = 5;
    MelSpectrogram mel;
    mel.frames = Tensor<float>(20, 80, static_cast<float>(cfg.log_floor()));
    Waveform w = griffin_lim(mel, cfg, 1);
    CHECK(rms(w.samples) < 1e-4);
}

TEST_CASE("griffin-lim output length matches the framing inverse") {
    SignalConfig cfg;
    cfg.griffin_lim_iters = 2;
    Waveform in = sine_wave(440.0, 0.2);  // 3200 samples -> 13 frames
    MelSpectrogram mel = mel_spectrogram(in, cfg);
    Waveform out = griffin_lim(mel, cfg, 7);
    std::size_t expect = (mel.num_frames() - 1) * 200 + 800;
    CHECK(out.samples.size() == expect);
    CHECK(expect >= in.samples.size());
    CHECK(expect < in.samples.size() + 200);
    for (float v : out.samples) CHECK(std::isfinite(v));
}

TEST_CASE("griffin-lim: 440 Hz tone round trip converges and is monotone in iterations") {
    SignalConfig cfg;
    Waveform tone = sine_wave(440.0, 0.4);
    MelSpectrogram mel = mel_spectrogram(tone, cfg);
    Tensor<double> linmag = mel_to_linear(mel, cfg);

    auto run_err = [&](int iters, std::uint64_t seed) {
        SignalConfig c2 = cfg;
        c2.griffin_lim_iters = iters;
        Waveform out = griffin_lim(mel, c2, seed);
        std::vector<double> x(out.samples.begin(), out.samples.end());
        return spectral_convergence(x, linmag, cfg);
    };

    double err1 = run_err(1, 11);
    double err60 = run_err(60, 11);
    MESSAGE("griffin-lim spectral convergence: iters=1 -> ", err1, ", iters=60 -> ", err60);
    CHECK(err60 <= err1);
    // threshold frozen from the first oracle run of this fixture:
    // err1 = 0.3705, err60 = 0.1930; kept with margin
    CHECK(err60 < 0.30);
}

TEST_CASE("griffin-lim is deterministic given the seed") {
    SignalConfig cfg;
    cfg.griffin_lim_iters = 3;
    MelSpectrogram mel = mel_spectrogram(sine_wave(523.0, 0.2), cfg);
    Waveform a = griffin_lim(mel, cfg, 42);
    Waveform b = griffin_lim(mel, cfg, 42);
    CHECK(a.samples == b.samples);
}

TEST_CASE("mel feature file round trip") {
    testutil::TempDir tmp("melio");
    SignalConfig cfg;
    MelSpectrogram mel = mel_spectrogram(sine_wave(880.0, 0.15), cfg);
    save_mel(tmp.file("x.mel"), mel);
    MelSpectrogram r = load_mel(tmp.file("x.mel"));
    CHECK(r.frames.data == mel.frames.data);
    CHECK(r.frame_ms == mel.frame_ms);
    CHECK(r.hop_ms == mel.hop_ms);
    CHECK_THROWS_AS(load_mel(tmp.file("missing.mel")), FormatError);
}
