#include "signal.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <random>

#include <Eigen/Dense>
#include <fftw3.h>

namespace pvs {

void SignalConfig::validate() const {
    require(sample_rate > 0, "signal config: sample_rate must be positive");
    require(frame_ms > 0 && hop_ms > 0, "signal config: frame/hop must be positive");
    require(num_mels > 0, "signal config: num_mels must be positive");
    require(fft_size >= frame_length(), "signal config: fft_size smaller than frame length");
    require(mel_fmin < mel_fmax && mel_fmax <= sample_rate / 2.0 + 1e-9,
            "signal config: mel band out of range");
    require(log_floor_eps > 0, "signal config: log_floor_eps must be positive");
    require(griffin_lim_iters >= 1, "signal config: griffin_lim_iters must be >= 1");
}

// ---- WAV ----

namespace {

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

Waveform load_wav(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("wav: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw FormatError("wav: not a RIFF/WAVE file: " + path);

    bool have_fmt = false;
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t sample_rate = 0;
    const unsigned char* data_ptr = nullptr;
    std::size_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* hdr = bytes.data() + pos;
        std::uint32_t chunk_len = read_u32(hdr + 4);
        const unsigned char* body = hdr + 8;
        if (pos + 8 + chunk_len > bytes.size()) throw FormatError("wav: truncated chunk in " + path);
        if (std::memcmp(hdr, "fmt ", 4) == 0) {
            if (chunk_len < 16) throw FormatError("wav: short fmt chunk");
            format = read_u16(body);
            channels = read_u16(body + 2);
            sample_rate = read_u32(body + 4);
            bits = read_u16(body + 14);
            have_fmt = true;
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            data_ptr = body;
            data_len = chunk_len;
        }
        pos += 8 + chunk_len + (chunk_len & 1);
    }
    if (!have_fmt || data_ptr == nullptr) throw FormatError("wav: missing fmt or data chunk");
    if (format != 1) throw FormatError("wav: unsupported encoding (not PCM, format tag " +
                                       std::to_string(format) + ")");
    if (channels != 1)
        throw FormatError("wav: unsupported encoding (expected mono, got " +
                          std::to_string(channels) + " channels)");
    if (bits != 16) throw FormatError("wav: unsupported encoding (expected 16-bit, got " +
                                      std::to_string(bits) + ")");

    Waveform w;
    w.sample_rate = static_cast<int>(sample_rate);
    std::size_t n = data_len / 2;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::int16_t v = static_cast<std::int16_t>(data_ptr[2 * i] | (data_ptr[2 * i + 1] << 8));
        w.samples[i] = static_cast<float>(v) / 32768.0f;
    }
    return w;
}

void save_wav(const std::string& path, const Waveform& w) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("wav: cannot open for write " + path);
    auto u32 = [&](std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); };
    auto u16 = [&](std::uint16_t v) { os.write(reinterpret_cast<const char*>(&v), 2); };
    std::uint32_t data_len = static_cast<std::uint32_t>(w.samples.size() * 2);
    os.write("RIFF", 4);
    u32(36 + data_len);
    os.write("WAVE", 4);
    os.write("fmt ", 4);
    u32(16);
    u16(1);  // PCM
    u16(1);  // mono
    u32(static_cast<std::uint32_t>(w.sample_rate));
    u32(static_cast<std::uint32_t>(w.sample_rate) * 2);
    u16(2);
    u16(16);
    os.write("data", 4);
    u32(data_len);
    for (float s : w.samples) {
        float c = std::clamp(s, -1.0f, 1.0f);
        std::int16_t v = static_cast<std::int16_t>(std::lround(c * 32767.0f));
        os.write(reinterpret_cast<const char*>(&v), 2);
    }
    if (!os) throw FormatError("wav: write failed " + path);
}

// ---- STFT ----

namespace {

// FFTW's planner is not thread-safe; executions are.
std::mutex g_fftw_mutex;

struct FftPlans {
    int n;
    fftw_plan fwd;
    fftw_plan inv;
    double* real_buf;
    fftw_complex* cplx_buf;

    explicit FftPlans(int fft_size) : n(fft_size) {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        real_buf = fftw_alloc_real(n);
        cplx_buf = fftw_alloc_complex(n / 2 + 1);
        fwd = fftw_plan_dft_r2c_1d(n, real_buf, cplx_buf, FFTW_ESTIMATE);
        inv = fftw_plan_dft_c2r_1d(n, cplx_buf, real_buf, FFTW_ESTIMATE);
    }
    ~FftPlans() {
        std::lock_guard<std::mutex> lock(g_fftw_mutex);
        fftw_destroy_plan(fwd);
        fftw_destroy_plan(inv);
        fftw_free(real_buf);
        fftw_free(cplx_buf);
    }
    FftPlans(const FftPlans&) = delete;
    FftPlans& operator=(const FftPlans&) = delete;
};

// Periodic Hann window.
std::vector<double> hann_window(int n) {
    std::vector<double> w(n);
    for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
    return w;
}

}  // namespace

std::size_t frame_count(std::size_t num_samples, const SignalConfig& cfg) {
    std::size_t frame_len = static_cast<std::size_t>(cfg.frame_length());
    std::size_t hop = static_cast<std::size_t>(cfg.hop_length());
    require(num_samples >= frame_len, "signal: waveform shorter than one frame");
    return (num_samples - frame_len + hop - 1) / hop + 1;
}

Spectrogram stft(const std::vector<double>& samples, const SignalConfig& cfg) {
    cfg.validate();
    int frame_len = cfg.frame_length();
    int hop = cfg.hop_length();
    std::size_t frames = frame_count(samples.size(), cfg);
    std::size_t bins = static_cast<std::size_t>(cfg.fft_size / 2 + 1);
    auto window = hann_window(frame_len);
    FftPlans plans(cfg.fft_size);

    Spectrogram spec;
    spec.frames.assign(frames, std::vector<std::complex<double>>(bins));
    for (std::size_t t = 0; t < frames; ++t) {
        std::size_t start = t * hop;
        for (int i = 0; i < cfg.fft_size; ++i) plans.real_buf[i] = 0.0;
        for (int i = 0; i < frame_len; ++i) {
            std::size_t idx = start + i;
            double s = idx < samples.size() ? samples[idx] : 0.0;
            plans.real_buf[i] = s * window[i];
        }
        fftw_execute(plans.fwd);
        for (std::size_t b = 0; b < bins; ++b)
            spec.frames[t][b] = {plans.cplx_buf[b][0], plans.cplx_buf[b][1]};
    }
    return spec;
}

// Least-squares inverse: windowed overlap-add normalized by the summed
// squared window.
std::vector<double> istft(const Spectrogram& spec, const SignalConfig& cfg) {
    int frame_len = cfg.frame_length();
    int hop = cfg.hop_length();
    std::size_t frames = spec.frames.size();
    require(frames >= 1, "istft: empty spectrogram");
    std::size_t out_len = (frames - 1) * static_cast<std::size_t>(hop) + frame_len;
    auto window = hann_window(frame_len);
    FftPlans plans(cfg.fft_size);

    std::vector<double> acc(out_len, 0.0), norm(out_len, 0.0);
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t b = 0; b < spec.frames[t].size(); ++b) {
            plans.cplx_buf[b][0] = spec.frames[t][b].real();
            plans.cplx_buf[b][1] = spec.frames[t][b].imag();
        }
        fftw_execute(plans.inv);
        std::size_t start = t * hop;
        for (int i = 0; i < frame_len; ++i) {
            double v = plans.real_buf[i] / cfg.fft_size;  // FFTW c2r is unnormalized
            acc[start + i] += window[i] * v;
            norm[start + i] += window[i] * window[i];
        }
    }
    for (std::size_t i = 0; i < out_len; ++i) acc[i] /= std::max(norm[i], 1e-10);
    return acc;
}

Tensor<double> magnitude(const Spectrogram& spec) {
    std::size_t frames = spec.frames.size();
    std::size_t bins = frames ? spec.frames[0].size() : 0;
    Tensor<double> mag(frames, bins);
    for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t b = 0; b < bins; ++b) mag.at(t, b) = std::abs(spec.frames[t][b]);
    return mag;
}

// ---- mel ----

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Tensor<double> mel_filterbank(const SignalConfig& cfg) {
    std::size_t bins = static_cast<std::size_t>(cfg.fft_size / 2 + 1);
    Tensor<double> fb(static_cast<std::size_t>(cfg.num_mels), bins);
    double mel_min = hz_to_mel(cfg.mel_fmin);
    double mel_max = hz_to_mel(cfg.mel_fmax);
    std::vector<double> corners(cfg.num_mels + 2);
    for (int i = 0; i < cfg.num_mels + 2; ++i)
        corners[i] = mel_to_hz(mel_min + (mel_max - mel_min) * i / (cfg.num_mels + 1));
    for (int m = 0; m < cfg.num_mels; ++m) {
        double left = corners[m], center = corners[m + 1], right = corners[m + 2];
        for (std::size_t b = 0; b < bins; ++b) {
            double freq = static_cast<double>(b) * cfg.sample_rate / cfg.fft_size;
            double v = 0.0;
            if (freq > left && freq <= center)
                v = (freq - left) / (center - left);
            else if (freq > center && freq < right)
                v = (right - freq) / (right - center);
            fb.at(m, b) = v;
        }
    }
    return fb;
}

MelSpectrogram mel_spectrogram(const Waveform& w, const SignalConfig& cfg) {
    cfg.validate();
    require(!w.samples.empty(), "mel: empty waveform");
    require(w.sample_rate == cfg.sample_rate, "mel: sample rate mismatch");
    for (float s : w.samples) require(std::isfinite(s), "mel: non-finite sample");

    std::vector<double> samples(w.samples.begin(), w.samples.end());
    Spectrogram spec = stft(samples, cfg);
    Tensor<double> mag = magnitude(spec);
    Tensor<double> fb = mel_filterbank(cfg);

    MelSpectrogram mel;
    mel.frame_ms = cfg.frame_ms;
    mel.hop_ms = cfg.hop_ms;
    mel.frames = Tensor<float>(mag.rows(), static_cast<std::size_t>(cfg.num_mels));
    for (std::size_t t = 0; t < mag.rows(); ++t)
        for (int m = 0; m < cfg.num_mels; ++m) {
            double acc = 0.0;
            for (std::size_t b = 0; b < mag.cols(); ++b) acc += fb.at(m, b) * mag.at(t, b);
            mel.frames.at(t, m) = static_cast<float>(std::log(acc + cfg.log_floor_eps));
        }
    return mel;
}

Tensor<double> mel_to_linear(const MelSpectrogram& mel, const SignalConfig& cfg) {
    Tensor<double> fb = mel_filterbank(cfg);  // [mels, bins]
    Eigen::MatrixXd fbm(fb.rows(), fb.cols());
    for (std::size_t r = 0; r < fb.rows(); ++r)
        for (std::size_t c = 0; c < fb.cols(); ++c) fbm(r, c) = fb.at(r, c);
    Eigen::MatrixXd pinv = fbm.completeOrthogonalDecomposition().pseudoInverse();  // [bins, mels]

    std::size_t frames = mel.num_frames();
    std::size_t bins = fb.cols();
    Tensor<double> lin(frames, bins);
    Eigen::VectorXd melmag(mel.num_mels());
    for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t m = 0; m < mel.num_mels(); ++m)
            melmag(static_cast<Eigen::Index>(m)) =
                std::max(0.0, std::exp(static_cast<double>(mel.frames.at(t, m))) - cfg.log_floor_eps);
        Eigen::VectorXd v = pinv * melmag;
        for (std::size_t b = 0; b < bins; ++b) lin.at(t, b) = std::max(0.0, v(static_cast<Eigen::Index>(b)));
    }
    return lin;
}

double spectral_convergence(const std::vector<double>& samples, const Tensor<double>& target_mag,
                            const SignalConfig& cfg) {
    Tensor<double> mag = magnitude(stft(samples, cfg));
    std::size_t frames = std::min(mag.rows(), target_mag.rows());
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t b = 0; b < mag.cols(); ++b) {
            double d = mag.at(t, b) - target_mag.at(t, b);
            num += d * d;
            den += target_mag.at(t, b) * target_mag.at(t, b);
        }
    return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

Waveform griffin_lim(const MelSpectrogram& mel, const SignalConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    require(mel.frames.all_finite(), "griffin_lim: non-finite mel");
    std::size_t frames = mel.num_frames();
    require(frames >= 1, "griffin_lim: empty mel");
    std::size_t bins = static_cast<std::size_t>(cfg.fft_size / 2 + 1);

    Tensor<double> linmag = mel_to_linear(mel, cfg);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(-M_PI, M_PI);
    Spectrogram est;
    est.frames.assign(frames, std::vector<std::complex<double>>(bins));
    for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t b = 0; b < bins; ++b) {
            double a = angle(rng);
            est.frames[t][b] = std::polar(linmag.at(t, b), a);
        }

    std::vector<double> x;
    for (int it = 0; it < cfg.griffin_lim_iters; ++it) {
        x = istft(est, cfg);
        Spectrogram rebuilt = stft(x, cfg);
        for (std::size_t t = 0; t < frames; ++t)
            for (std::size_t b = 0; b < bins; ++b) {
                std::complex<double> v = rebuilt.frames[t][b];
                double m = std::abs(v);
                std::complex<double> phase = m > 1e-12 ? v / m : std::complex<double>(1.0, 0.0);
                est.frames[t][b] = linmag.at(t, b) * phase;
            }
    }
    x = istft(est, cfg);

    Waveform out;
    out.sample_rate = cfg.sample_rate;
    out.samples.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out.samples[i] = static_cast<float>(x[i]);
    return out;
}

// ---- mel feature files ----

void save_mel(const std::string& path, const MelSpectrogram& mel) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("mel file: cannot open for write " + path);
    os.write("PVMF", 4);
    std::uint32_t version = 1, rows = static_cast<std::uint32_t>(mel.frames.rows()),
                  cols = static_cast<std::uint32_t>(mel.frames.cols());
    os.write(reinterpret_cast<const char*>(&version), 4);
    os.write(reinterpret_cast<const char*>(&rows), 4);
    os.write(reinterpret_cast<const char*>(&cols), 4);
    os.write(reinterpret_cast<const char*>(&mel.frame_ms), 8);
    os.write(reinterpret_cast<const char*>(&mel.hop_ms), 8);
    os.write(reinterpret_cast<const char*>(mel.frames.data.data()),
             static_cast<std::streamsize>(mel.frames.data.size() * sizeof(float)));
    if (!os) throw FormatError("mel file: write failed " + path);
}

MelSpectrogram load_mel(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("mel file: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "PVMF", 4) != 0)
        throw FormatError("mel file: bad magic in " + path);
    std::uint32_t version = 0, rows = 0, cols = 0;
    is.read(reinterpret_cast<char*>(&version), 4);
    is.read(reinterpret_cast<char*>(&rows), 4);
    is.read(reinterpret_cast<char*>(&cols), 4);
    if (version != 1) throw FormatError("mel file: unsupported version");
    MelSpectrogram mel;
    is.read(reinterpret_cast<char*>(&mel.frame_ms), 8);
    is.read(reinterpret_cast<char*>(&mel.hop_ms), 8);
    mel.frames = Tensor<float>(rows, cols);
    is.read(reinterpret_cast<char*>(mel.frames.data.data()),
            static_cast<std::streamsize>(mel.frames.data.size() * sizeof(float)));
    if (!is) throw FormatError("mel file: truncated " + path);
    return mel;
}

}  // namespace pvs
