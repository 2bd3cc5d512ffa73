#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tensor.hpp"

namespace pvs {

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& m) : std::runtime_error(m) {}
};

struct Waveform {
    std::vector<float> samples;  // nominally in [-1, 1]
    int sample_rate = 16000;
};

struct SignalConfig {
    double frame_ms = 50.0;
    double hop_ms = 12.5;
    int num_mels = 80;
    int fft_size = 1024;
    double mel_fmin = 0.0;
    double mel_fmax = 8000.0;
    double log_floor_eps = 1e-5;  // log compression: ln(mag + eps)
    int griffin_lim_iters = 60;
    int sample_rate = 16000;

    int frame_length() const {
        return static_cast<int>(frame_ms * sample_rate / 1000.0 + 0.5);
    }
    int hop_length() const { return static_cast<int>(hop_ms * sample_rate / 1000.0 + 0.5); }
    double log_floor() const { return std::log(log_floor_eps); }
    void validate() const;
};

struct MelSpectrogram {
    Tensor<float> frames;  // [num_frames, num_mels], log magnitudes
    double frame_ms = 50.0;
    double hop_ms = 12.5;

    std::size_t num_frames() const { return frames.rows(); }
    std::size_t num_mels() const { return frames.cols(); }
};

// 16-bit PCM mono WAV.
Waveform load_wav(const std::string& path);
void save_wav(const std::string& path, const Waveform& w);

// Framing: num_frames = ceil((n - frame_len) / hop) + 1, tail zero-padded;
// errors if the waveform is shorter than one frame.
std::size_t frame_count(std::size_t num_samples, const SignalConfig& cfg);

MelSpectrogram mel_spectrogram(const Waveform& w, const SignalConfig& cfg);

// Iterative phase reconstruction from a log-mel spectrogram. The initial
// phase is drawn from `seed`; magnitudes come from the pseudo-inverse of the
// mel filterbank, clamped at zero.
Waveform griffin_lim(const MelSpectrogram& mel, const SignalConfig& cfg, std::uint64_t seed);

// Mel filterbank [num_mels, fft_size/2 + 1]; triangles linear in Hz with
// HTK-style mel-spaced corners, unnormalized.
Tensor<double> mel_filterbank(const SignalConfig& cfg);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Magnitude STFT-domain helpers used by griffin_lim and its tests.
struct Spectrogram {
    // [num_frames, fft_size/2 + 1]
    std::vector<std::vector<std::complex<double>>> frames;
};
Spectrogram stft(const std::vector<double>& samples, const SignalConfig& cfg);
std::vector<double> istft(const Spectrogram& spec, const SignalConfig& cfg);
Tensor<double> magnitude(const Spectrogram& spec);

// Linear-magnitude spectrogram recovered from a log-mel spectrogram.
Tensor<double> mel_to_linear(const MelSpectrogram& mel, const SignalConfig& cfg);

// ||(|STFT(x)| - target)||_F / ||target||_F
double spectral_convergence(const std::vector<double>& samples, const Tensor<double>& target_mag,
                            const SignalConfig& cfg);

// Flat binary mel container: magic "PVMF", u32 version, u32 rows, u32 cols,
// f64 frame_ms, f64 hop_ms, row-major f32 payload.
void save_mel(const std::string& path, const MelSpectrogram& mel);
MelSpectrogram load_mel(const std::string& path);

}  // namespace pvs
