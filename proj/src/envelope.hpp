#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace foleygram {

inline constexpr std::size_t kDefaultWindow = 512;
inline constexpr std::size_t kDefaultHop = 128;

/// Interleaved PCM samples in [-1, 1].
struct Waveform {
    std::vector<float> samples;
    std::uint32_t sample_rate = 44100;
    std::uint16_t channels = 1;

    std::size_t frames() const { return channels == 0 ? 0 : samples.size() / channels; }
    /// Channel mean per frame.
    std::vector<double> mono() const;

    static Waveform from_mono(std::span<const double> mono, std::uint32_t sample_rate);
};

struct Envelope {
    std::vector<double> frames;
    std::size_t window = kDefaultWindow;
    std::size_t hop = kDefaultHop;
    double source_rate = 0.0;
};

/// Envelope resampled onto the generator's latent time axis.
struct ControlSignal {
    std::vector<double> values;
};

/// floor((len - window) / hop) + 1 for len >= window, else 0.
std::size_t envelope_frame_count(std::size_t length, std::size_t window, std::size_t hop);

/// Frame i is the RMS over the half-open window [i·hop, i·hop + window).
/// Stereo input is downmixed by channel mean first. Throws TooShort.
Envelope rms_envelope(const Waveform & y, std::size_t window = kDefaultWindow, std::size_t hop = kDefaultHop);
Envelope rms_envelope(std::span<const double> mono, double sample_rate, std::size_t window = kDefaultWindow,
                      std::size_t hop = kDefaultHop);

/// Endpoint-preserving linear interpolation to `target_len` points (>= 2).
std::vector<double> resample_linear(std::span<const double> values, std::size_t target_len);
ControlSignal resample_envelope(const Envelope & e, std::size_t target_len);

enum class WavEncoding { Pcm16, Float32 };

Waveform read_wav(const std::filesystem::path & path);
Waveform decode_wav(std::span<const std::uint8_t> bytes);
void write_wav(const std::filesystem::path & path, const Waveform & w, WavEncoding enc = WavEncoding::Pcm16);
std::vector<std::uint8_t> encode_wav(const Waveform & w, WavEncoding enc = WavEncoding::Pcm16);

/// "frame,rms" header followed by one row per frame.
std::string envelope_csv(const Envelope & e);
void write_envelope_csv(const std::filesystem::path & path, const Envelope & e);

} // namespace foleygram
