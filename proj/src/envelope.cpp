#include "envelope.hpp"

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace foleygram {

std::vector<double> Waveform::mono() const {
    const std::size_t n = frames();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < channels; ++c) s += samples[i * channels + c];
        out[i] = s / channels;
    }
    return out;
}

Waveform Waveform::from_mono(std::span<const double> mono, std::uint32_t sample_rate) {
    Waveform w;
    w.sample_rate = sample_rate;
    w.channels = 1;
    w.samples.resize(mono.size());
    for (std::size_t i = 0; i < mono.size(); ++i) {
        w.samples[i] = static_cast<float>(std::clamp(mono[i], -1.0, 1.0));
    }
    return w;
}

std::size_t envelope_frame_count(std::size_t length, std::size_t window, std::size_t hop) {
    if (window == 0 || hop == 0 || length < window) return 0;
    return (length - window) / hop + 1;
}

Envelope rms_envelope(std::span<const double> mono, double sample_rate, std::size_t window, std::size_t hop) {
    if (window == 0 || hop == 0) fail(ErrorCode::InvalidArgument, "window and hop must be positive");
    if (mono.size() < window) {
        fail(ErrorCode::TooShort, "signal of " + std::to_string(mono.size()) + " samples is shorter than window " +
                                      std::to_string(window));
    }
    Envelope e;
    e.window = window;
    e.hop = hop;
    e.source_rate = sample_rate;
    const std::size_t count = envelope_frame_count(mono.size(), window, hop);
    e.frames.resize(count);
    // Scaling by the window peak keeps constant windows exact: every scaled
    // sample is ±1, so the mean square is exactly 1.
    for (std::size_t i = 0; i < count; ++i) {
        const auto frame = mono.subspan(i * hop, window);
        double peak = 0.0;
        for (double v : frame) peak = std::max(peak, std::abs(v));
        if (peak == 0.0) continue;
        double acc = 0.0;
        for (double v : frame) acc += (v / peak) * (v / peak);
        e.frames[i] = peak * std::sqrt(acc / static_cast<double>(window));
    }
    return e;
}

Envelope rms_envelope(const Waveform & y, std::size_t window, std::size_t hop) {
    if (y.channels < 1 || y.channels > 2) fail(ErrorCode::InvalidArgument, "waveform must have 1 or 2 channels");
    const auto mono = y.mono();
    return rms_envelope(mono, static_cast<double>(y.sample_rate), window, hop);
}

std::vector<double> resample_linear(std::span<const double> values, std::size_t target_len) {
    if (target_len < 2) fail(ErrorCode::InvalidTarget, "resample target length must be at least 2");
    if (values.empty()) fail(ErrorCode::InvalidArgument, "cannot resample an empty sequence");
    std::vector<double> out(target_len);
    if (values.size() == 1) {
        std::fill(out.begin(), out.end(), values[0]);
        return out;
    }
    if (values.size() == target_len) {
        std::copy(values.begin(), values.end(), out.begin());
        return out;
    }
    const double scale = static_cast<double>(values.size() - 1) / static_cast<double>(target_len - 1);
    for (std::size_t k = 0; k < target_len; ++k) {
        const double x = static_cast<double>(k) * scale;
        const auto lo = std::min(static_cast<std::size_t>(x), values.size() - 2);
        const double frac = x - static_cast<double>(lo);
        out[k] = values[lo] + frac * (values[lo + 1] - values[lo]);
    }
    out.front() = values.front();
    out.back() = values.back();
    return out;
}

ControlSignal resample_envelope(const Envelope & e, std::size_t target_len) {
    return ControlSignal{resample_linear(e.frames, target_len)};
}

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

void put_u16(std::vector<std::uint8_t> & out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t> & out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_tag(std::vector<std::uint8_t> & out, const char * tag) { out.insert(out.end(), tag, tag + 4); }

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
           (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char * tag) {
    return std::memcmp(b.data() + at, tag, 4) == 0;
}

} // namespace

std::vector<std::uint8_t> encode_wav(const Waveform & w, WavEncoding enc) {
    if (w.channels < 1 || w.channels > 2) fail(ErrorCode::UnsupportedFormat, "WAV output supports 1 or 2 channels");
    if (w.sample_rate == 0) fail(ErrorCode::InvalidArgument, "sample rate must be positive");
    const std::uint16_t bits = enc == WavEncoding::Pcm16 ? 16 : 32;
    const std::uint16_t block_align = static_cast<std::uint16_t>(w.channels * bits / 8);
    const auto data_bytes = static_cast<std::uint32_t>(w.frames() * block_align);

    std::vector<std::uint8_t> out;
    out.reserve(44 + data_bytes);
    put_tag(out, "RIFF");
    put_u32(out, 36 + data_bytes);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, 16);
    put_u16(out, enc == WavEncoding::Pcm16 ? kFormatPcm : kFormatFloat);
    put_u16(out, w.channels);
    put_u32(out, w.sample_rate);
    put_u32(out, w.sample_rate * block_align);
    put_u16(out, block_align);
    put_u16(out, bits);
    put_tag(out, "data");
    put_u32(out, data_bytes);
    const std::size_t n = w.frames() * w.channels;
    for (std::size_t i = 0; i < n; ++i) {
        const float x = std::clamp(w.samples[i], -1.0f, 1.0f);
        if (enc == WavEncoding::Pcm16) {
            const auto q = static_cast<std::int16_t>(std::lround(static_cast<double>(x) * 32767.0));
            put_u16(out, static_cast<std::uint16_t>(q));
        } else {
            std::uint32_t bits32;
            std::memcpy(&bits32, &x, 4);
            put_u32(out, bits32);
        }
    }
    return out;
}

Waveform decode_wav(std::span<const std::uint8_t> b) {
    if (b.size() < 12 || !tag_is(b, 0, "RIFF") || !tag_is(b, 8, "WAVE")) {
        fail(ErrorCode::CorruptHeader, "missing RIFF/WAVE header");
    }
    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t rate = 0;
    std::uint16_t bits = 0;
    bool have_fmt = false;
    std::size_t pos = 12;
    while (true) {
        if (pos + 8 > b.size()) fail(ErrorCode::CorruptHeader, "no data chunk before end of file");
        const std::uint32_t size = get_u32(b, pos + 4);
        const std::size_t body = pos + 8;
        if (tag_is(b, pos, "fmt ")) {
            if (size < 16 || body + size > b.size()) fail(ErrorCode::CorruptHeader, "truncated fmt chunk");
            format = get_u16(b, body);
            channels = get_u16(b, body + 2);
            rate = get_u32(b, body + 4);
            bits = get_u16(b, body + 14);
            if (format == kFormatExtensible) {
                if (size < 26) fail(ErrorCode::CorruptHeader, "truncated extensible fmt chunk");
                format = get_u16(b, body + 24);
            }
            have_fmt = true;
        } else if (tag_is(b, pos, "data")) {
            if (!have_fmt) fail(ErrorCode::CorruptHeader, "data chunk precedes fmt chunk");
            if (body + size > b.size()) fail(ErrorCode::CorruptHeader, "data chunk runs past end of file");
            if (channels < 1 || channels > 2) {
                fail(ErrorCode::UnsupportedFormat, "only mono and stereo WAV are supported");
            }
            if (rate == 0) fail(ErrorCode::CorruptHeader, "sample rate is zero");
            const bool pcm16 = format == kFormatPcm && bits == 16;
            const bool f32 = format == kFormatFloat && bits == 32;
            if (!pcm16 && !f32) {
                fail(ErrorCode::UnsupportedFormat, "only 16-bit PCM and 32-bit float WAV are supported");
            }
            Waveform w;
            w.channels = channels;
            w.sample_rate = rate;
            const std::size_t width = bits / 8;
            const std::size_t count = (size / (width * channels)) * channels;
            w.samples.resize(count);
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t at = body + i * width;
                if (pcm16) {
                    const auto q = static_cast<std::int16_t>(get_u16(b, at));
                    w.samples[i] = std::max(-1.0f, static_cast<float>(q / 32767.0));
                } else {
                    const std::uint32_t raw = get_u32(b, at);
                    float x;
                    std::memcpy(&x, &raw, 4);
                    w.samples[i] = x;
                }
            }
            if (w.frames() == 0) fail(ErrorCode::CorruptHeader, "WAV holds no sample frames");
            return w;
        }
        pos = body + size + (size & 1u);
    }
}

Waveform read_wav(const std::filesystem::path & path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorCode::Io, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return decode_wav(bytes);
}

void write_wav(const std::filesystem::path & path, const Waveform & w, WavEncoding enc) {
    const auto bytes = encode_wav(w, enc);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) fail(ErrorCode::Io, "failed writing " + path.string());
}

std::string envelope_csv(const Envelope & e) {
    std::ostringstream os;
    os.precision(9);
    os << "frame,rms\n";
    for (std::size_t i = 0; i < e.frames.size(); ++i) os << i << ',' << e.frames[i] << '\n';
    return os.str();
}

void write_envelope_csv(const std::filesystem::path & path, const Envelope & e) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) fail(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    f << envelope_csv(e);
}

} // namespace foleygram
