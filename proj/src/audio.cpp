#include "vcs/audio.hpp"

#include <cmath>
#include <cstring>

#include "vcs/error.hpp"
#include "vcs/io_util.hpp"

namespace vcs {

void validate_waveform(const Waveform& w, const std::string& what) {
    if (w.samples.empty()) throw Error::validation(what + ": empty waveform");
    if (w.sample_rate_hz <= 0) throw Error::validation(what + ": sample rate must be positive");
    for (size_t i = 0; i < w.samples.size(); ++i) {
        if (!std::isfinite(w.samples[i]))
            throw Error::validation(what + ": non-finite sample at index " + std::to_string(i));
    }
}

namespace {

constexpr uint16_t kFormatPcm = 1;
constexpr uint16_t kFormatFloat = 3;

struct FmtChunk {
    uint16_t format = 0;
    uint16_t channels = 0;
    uint32_t sample_rate = 0;
    uint16_t bits_per_sample = 0;
};

}  // namespace

Waveform read_wav(const std::filesystem::path& path) {
    const std::string bytes = read_file_bytes(path);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    const size_t n = bytes.size();
    if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 || std::memcmp(p + 8, "WAVE", 4) != 0)
        throw Error::validation("not a RIFF/WAVE file: " + path.string());

    FmtChunk fmt;
    bool have_fmt = false;
    size_t data_off = 0, data_len = 0;

    size_t off = 12;
    while (off + 8 <= n) {
        const uint32_t chunk_len = get_u32le(p + off + 4);
        const size_t body = off + 8;
        if (body + chunk_len > n)
            throw Error::validation("truncated WAV chunk: " + path.string());
        if (std::memcmp(p + off, "fmt ", 4) == 0) {
            if (chunk_len < 16) throw Error::validation("short fmt chunk: " + path.string());
            fmt.format = static_cast<uint16_t>(get_u32le(p + body) & 0xffff);
            fmt.channels = static_cast<uint16_t>((get_u32le(p + body) >> 16) & 0xffff);
            fmt.sample_rate = get_u32le(p + body + 4);
            fmt.bits_per_sample = static_cast<uint16_t>((get_u32le(p + body + 12) >> 16) & 0xffff);
            have_fmt = true;
        } else if (std::memcmp(p + off, "data", 4) == 0) {
            data_off = body;
            data_len = chunk_len;
        }
        off = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
    }
    if (!have_fmt || data_off == 0)
        throw Error::validation("WAV missing fmt or data chunk: " + path.string());
    if (fmt.channels != 1 && fmt.channels != 2)
        throw Error::validation("unsupported channel count " + std::to_string(fmt.channels) +
                                ": " + path.string());

    const size_t bytes_per_sample = fmt.bits_per_sample / 8;
    const size_t frame_bytes = bytes_per_sample * fmt.channels;
    if (frame_bytes == 0 || data_len % frame_bytes != 0)
        throw Error::validation("malformed WAV data chunk: " + path.string());
    const size_t frames = data_len / frame_bytes;

    Waveform w;
    w.sample_rate_hz = static_cast<int>(fmt.sample_rate);
    w.samples.resize(frames);

    auto sample_at = [&](size_t frame, int ch) -> double {
        const unsigned char* s = p + data_off + frame * frame_bytes + size_t(ch) * bytes_per_sample;
        if (fmt.format == kFormatPcm && fmt.bits_per_sample == 16) {
            const auto v = static_cast<int16_t>(uint16_t(s[0]) | (uint16_t(s[1]) << 8));
            return double(v) / 32768.0;
        }
        if (fmt.format == kFormatFloat && fmt.bits_per_sample == 32) {
            return double(get_f32le(s));
        }
        throw Error::validation("unsupported WAV encoding (need 16-bit PCM or 32-bit float): " +
                                path.string());
    };

    for (size_t i = 0; i < frames; ++i) {
        double v = sample_at(i, 0);
        if (fmt.channels == 2) v = 0.5 * (v + sample_at(i, 1));
        w.samples[i] = v;
    }
    validate_waveform(w, "wav " + path.string());
    return w;
}

void write_wav(const Waveform& w, const std::filesystem::path& path) {
    validate_waveform(w, "wav output");
    const uint32_t data_len = static_cast<uint32_t>(w.samples.size() * 4);
    std::string out;
    out.reserve(58 + data_len);
    out.append("RIFF");
    put_u32le(out, 4 + 8 + 16 + 8 + data_len);
    out.append("WAVE");
    out.append("fmt ");
    put_u32le(out, 16);
    put_u32le(out, uint32_t(kFormatFloat) | (uint32_t(1) << 16));        // format, channels
    put_u32le(out, static_cast<uint32_t>(w.sample_rate_hz));             // sample rate
    put_u32le(out, static_cast<uint32_t>(w.sample_rate_hz) * 4);         // byte rate
    put_u32le(out, uint32_t(4) | (uint32_t(32) << 16));                  // block align, bits
    out.append("data");
    put_u32le(out, data_len);
    for (const double v : w.samples) put_f32le(out, static_cast<float>(v));
    atomic_write_file(path, out);
}

}  // namespace vcs
