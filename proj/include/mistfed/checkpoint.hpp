#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "mistfed/digest.hpp"
#include "mistfed/encoder.hpp"
#include "mistfed/errors.hpp"
#include "mistfed/model.hpp"
#include "mistfed/param_vector.hpp"

namespace mistfed {

/// Model checkpoint: global parameters at full 64-bit precision plus the
/// per-modality encoders and enough config to rebuild evaluation.
///
/// File layout (all integers little-endian, doubles as LE IEEE-754 bits):
///   magic "MFEDCKP1" | u32 format | u64 config_digest | u64 version |
///   u32 round | MlpConfig | global params | u32 encoder count | encoders |
///   u64 FNV-1a digest of everything after the magic.
struct Checkpoint {
    std::uint64_t config_digest = 0;
    std::uint64_t model_version = 0;
    std::uint32_t round = 0;
    MlpConfig model_config;
    ParamVector global_model;
    std::vector<EncoderParams> encoders;  // ascending modality_id
};

namespace detail {

inline constexpr char kCheckpointMagic[8] = {'M', 'F', 'E', 'D', 'C', 'K', 'P', '1'};
inline constexpr std::uint32_t kCheckpointFormat = 1;

struct ByteWriter {
    std::string buf;

    void u8(std::uint8_t v) { buf.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int s = 0; s < 32; s += 8) buf.push_back(static_cast<char>((v >> s) & 0xffu));
    }
    void u64(std::uint64_t v) {
        for (int s = 0; s < 64; s += 8) buf.push_back(static_cast<char>((v >> s) & 0xffu));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        buf += s;
    }
    void params(const ParamVector& p) {
        u64(p.size());
        for (double x : p.values()) f64(x);
    }
};

struct ByteReader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw IngestionError("checkpoint: truncated file");
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int s = 0; s < 32; s += 8) {
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << s;
        }
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int s = 0; s < 64; s += 8) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << s;
        }
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
    ParamVector params() {
        const std::uint64_t n = u64();
        need(n * 8);
        std::vector<double> v(n);
        for (auto& x : v) x = f64();
        ParamVector p(std::move(v));
        return p;
    }
};

}  // namespace detail

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    detail::ByteWriter w;
    w.u32(detail::kCheckpointFormat);
    w.u64(ckpt.config_digest);
    w.u64(ckpt.model_version);
    w.u32(ckpt.round);

    w.u32(static_cast<std::uint32_t>(ckpt.model_config.input_dim));
    w.u32(static_cast<std::uint32_t>(ckpt.model_config.hidden_dims.size()));
    for (std::size_t h : ckpt.model_config.hidden_dims) w.u32(static_cast<std::uint32_t>(h));
    w.u32(static_cast<std::uint32_t>(ckpt.model_config.num_classes));
    w.f64(ckpt.model_config.dropout_rate);

    w.params(ckpt.global_model);

    w.u32(static_cast<std::uint32_t>(ckpt.encoders.size()));
    for (const auto& enc : ckpt.encoders) {
        w.str(enc.modality_id);
        w.u32(static_cast<std::uint32_t>(enc.raw_dim));
        w.u32(static_cast<std::uint32_t>(enc.k));
        w.u8(enc.nonlinearity == Nonlinearity::tanh ? 0 : 1);
        w.params(enc.weights);
        w.params(enc.decoder_weights);
    }

    const std::uint64_t digest = fnv1a64(w.buf);
    detail::ByteWriter trailer;
    trailer.u64(digest);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IngestionError("checkpoint: cannot open '" + path + "' for writing");
    out.write(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
    out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
    out.write(trailer.buf.data(), static_cast<std::streamsize>(trailer.buf.size()));
    if (!out) throw IngestionError("checkpoint: write to '" + path + "' failed");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IngestionError("checkpoint: cannot open '" + path + "'");
    std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (all.size() < sizeof(detail::kCheckpointMagic) + 8) {
        throw IngestionError("checkpoint: file '" + path + "' is too short");
    }
    if (all.compare(0, sizeof(detail::kCheckpointMagic), detail::kCheckpointMagic,
                    sizeof(detail::kCheckpointMagic)) != 0) {
        throw IngestionError("checkpoint: bad magic in '" + path + "'");
    }
    const std::string payload =
        all.substr(sizeof(detail::kCheckpointMagic),
                   all.size() - sizeof(detail::kCheckpointMagic) - 8);
    const std::string trailer = all.substr(all.size() - 8);
    detail::ByteReader tr{trailer};
    if (tr.u64() != fnv1a64(payload)) {
        throw IngestionError("checkpoint: digest mismatch in '" + path + "' (corrupt file)");
    }

    detail::ByteReader r{payload};
    if (r.u32() != detail::kCheckpointFormat) {
        throw IngestionError("checkpoint: unsupported format version in '" + path + "'");
    }
    Checkpoint ckpt;
    ckpt.config_digest = r.u64();
    ckpt.model_version = r.u64();
    ckpt.round = r.u32();

    ckpt.model_config.input_dim = r.u32();
    const std::uint32_t num_hidden = r.u32();
    ckpt.model_config.hidden_dims.clear();
    for (std::uint32_t i = 0; i < num_hidden; ++i) ckpt.model_config.hidden_dims.push_back(r.u32());
    ckpt.model_config.num_classes = r.u32();
    ckpt.model_config.dropout_rate = r.f64();

    ckpt.global_model = r.params();

    const std::uint32_t num_encoders = r.u32();
    for (std::uint32_t i = 0; i < num_encoders; ++i) {
        EncoderParams enc;
        enc.modality_id = r.str();
        enc.raw_dim = r.u32();
        enc.k = r.u32();
        enc.nonlinearity = r.u8() == 0 ? Nonlinearity::tanh : Nonlinearity::identity;
        enc.weights = r.params();
        enc.decoder_weights = r.params();
        ckpt.encoders.push_back(std::move(enc));
    }
    return ckpt;
}

}  // namespace mistfed
