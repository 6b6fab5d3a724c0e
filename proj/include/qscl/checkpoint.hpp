#pragma once

// Binary storage for named tensors: a versioned magic line, a JSON manifest
// of (name, shape, offset) entries, then a flat little-endian float64
// payload. Checkpoints and cached dataset matrices share this format.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qscl/tensor.hpp"

namespace qscl {

inline constexpr const char* kCheckpointMagic = "QSCL-CKPT-1\n";

namespace detail {

inline void put_u64_le(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

inline uint64_t get_u64_le(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

inline void put_f64_le(std::ostream& os, double d) {
    uint64_t v;
    std::memcpy(&v, &d, 8);
    put_u64_le(os, v);
}

inline double get_f64_le(std::istream& is) {
    const uint64_t v = get_u64_le(is);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

}  // namespace detail

inline void save_tensors(const std::string& path, const std::map<std::string, Tensor>& tensors) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_tensors: cannot open " + path);

    nlohmann::json manifest = nlohmann::json::array();
    uint64_t offset = 0;
    for (const auto& [name, t] : tensors) {
        nlohmann::json entry;
        entry["name"] = name;
        entry["shape"] = t.shape();
        entry["offset"] = offset;
        manifest.push_back(entry);
        offset += static_cast<uint64_t>(t.numel());
    }
    const std::string mjson = manifest.dump();

    f.write(kCheckpointMagic, std::strlen(kCheckpointMagic));
    detail::put_u64_le(f, mjson.size());
    f.write(mjson.data(), static_cast<std::streamsize>(mjson.size()));
    detail::put_u64_le(f, offset);
    for (const auto& [name, t] : tensors)
        for (double v : t.values()) detail::put_f64_le(f, v);
    if (!f) throw std::runtime_error("save_tensors: write failed for " + path);
}

inline std::map<std::string, Tensor> load_tensors(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_tensors: cannot open " + path);

    std::string magic(std::strlen(kCheckpointMagic), '\0');
    f.read(magic.data(), static_cast<std::streamsize>(magic.size()));
    if (!f || magic != kCheckpointMagic)
        throw std::runtime_error("load_tensors: bad magic in " + path +
                                 " (expected QSCL-CKPT-1)");

    const uint64_t mlen = detail::get_u64_le(f);
    std::string mjson(mlen, '\0');
    f.read(mjson.data(), static_cast<std::streamsize>(mlen));
    if (!f) throw std::runtime_error("load_tensors: truncated manifest in " + path);
    nlohmann::json manifest = nlohmann::json::parse(mjson);

    const uint64_t payload_len = detail::get_u64_le(f);
    std::vector<double> payload(payload_len);
    for (uint64_t i = 0; i < payload_len; ++i) payload[i] = detail::get_f64_le(f);
    if (!f) throw std::runtime_error("load_tensors: truncated payload in " + path);

    std::map<std::string, Tensor> out;
    for (const auto& entry : manifest) {
        const std::string name = entry.at("name").get<std::string>();
        const Shape shape = entry.at("shape").get<Shape>();
        const uint64_t offset = entry.at("offset").get<uint64_t>();
        const uint64_t count = static_cast<uint64_t>(numel_of(shape));
        if (offset + count > payload_len)
            throw std::runtime_error("load_tensors: manifest entry '" + name +
                                     "' points past the payload in " + path);
        std::vector<double> data(payload.begin() + offset, payload.begin() + offset + count);
        out.emplace(name, Tensor::from(shape, std::move(data)));
    }
    return out;
}

}  // namespace qscl
