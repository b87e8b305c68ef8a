#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "btseq/errors.hpp"
#include "btseq/tensor.hpp"

namespace btseq {

using ordered_json = nlohmann::ordered_json;

// Checkpoint file layout:
//   bytes 0..7    magic "BTSEQCK1"
//   bytes 8..15   little-endian u64 manifest length
//   manifest      UTF-8 JSON: format version, caller header, parameter
//                 records (name, rows, cols, dtype, byte offset into blob)
//   blob          little-endian float32 values in manifest order
// Values are stored in 32 bits; load->save round-trips byte-identically.

inline constexpr char kCheckpointMagic[9] = "BTSEQCK1";

struct Checkpoint {
    ordered_json header;
    std::vector<std::pair<std::string, Tensor>> params;

    const Tensor* find(const std::string& name) const {
        for (const auto& [n, t] : params)
            if (n == name) return &t;
        return nullptr;
    }
};

inline void save_checkpoint(const std::string& path, const std::vector<const Parameter*>& params,
                            const ordered_json& header) {
    ordered_json manifest;
    manifest["format"] = 1;
    manifest["header"] = header;
    ordered_json records = ordered_json::array();
    std::uint64_t offset = 0;
    for (const Parameter* p : params) {
        ordered_json rec;
        rec["name"] = p->name;
        rec["rows"] = p->value.rows();
        rec["cols"] = p->value.cols();
        rec["dtype"] = "f32";
        rec["offset"] = offset;
        records.push_back(std::move(rec));
        offset += p->value.size() * 4;
    }
    manifest["params"] = std::move(records);
    const std::string mtext = manifest.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("checkpoint: cannot open " + path + " for writing");
    out.write(kCheckpointMagic, 8);
    const std::uint64_t mlen = mtext.size();
    char lenbuf[8];
    for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((mlen >> (8 * i)) & 0xff);
    out.write(lenbuf, 8);
    out.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
    std::vector<char> blob;
    blob.reserve(offset);
    for (const Parameter* p : params) {
        for (double v : p->value.vec()) {
            const float f = static_cast<float>(v);
            char b[4];
            std::memcpy(b, &f, 4);
            blob.insert(blob.end(), b, b + 4);
        }
    }
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoError("checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw IoError("checkpoint: bad magic in " + path);
    char lenbuf[8];
    in.read(lenbuf, 8);
    if (!in) throw IoError("checkpoint: truncated manifest length in " + path);
    std::uint64_t mlen = 0;
    for (int i = 0; i < 8; ++i)
        mlen |= static_cast<std::uint64_t>(static_cast<unsigned char>(lenbuf[i])) << (8 * i);
    std::string mtext(mlen, '\0');
    in.read(mtext.data(), static_cast<std::streamsize>(mlen));
    if (!in) throw IoError("checkpoint: truncated manifest in " + path);
    ordered_json manifest;
    try {
        manifest = ordered_json::parse(mtext);
    } catch (const std::exception& e) {
        throw IoError("checkpoint: manifest parse error in " + path + ": " + e.what());
    }
    if (manifest.value("format", 0) != 1) throw IoError("checkpoint: unsupported format in " + path);

    std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Checkpoint ck;
    ck.header = manifest["header"];
    for (const auto& rec : manifest["params"]) {
        const std::string name = rec["name"];
        const int rows = rec["rows"];
        const int cols = rec["cols"];
        if (rec["dtype"] != "f32") throw IoError("checkpoint: unsupported dtype for " + name);
        const std::uint64_t off = rec["offset"];
        const std::size_t count = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
        if (off + count * 4 > blob.size()) throw IoError("checkpoint: blob too short for " + name);
        Tensor t(rows, cols);
        for (std::size_t i = 0; i < count; ++i) {
            float f;
            std::memcpy(&f, blob.data() + off + i * 4, 4);
            t.vec()[i] = static_cast<double>(f);
        }
        ck.params.emplace_back(name, std::move(t));
    }
    return ck;
}

// Copies checkpoint tensors into matching parameters by name.
inline void load_into(const Checkpoint& ck, const std::vector<Parameter*>& params) {
    for (Parameter* p : params) {
        const Tensor* t = ck.find(p->name);
        if (t == nullptr) throw IoError("checkpoint: missing parameter " + p->name);
        if (!t->same_shape(p->value)) throw IoError("checkpoint: shape mismatch for " + p->name);
        p->value = *t;
    }
}

}  // namespace btseq
