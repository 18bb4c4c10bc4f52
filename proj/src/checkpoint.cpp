#include "tapir/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace tapir {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw DataError("checkpoint truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + static_cast<std::size_t>(i)])) << (8 * i);
        pos += 8;
        return v;
    }
    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(buf[pos++]);
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

template <typename T>
void append_scalar_le(std::string& out, T v) {
    static_assert(sizeof(T) == 4 || sizeof(T) == 8);
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    // x86 is little-endian; keep the copy explicit so the format stays pinned
    out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

constexpr std::uint8_t kTagF32 = 0;
constexpr std::uint8_t kTagF64 = 1;

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<NamedTensor>& params,
                     const std::map<std::string, std::string>& hypers) {
    std::string hyper_text;
    for (const auto& [k, v] : hypers) {
        hyper_text += k;
        hyper_text += '=';
        hyper_text += v;
        hyper_text += '\n';
    }

    std::string payload;
    std::string manifest;
    put_u32(manifest, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, tensor] : params) {
        put_u32(manifest, static_cast<std::uint32_t>(name.size()));
        manifest += name;
        manifest.push_back(static_cast<char>(sizeof(real) == 4 ? kTagF32 : kTagF64));
        put_u32(manifest, static_cast<std::uint32_t>(tensor.shape().size()));
        for (int e : tensor.shape()) put_u32(manifest, static_cast<std::uint32_t>(e));
        put_u64(manifest, payload.size());
        put_u64(manifest, tensor.size() * sizeof(real));
        for (real v : tensor.value()) append_scalar_le(payload, v);
    }

    std::string out;
    out.append(kCheckpointMagic, 9);
    put_u32(out, kCheckpointVersion);
    put_u64(out, hyper_text.size());
    out += hyper_text;
    out += manifest;
    out += payload;

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open checkpoint for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw DataError("checkpoint write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    Reader r{buf};
    if (r.bytes(9) != std::string(kCheckpointMagic, 9)) throw DataError("bad checkpoint magic");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version");

    LoadedCheckpoint ck;
    const std::uint64_t hyper_len = r.u64();
    const std::string hyper_text = r.bytes(hyper_len);
    std::size_t start = 0;
    while (start < hyper_text.size()) {
        std::size_t end = hyper_text.find('\n', start);
        if (end == std::string::npos) end = hyper_text.size();
        const std::string line = hyper_text.substr(start, end - start);
        start = end + 1;
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw DataError("malformed hyperparameter line");
        ck.hypers[line.substr(0, eq)] = line.substr(eq + 1);
    }

    struct Rec {
        std::string name;
        std::uint8_t dtype;
        std::vector<int> shape;
        std::uint64_t offset;
        std::uint64_t nbytes;
    };
    std::vector<Rec> recs(r.u32());
    for (auto& rec : recs) {
        rec.name = r.bytes(r.u32());
        rec.dtype = r.u8();
        const std::uint32_t ndim = r.u32();
        for (std::uint32_t i = 0; i < ndim; ++i) rec.shape.push_back(static_cast<int>(r.u32()));
        rec.offset = r.u64();
        rec.nbytes = r.u64();
    }
    const std::size_t payload_base = r.pos;

    for (const auto& rec : recs) {
        const std::size_t elem = rec.dtype == kTagF32 ? 4 : 8;
        const std::size_t count = shape_numel(rec.shape);
        if (rec.nbytes != count * elem) throw DataError("checkpoint payload size mismatch");
        if (payload_base + rec.offset + rec.nbytes > buf.size()) throw DataError("checkpoint truncated");
        std::vector<real> data(count);
        const char* src = buf.data() + payload_base + rec.offset;
        for (std::size_t i = 0; i < count; ++i) {
            if (rec.dtype == kTagF32) {
                float v;
                std::memcpy(&v, src + i * 4, 4);
                data[i] = static_cast<real>(v);
            } else {
                double v;
                std::memcpy(&v, src + i * 8, 8);
                data[i] = static_cast<real>(v);
            }
        }
        ck.params.push_back({rec.name, Tensor::from(std::move(data), rec.shape, true)});
    }
    return ck;
}

const Tensor& LoadedCheckpoint::get(const std::string& name) const {
    for (const auto& nt : params) {
        if (nt.name == name) return nt.tensor;
    }
    throw DataError("checkpoint is missing parameter: " + name);
}

bool LoadedCheckpoint::has(const std::string& name) const {
    for (const auto& nt : params) {
        if (nt.name == name) return true;
    }
    return false;
}

std::string LoadedCheckpoint::hyper(const std::string& key) const {
    auto it = hypers.find(key);
    if (it == hypers.end()) throw DataError("checkpoint is missing hyperparameter: " + key);
    return it->second;
}

std::string LoadedCheckpoint::hyper_or(const std::string& key, const std::string& fallback) const {
    auto it = hypers.find(key);
    return it == hypers.end() ? fallback : it->second;
}

}  // namespace tapir
