#include "actoreg/net/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace actoreg::net {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian only");

namespace {

constexpr char kMagic[8] = {'A', 'C', 'R', 'E', 'G', 'C', 'K', 'P'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kMaxName = 4096;
constexpr uint32_t kMaxRank = 8;
constexpr int64_t kMaxNumel = 1LL << 30;

void put_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

void put_str(std::ostream& os, const std::string& s) {
    put_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t get_u32(std::istream& is, const std::string& path) {
    uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 4))
        throw io_error("checkpoint truncated: " + path);
    return v;
}

std::string get_str(std::istream& is, const std::string& path) {
    const uint32_t n = get_u32(is, path);
    if (n > kMaxName) throw io_error("checkpoint string too long in " + path);
    std::string s(n, '\0');
    if (n && !is.read(s.data(), n)) throw io_error("checkpoint truncated: " + path);
    return s;
}

}  // namespace

void Checkpoint::add(const std::string& name, const compute::Tensor& t) {
    add_raw(name, t.shape(), std::vector<float>(t.data().begin(), t.data().end()));
}

void Checkpoint::add_raw(const std::string& name, compute::Shape shape,
                         std::vector<float> data) {
    tensors.emplace_back(name, std::make_pair(std::move(shape), std::move(data)));
}

const std::pair<compute::Shape, std::vector<float>>* Checkpoint::find(
    const std::string& name) const {
    for (const auto& [n, payload] : tensors)
        if (n == name) return &payload;
    return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw io_error("cannot open for writing: " + path);
    os.write(kMagic, sizeof(kMagic));
    put_u32(os, kVersion);
    put_u32(os, static_cast<uint32_t>(ck.meta.size()));
    for (const auto& [k, v] : ck.meta) {
        put_str(os, k);
        put_str(os, v);
    }
    put_u32(os, static_cast<uint32_t>(ck.tensors.size()));
    for (const auto& [name, payload] : ck.tensors) {
        const auto& [shape, data] = payload;
        put_str(os, name);
        put_u32(os, static_cast<uint32_t>(shape.size()));
        for (int d : shape) put_u32(os, static_cast<uint32_t>(d));
        os.write(reinterpret_cast<const char*>(data.data()),
                 static_cast<std::streamsize>(data.size() * sizeof(float)));
    }
    if (!os) throw io_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open: " + path);
    char magic[8];
    if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw io_error("not a checkpoint file: " + path);
    const uint32_t version = get_u32(is, path);
    if (version != kVersion)
        throw io_error("unsupported checkpoint version " + std::to_string(version) + ": " + path);
    Checkpoint ck;
    const uint32_t nmeta = get_u32(is, path);
    for (uint32_t i = 0; i < nmeta; ++i) {
        std::string k = get_str(is, path);
        std::string v = get_str(is, path);
        ck.meta.emplace(std::move(k), std::move(v));
    }
    const uint32_t ntensors = get_u32(is, path);
    for (uint32_t i = 0; i < ntensors; ++i) {
        std::string name = get_str(is, path);
        const uint32_t rank = get_u32(is, path);
        if (rank > kMaxRank) throw io_error("checkpoint tensor rank too large: " + path);
        compute::Shape shape(rank);
        int64_t numel = 1;
        for (uint32_t d = 0; d < rank; ++d) {
            shape[d] = static_cast<int>(get_u32(is, path));
            numel *= shape[d];
        }
        if (numel < 0 || numel > kMaxNumel)
            throw io_error("checkpoint tensor too large: " + path);
        std::vector<float> data(static_cast<size_t>(numel));
        if (numel && !is.read(reinterpret_cast<char*>(data.data()),
                              static_cast<std::streamsize>(data.size() * sizeof(float))))
            throw io_error("checkpoint truncated: " + path);
        ck.add_raw(name, std::move(shape), std::move(data));
    }
    return ck;
}

void store_module(Checkpoint& ck, const std::string& prefix,
                  const std::vector<std::pair<std::string, compute::Tensor>>& named) {
    for (const auto& [name, t] : named) ck.add(prefix + name, t);
}

void restore_module(const Checkpoint& ck, const std::string& prefix,
                    std::vector<std::pair<std::string, compute::Tensor>> named) {
    for (auto& [name, t] : named) {
        const auto* payload = ck.find(prefix + name);
        if (!payload) throw io_error("checkpoint missing tensor '" + prefix + name + "'");
        if (payload->first != t.shape())
            throw io_error("checkpoint tensor '" + prefix + name + "' has shape " +
                           compute::shape_str(payload->first) + ", expected " +
                           compute::shape_str(t.shape()));
        std::copy(payload->second.begin(), payload->second.end(), t.mutable_data().begin());
    }
}

}  // namespace actoreg::net
