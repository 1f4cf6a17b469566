#include "trainer/checkpoint.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <type_traits>

#include "common/error.hpp"

namespace ipseg::train {

namespace {

constexpr char kMagic[4] = {'I', 'P', 'U', 'N'};

class Writer {
public:
    template <class U>
    void put(U v)
    {
        static_assert(std::is_arithmetic_v<U>);
        char raw[sizeof(U)];
        std::memcpy(raw, &v, sizeof(U));
        if constexpr (std::endian::native == std::endian::big)
            std::reverse(raw, raw + sizeof(U));
        out_.append(raw, sizeof(U));
    }
    void put_string(const std::string& s)
    {
        put<std::uint64_t>(s.size());
        out_ += s;
    }
    void put_blobs(const std::vector<Blob>& blobs)
    {
        put<std::uint32_t>(static_cast<std::uint32_t>(blobs.size()));
        for (const auto& b : blobs) {
            put_string(b.name);
            put<std::uint32_t>(static_cast<std::uint32_t>(b.shape.size()));
            for (auto d : b.shape)
                put<std::int64_t>(d);
            put<std::uint64_t>(b.data.size());
            for (float f : b.data)
                put(f);
        }
    }
    std::string& bytes() { return out_; }

private:
    std::string out_;
};

class Reader {
public:
    Reader(const std::string& s, std::size_t pos, std::size_t end) : s_(s), pos_(pos), end_(end) {}

    template <class U>
    U get()
    {
        need(sizeof(U));
        char raw[sizeof(U)];
        std::memcpy(raw, s_.data() + pos_, sizeof(U));
        if constexpr (std::endian::native == std::endian::big)
            std::reverse(raw, raw + sizeof(U));
        pos_ += sizeof(U);
        U v;
        std::memcpy(&v, raw, sizeof(U));
        return v;
    }
    std::string get_string()
    {
        const auto n = get<std::uint64_t>();
        need(n);
        std::string out = s_.substr(pos_, static_cast<std::size_t>(n));
        pos_ += static_cast<std::size_t>(n);
        return out;
    }
    std::vector<Blob> get_blobs()
    {
        const auto count = get<std::uint32_t>();
        std::vector<Blob> blobs;
        for (std::uint32_t i = 0; i < count; ++i) {
            Blob b;
            b.name = get_string();
            const auto rank = get<std::uint32_t>();
            if (rank > 8)
                throw Error(ErrorCode::Corrupt, "blob '" + b.name + "' has rank " + std::to_string(rank));
            std::int64_t n = 1;
            for (std::uint32_t r = 0; r < rank; ++r) {
                b.shape.push_back(get<std::int64_t>());
                n *= b.shape.back();
            }
            const auto size = get<std::uint64_t>();
            if (size != static_cast<std::uint64_t>(n))
                throw Error(ErrorCode::Corrupt, "blob '" + b.name + "' length does not match its shape");
            need(size * sizeof(float));
            b.data.resize(static_cast<std::size_t>(size));
            for (auto& f : b.data)
                f = get<float>();
            blobs.push_back(std::move(b));
        }
        return blobs;
    }
    bool done() const { return pos_ == end_; }

private:
    void need(std::uint64_t n) const
    {
        if (n > end_ - pos_)
            throw Error(ErrorCode::Corrupt, "checkpoint payload is truncated");
    }

    const std::string& s_;
    std::size_t pos_;
    std::size_t end_;
};

std::uint32_t crc_of(const char* data, std::size_t n)
{
    uLong crc = crc32(0L, Z_NULL, 0);
    while (n > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
        data += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ck)
{
    Writer w;
    w.bytes().append(kMagic, 4);
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put_string(ck.config_json().dump());
    w.put<std::int64_t>(ck.epoch);
    w.put_string(ck.rng_state);
    w.put_blobs(ck.tensors);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ck.optimizer.kind));
    w.put<std::int64_t>(ck.optimizer.steps);
    w.put_blobs(ck.optimizer.m);
    w.put_blobs(ck.optimizer.v);
    const std::string& b = w.bytes();
    w.put<std::uint32_t>(crc_of(b.data() + 4, b.size() - 4));
    return std::move(w.bytes());
}

Checkpoint decode_checkpoint(const std::string& bytes)
{
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw Error(ErrorCode::BadMagic, "not a checkpoint (magic is not IPUN)");
    if (bytes.size() < 12)
        throw Error(ErrorCode::Corrupt, "checkpoint is truncated");
    const auto version = Reader(bytes, 4, 8).get<std::uint32_t>();
    if (version != kCheckpointVersion)
        throw Error(ErrorCode::VersionUnsupported, "checkpoint version " + std::to_string(version) + " (supported: " +
                                                       std::to_string(kCheckpointVersion) + ")");
    const std::size_t end = bytes.size() - 4;
    const auto stored = Reader(bytes, end, bytes.size()).get<std::uint32_t>();
    if (stored != crc_of(bytes.data() + 4, end - 4))
        throw Error(ErrorCode::Corrupt, "checkpoint checksum mismatch");

    Reader r(bytes, 8, end);
    Checkpoint ck;
    nlohmann::json cfg;
    try {
        cfg = nlohmann::json::parse(r.get_string());
        ck.pipeline = parse_pipeline(cfg.at("pipeline").get<std::string>());
        ck.net = cfg.at("net").get<net::NetConfig>();
        ck.hp = cfg.at("hyper").get<HyperParams>();
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Corrupt, std::string("checkpoint config block: ") + e.what());
    }
    ck.epoch = r.get<std::int64_t>();
    ck.rng_state = r.get_string();
    ck.tensors = r.get_blobs();
    const auto kind = r.get<std::uint32_t>();
    if (kind > 1)
        throw Error(ErrorCode::Corrupt, "unknown optimizer kind " + std::to_string(kind));
    ck.optimizer.kind = static_cast<nn::OptimizerKind>(kind);
    ck.optimizer.steps = r.get<std::int64_t>();
    ck.optimizer.m = r.get_blobs();
    ck.optimizer.v = r.get_blobs();
    if (!r.done())
        throw Error(ErrorCode::Corrupt, "trailing bytes after optimizer state");
    return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path)
{
    const std::string bytes = encode_checkpoint(ck);
    std::ofstream out(path, std::ios::binary);
    if (!out || !out.write(bytes.data(), static_cast<std::streamsize>(bytes.size())))
        throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace ipseg::train
