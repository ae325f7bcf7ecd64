#include "poselift/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "poselift/errors.hpp"
#include "poselift/hash.hpp"

namespace poselift::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'P', 'L', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kFloat64 = 1;

class Writer {
public:
    template <typename T>
    void put(const T& value) {
        const auto* p = reinterpret_cast<const char*>(&value);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }
    void put_bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const char*>(data);
        bytes_.insert(bytes_.end(), p, p + n);
    }
    std::vector<char>& bytes() { return bytes_; }

private:
    std::vector<char> bytes_;
};

class Reader {
public:
    explicit Reader(const std::vector<char>& bytes, std::size_t limit) : bytes_(bytes), limit_(limit) {}

    template <typename T>
    T get(const char* what) {
        T value;
        get_bytes(&value, sizeof(T), what);
        return value;
    }
    void get_bytes(void* out, std::size_t n, const char* what) {
        if (n > limit_ - pos_) {
            throw DataError("checkpoint truncated while reading " + std::string(what) + " at byte " +
                            std::to_string(pos_));
        }
        std::memcpy(out, bytes_.data() + pos_, n);
        pos_ += n;
    }
    std::size_t position() const { return pos_; }

private:
    const std::vector<char>& bytes_;
    std::size_t limit_;
    std::size_t pos_ = 0;
};

} // namespace

const StoredTensor* Checkpoint::find(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

const std::string& Checkpoint::meta(const std::string& key) const {
    auto it = metadata.find(key);
    if (it == metadata.end()) throw DataError("checkpoint metadata lacks key '" + key + "'");
    return it->second;
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    Writer w;
    w.put_bytes(kMagic, sizeof kMagic);
    w.put(kVersion);
    std::string meta;
    for (const auto& [key, value] : checkpoint.metadata) {
        if (key.find_first_of("=\n") != std::string::npos || value.find('\n') != std::string::npos) {
            throw ConfigError("checkpoint metadata entry '" + key + "' contains a reserved character");
        }
        meta += key + "=" + value + "\n";
    }
    w.put(static_cast<std::uint64_t>(meta.size()));
    w.put_bytes(meta.data(), meta.size());
    w.put(static_cast<std::uint32_t>(checkpoint.tensors.size()));
    for (const auto& t : checkpoint.tensors) {
        if (t.values.size() != shape_numel(t.shape)) {
            throw ConfigError("checkpoint tensor '" + t.name + "' has inconsistent shape");
        }
        w.put(static_cast<std::uint32_t>(t.name.size()));
        w.put_bytes(t.name.data(), t.name.size());
        w.put(kFloat64);
        w.put(static_cast<std::uint32_t>(t.shape.size()));
        for (auto extent : t.shape) w.put(static_cast<std::uint64_t>(extent));
        w.put_bytes(t.values.data(), t.values.size() * sizeof(double));
    }
    Fnv1a hash;
    hash.update(std::span(reinterpret_cast<const unsigned char*>(w.bytes().data()), w.bytes().size()));
    w.put(hash.digest());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw DataError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < sizeof kMagic + sizeof(std::uint32_t) + sizeof(std::uint64_t)) {
        throw DataError("checkpoint truncated: only " + std::to_string(bytes.size()) + " bytes");
    }
    const std::size_t body = bytes.size() - sizeof(std::uint64_t);

    Reader r(bytes, body);
    char magic[4];
    r.get_bytes(magic, sizeof magic, "magic");
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw DataError("not a checkpoint file: " + path.string());
    const auto version = r.get<std::uint32_t>("version");
    if (version != kVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));

    std::uint64_t stored_sum;
    std::memcpy(&stored_sum, bytes.data() + body, sizeof stored_sum);
    Fnv1a hash;
    hash.update(std::span(reinterpret_cast<const unsigned char*>(bytes.data()), body));
    if (hash.digest() != stored_sum) throw DataError("checkpoint checksum mismatch (corrupt file): " + path.string());

    Checkpoint ck;
    const auto meta_len = r.get<std::uint64_t>("metadata length");
    if (meta_len > body) throw DataError("checkpoint metadata length out of range");
    std::string meta(meta_len, '\0');
    r.get_bytes(meta.data(), meta_len, "metadata");
    std::istringstream lines(meta);
    for (std::string line; std::getline(lines, line);) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw DataError("malformed checkpoint metadata line: " + line);
        ck.metadata[line.substr(0, eq)] = line.substr(eq + 1);
    }

    const auto count = r.get<std::uint32_t>("tensor count");
    for (std::uint32_t k = 0; k < count; ++k) {
        StoredTensor t;
        const auto name_len = r.get<std::uint32_t>("tensor name length");
        t.name.resize(name_len);
        r.get_bytes(t.name.data(), name_len, "tensor name");
        const auto dtype = r.get<std::uint8_t>("dtype");
        if (dtype != kFloat64) throw DataError("tensor '" + t.name + "' has unsupported dtype");
        const auto rank = r.get<std::uint32_t>("rank");
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            t.shape.push_back(static_cast<std::size_t>(r.get<std::uint64_t>("extent")));
            n *= t.shape.back();
        }
        if (n > (body - r.position()) / sizeof(double)) {
            throw DataError("checkpoint truncated in tensor '" + t.name + "' at byte " + std::to_string(r.position()));
        }
        t.values.resize(n);
        r.get_bytes(t.values.data(), n * sizeof(double), "tensor values");
        ck.tensors.push_back(std::move(t));
    }
    if (r.position() != body) throw DataError("checkpoint has trailing bytes before checksum");
    return ck;
}

} // namespace poselift::nn
