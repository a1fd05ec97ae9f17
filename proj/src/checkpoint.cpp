#include "bat/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

namespace bat {

namespace {

constexpr char kMagic[8] = {'B', 'A', 'T', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void write_le(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));  // host is little-endian
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!is) throw std::runtime_error("checkpoint: truncated file");
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, TensorPtr>>& named) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    os.write(kMagic, sizeof(kMagic));
    write_le<std::uint64_t>(os, named.size());
    for (const auto& [name, t] : named) {
        write_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t->shape.size()));
        for (int d : t->shape) write_le<std::uint64_t>(os, static_cast<std::uint64_t>(d));
        for (double v : t->data) write_le<double>(os, v);
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

std::vector<std::pair<std::string, TensorPtr>> load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const auto count = read_le<std::uint64_t>(is);
    std::vector<std::pair<std::string, TensorPtr>> out;
    out.reserve(count);
    for (std::uint64_t r = 0; r < count; ++r) {
        const auto name_len = read_le<std::uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const auto ndims = read_le<std::uint32_t>(is);
        std::vector<int> shape(ndims);
        for (auto& d : shape) d = static_cast<int>(read_le<std::uint64_t>(is));
        auto t = make_tensor(shape);
        for (double& v : t->data) v = read_le<double>(is);
        out.emplace_back(std::move(name), std::move(t));
    }
    return out;
}

void restore_checkpoint(const std::string& path,
                        const std::vector<std::pair<std::string, TensorPtr>>& named) {
    auto loaded = load_checkpoint(path);
    std::map<std::string, TensorPtr> by_name;
    for (auto& [n, t] : loaded) by_name[n] = t;
    for (const auto& [n, dst] : named) {
        auto it = by_name.find(n);
        if (it == by_name.end()) throw std::runtime_error("checkpoint: missing tensor " + n);
        if (it->second->shape != dst->shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + n + ": file " +
                                     shape_str(it->second->shape) + " vs model " +
                                     shape_str(dst->shape));
        dst->data = it->second->data;
    }
}

}  // namespace bat
