#include "kooplab/checkpoint.hpp"

#include "kooplab/errors.hpp"
#include "kooplab/io_util.hpp"

namespace kooplab {

namespace {
constexpr char kMagic[9] = "KTLCKPT1";
}

std::string serialize_checkpoint(const ParamStore& params) {
    std::string manifest;
    std::string blob;
    std::uint64_t offset = 0;  // in doubles
    std::uint32_t count = 0;
    for (const auto& [name, t] : params.items()) {
        put_u32(manifest, static_cast<std::uint32_t>(name.size()));
        manifest += name;
        put_u32(manifest, static_cast<std::uint32_t>(t.ndim()));
        for (int d : t.shape()) put_u64(manifest, static_cast<std::uint64_t>(d));
        put_u64(manifest, offset);
        for (std::int64_t i = 0; i < t.numel(); ++i) put_f64(blob, t.at(static_cast<int>(i)));
        offset += static_cast<std::uint64_t>(t.numel());
        ++count;
    }
    std::string out(kMagic, 8);
    put_u32(out, count);
    out += manifest;
    out += blob;
    return out;
}

ParamStore deserialize_checkpoint(const std::string& bytes) {
    if (bytes.size() < 12 || bytes.compare(0, 8, kMagic, 8) != 0)
        throw ConfigError("not a checkpoint file (bad magic)");
    std::size_t pos = 8;
    std::uint32_t count = get_u32(bytes, pos);

    struct Entry {
        std::string name;
        std::vector<int> shape;
        std::uint64_t offset;
        std::int64_t numel;
    };
    std::vector<Entry> entries;
    entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Entry e;
        std::uint32_t name_len = get_u32(bytes, pos);
        if (pos + name_len > bytes.size()) throw ConfigError("truncated checkpoint manifest");
        e.name = bytes.substr(pos, name_len);
        pos += name_len;
        std::uint32_t ndim = get_u32(bytes, pos);
        e.numel = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            auto dim = static_cast<int>(get_u64(bytes, pos));
            e.shape.push_back(dim);
            e.numel *= dim;
        }
        e.offset = get_u64(bytes, pos);
        entries.push_back(std::move(e));
    }

    std::size_t blob_start = pos;
    ParamStore params;
    for (const auto& e : entries) {
        std::vector<double> data(static_cast<std::size_t>(e.numel));
        std::size_t at = blob_start + static_cast<std::size_t>(e.offset) * 8;
        for (auto& v : data) v = get_f64(bytes, at);
        params.add(e.name, Tensor::from(e.shape, std::move(data)));
    }
    return params;
}

void save_checkpoint(const ParamStore& params, const std::filesystem::path& path) {
    atomic_write(path, serialize_checkpoint(params));
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
    return deserialize_checkpoint(read_file(path));
}

}  // namespace kooplab
