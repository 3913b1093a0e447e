#include "kooplab/io_util.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace kooplab {

std::string format_double(double v) {
    char buf[40];
    // 17 significant digits round-trip; try shorter forms first
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) return buf;
    }
    return buf;
}

std::uint64_t fnv1a(std::span<const unsigned char> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hash_hex(std::span<const unsigned char> bytes) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
    return buf;
}

std::string hash_file(const std::filesystem::path& p) {
    std::string content = read_file(p);
    return hash_hex({reinterpret_cast<const unsigned char*>(content.data()), content.size()});
}

void atomic_write(const std::filesystem::path& p, const std::string& content) {
    std::filesystem::create_directories(p.parent_path());
    std::filesystem::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open for write: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, p);
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + p.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return content;
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    put_u64(out, bits);
}

static void check_avail(const std::string& in, std::size_t pos, std::size_t n) {
    if (pos + n > in.size()) throw std::runtime_error("truncated binary payload");
}

std::uint32_t get_u32(const std::string& in, std::size_t& pos) {
    check_avail(in, pos, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 4;
    return v;
}

std::uint64_t get_u64(const std::string& in, std::size_t& pos) {
    check_avail(in, pos, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
    pos += 8;
    return v;
}

double get_f64(const std::string& in, std::size_t& pos) {
    std::uint64_t bits = get_u64(in, pos);
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
}

double exact_sum(std::span<const double> xs) {
    // Shewchuk's growing expansion: partials holds nonoverlapping components.
    std::vector<double> partials;
    for (double x : xs) {
        std::size_t used = 0;
        for (double y : partials) {
            if (std::abs(x) < std::abs(y)) std::swap(x, y);
            double hi = x + y;
            double lo = y - (hi - x);
            if (lo != 0.0) partials[used++] = lo;
            x = hi;
        }
        partials.resize(used);
        partials.push_back(x);
    }
    double total = 0.0;
    for (double p : partials) total += p;
    return total;
}

}  // namespace kooplab
