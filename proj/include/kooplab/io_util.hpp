#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace kooplab {

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

// 64-bit FNV-1a, used for content addressing in manifests.
std::uint64_t fnv1a(std::span<const unsigned char> bytes);
std::string hash_hex(std::span<const unsigned char> bytes);
std::string hash_file(const std::filesystem::path& p);

// Write-then-rename so readers never observe a partial file.
void atomic_write(const std::filesystem::path& p, const std::string& content);

std::string read_file(const std::filesystem::path& p);

// Little-endian scalar IO for the binary cache / checkpoint formats.
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f64(std::string& out, double v);
std::uint32_t get_u32(const std::string& in, std::size_t& pos);
std::uint64_t get_u64(const std::string& in, std::size_t& pos);
double get_f64(const std::string& in, std::size_t& pos);

// Exactly rounded sum of a double sequence (Shewchuk expansion); the result
// is independent of summand order.
double exact_sum(std::span<const double> xs);

}  // namespace kooplab
