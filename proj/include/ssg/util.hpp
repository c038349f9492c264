#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ssg {

std::string base64_encode(const unsigned char* data, std::size_t len);
std::vector<unsigned char> base64_decode(const std::string& s);

// f64 -> little-endian f32 blob and back (checkpoint / dump payloads)
std::string f32_base64(const std::vector<double>& values);
std::vector<double> f32_from_base64(const std::string& b64, std::size_t expected_count);

// Git blob hash of a file's bytes: sha1("blob <len>\0" + content), hex.
std::string git_blob_hash(const std::string& path);
std::string sha1_hex(const std::string& bytes);

// Locale-independent "%.9g" (scene JSONL float convention).
std::string fmt_g9(double v);
// Shortest round-trip formatting for reports.
std::string fmt_full(double v);

std::string read_file(const std::string& path);           // throws on failure
void write_file(const std::string& path, const std::string& content);

// Worker count: min(requested, SSG_THREADS) with SSG_THREADS unset meaning
// hardware_concurrency. Returns at least 1.
int worker_threads(int requested);

// Index-sliced parallel map; results land in caller-owned slots so output
// order (and FP reduction order downstream) is independent of scheduling.
void parallel_for(int n, const std::function<void(int)>& fn);

} // namespace ssg
