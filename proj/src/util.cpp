#include "ssg/util.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace ssg {

namespace {
const char* kB64 = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_index(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}
} // namespace

std::string base64_encode(const unsigned char* data, std::size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (std::size_t i = 0; i < len; i += 3) {
        unsigned int v = static_cast<unsigned int>(data[i]) << 16;
        if (i + 1 < len) v |= static_cast<unsigned int>(data[i + 1]) << 8;
        if (i + 2 < len) v |= static_cast<unsigned int>(data[i + 2]);
        out.push_back(kB64[(v >> 18) & 0x3f]);
        out.push_back(kB64[(v >> 12) & 0x3f]);
        out.push_back(i + 1 < len ? kB64[(v >> 6) & 0x3f] : '=');
        out.push_back(i + 2 < len ? kB64[v & 0x3f] : '=');
    }
    return out;
}

std::vector<unsigned char> base64_decode(const std::string& s) {
    if (s.size() % 4 != 0) throw std::invalid_argument("base64: length not a multiple of 4");
    std::vector<unsigned char> out;
    out.reserve(s.size() / 4 * 3);
    for (std::size_t i = 0; i < s.size(); i += 4) {
        int vals[4] = {0, 0, 0, 0};
        int pad = 0;
        for (int k = 0; k < 4; ++k) {
            const char c = s[i + static_cast<std::size_t>(k)];
            if (c == '=') {
                pad += 1;
                vals[k] = 0;
            } else {
                vals[k] = b64_index(c);
                if (vals[k] < 0 || pad > 0) throw std::invalid_argument("base64: bad character");
            }
        }
        const unsigned int v = (static_cast<unsigned int>(vals[0]) << 18) | (static_cast<unsigned int>(vals[1]) << 12) |
                               (static_cast<unsigned int>(vals[2]) << 6) | static_cast<unsigned int>(vals[3]);
        out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
        if (pad < 2) out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
        if (pad < 1) out.push_back(static_cast<unsigned char>(v & 0xff));
    }
    return out;
}

std::string f32_base64(const std::vector<double>& values) {
    std::vector<unsigned char> bytes(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float f = static_cast<float>(values[i]);
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        bytes[i * 4 + 0] = static_cast<unsigned char>(u & 0xff);
        bytes[i * 4 + 1] = static_cast<unsigned char>((u >> 8) & 0xff);
        bytes[i * 4 + 2] = static_cast<unsigned char>((u >> 16) & 0xff);
        bytes[i * 4 + 3] = static_cast<unsigned char>((u >> 24) & 0xff);
    }
    return base64_encode(bytes.data(), bytes.size());
}

std::vector<double> f32_from_base64(const std::string& b64, std::size_t expected_count) {
    const auto bytes = base64_decode(b64);
    if (bytes.size() != expected_count * 4)
        throw std::invalid_argument("f32 payload: expected " + std::to_string(expected_count * 4) + " bytes, got " +
                                    std::to_string(bytes.size()));
    std::vector<double> out(expected_count);
    for (std::size_t i = 0; i < expected_count; ++i) {
        std::uint32_t u = static_cast<std::uint32_t>(bytes[i * 4 + 0]) | (static_cast<std::uint32_t>(bytes[i * 4 + 1]) << 8) |
                          (static_cast<std::uint32_t>(bytes[i * 4 + 2]) << 16) | (static_cast<std::uint32_t>(bytes[i * 4 + 3]) << 24);
        float f;
        std::memcpy(&f, &u, 4);
        out[i] = static_cast<double>(f);
    }
    return out;
}

std::string sha1_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha1(), nullptr) != 1)
        throw std::runtime_error("sha1 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string git_blob_hash(const std::string& path) {
    const std::string content = read_file(path);
    std::string header = "blob " + std::to_string(content.size());
    header.push_back('\0');
    return sha1_hex(header + content);
}

std::string fmt_g9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string fmt_full(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // shorten when a shorter form round-trips
    for (int prec = 1; prec <= 16; ++prec) {
        char tmp[64];
        std::snprintf(tmp, sizeof(tmp), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(tmp, "%lf", &back);
        if (back == v) return tmp;
    }
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

int worker_threads(int requested) {
    int cap = requested;
    if (const char* env = std::getenv("SSG_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) cap = std::min(cap, v);
    }
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    return std::max(1, std::min(cap, hw));
}

void parallel_for(int n, const std::function<void(int)>& fn) {
    const int workers = worker_threads(n);
    if (workers <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace ssg
