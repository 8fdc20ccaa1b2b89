#pragma once

// Shared plumbing: error taxonomy, deterministic RNG, FNV-1a digests and
// small string helpers used across the library.

#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ted {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad flags, bad config values. CLI exit code 1.
struct UsageError : Error {
    using Error::Error;
};

// Malformed corpora, vocab/checkpoint mismatches, validation failures.
// CLI exit code 2.
struct DataError : Error {
    using Error::Error;
};

// Tensor shape violations are data errors as far as callers are concerned.
struct ShapeError : DataError {
    using DataError::DataError;
};

// NaN/Inf escaped an operation, or training diverged. CLI exit code 3.
struct NumericError : Error {
    using Error::Error;
};

// Deterministic RNG. mt19937_64 has a fully specified sequence; the
// derived draws below avoid std::uniform_*_distribution whose output is
// implementation-defined, so identical seeds give identical streams on
// every platform.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 bits of entropy.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), rejection-sampled so the draw is unbiased.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw UsageError("Rng::uniform_int: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Fisher-Yates over indices, deterministic given the stream state.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

  private:
    std::mt19937_64 eng_;
};

// FNV-1a, used to fingerprint vocab manifests inside checkpoints.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string to_hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// printf-style formatting into a std::string.
inline std::string strf(const char* fmt, ...) {
    va_list args;
    va_start(args, fmt);
    va_list copy;
    va_copy(copy, args);
    const int n = std::vsnprintf(nullptr, 0, fmt, copy);
    va_end(copy);
    std::string out(n > 0 ? static_cast<std::size_t>(n) : 0, '\0');
    std::vsnprintf(out.data(), out.size() + 1, fmt, args);
    va_end(args);
    return out;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    return out;
}

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.emplace_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

template <typename It>
std::string join(It first, It last, const std::string& sep) {
    std::string out;
    for (It it = first; it != last; ++it) {
        if (!out.empty()) out += sep;
        out += *it;
    }
    return out;
}

// Lowercase word tokenizer: splits on anything outside [a-z0-9].
inline std::vector<std::string> tokenize_words(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char raw : text) {
        char c = raw;
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        const bool word = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
        if (word) {
            cur += c;
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace ted
