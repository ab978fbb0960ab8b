#pragma once
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <openssl/evp.h>

#include "pacbayes/dataset.hpp"

// Acquisition of the benchmark files: cache-first reads, HTTP(S) download
// with retries, and SHA-256 integrity pinning. Only the CLI and the data
// tests compile this header; it needs cpp-httplib (vendored) and OpenSSL.
// Define PACBAYES_NO_FETCH_HTTP to build the cache-only subset without them.
#ifndef PACBAYES_NO_FETCH_HTTP
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#endif

namespace pacbayes {

struct NetworkError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FetchOptions {
    bool offline = false;
    std::string base_url = "https://archive.ics.uci.edu/ml/machine-learning-databases";
    std::string expected_sha256; // overrides the manifest pin when non-empty
    int retries = 3;
};

inline std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256: digest failure");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << bytes;
    if (!out) throw DataError("cannot write " + p.string());
}

#ifndef PACBAYES_NO_FETCH_HTTP
inline std::string http_get(const std::string& base_url, const std::string& path, int retries) {
    std::string err;
    for (int attempt = 0; attempt < retries; ++attempt) {
        httplib::Client client(base_url);
        client.set_follow_location(true);
        client.set_connection_timeout(20);
        client.set_read_timeout(60);
        auto res = client.Get(("/" + path).c_str());
        if (res && res->status == 200) return res->body;
        err = res ? "HTTP status " + std::to_string(res->status)
                  : "transport error " + httplib::to_string(res.error());
    }
    throw NetworkError("download of " + path + " from " + base_url + " failed after " +
                       std::to_string(retries) + " attempts: " + err);
}
#endif

} // namespace detail

/// Reads the named dataset from cache_dir, downloading it first if absent
/// (unless offline). Verifies the SHA-256 against the supplied/pinned value,
/// or pins the observed hash on first fetch when none is known yet.
inline RawDataset fetch_dataset(const std::string& name, const std::filesystem::path& cache_dir,
                                const FetchOptions& opt = {}) {
    const DatasetSpec& spec = manifest_entry(name);
    const std::filesystem::path file = cache_dir / spec.name / spec.cache_file;
    const std::filesystem::path pin_file = file.string() + ".sha256";

    std::string bytes;
    if (std::filesystem::exists(file)) {
        bytes = detail::read_file(file);
    } else {
        if (opt.offline)
            throw DataError("dataset '" + name + "' not cached at " + file.string() +
                            " and offline mode is on; run the fetch command first");
#ifdef PACBAYES_NO_FETCH_HTTP
        throw DataError("dataset '" + name + "' not cached and this build has no HTTP support");
#else
        bytes = detail::http_get(opt.base_url, spec.remote_path, opt.retries);
        detail::write_file(file, bytes);
#endif
    }

    const std::string actual = sha256_hex(bytes);
    std::string expected = !opt.expected_sha256.empty() ? opt.expected_sha256 : spec.sha256;
    if (expected.empty() && std::filesystem::exists(pin_file))
        expected = detail::trim(detail::read_file(pin_file));
    if (!expected.empty()) {
        if (actual != expected)
            throw DataError("checksum mismatch for " + file.string() + ": expected " + expected +
                            ", got " + actual);
    } else {
        detail::write_file(pin_file, actual + "\n");
    }
    return parse_raw(spec, bytes);
}

/// Cache-and-preprocess convenience used by the CLI and the experiment
/// harness.
inline ProcessedDataset load_processed(const std::string& name,
                                       const std::filesystem::path& cache_dir,
                                       const FetchOptions& opt = {},
                                       const PreprocessOptions& pre = {}) {
    return preprocess(fetch_dataset(name, cache_dir, opt), pre);
}

} // namespace pacbayes
