// Copyright 2026 The ddlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "fetch.hpp"

#include "ddlab/common.hpp"
#include "ddlab/data.hpp"

#include <curl/curl.h>
#include <openssl/evp.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <memory>

namespace ddlab::fetch {

namespace fs = std::filesystem;

std::vector<Archive> archives_for(const std::string& dataset) {
    if (dataset == "mnist") {
        const std::vector<std::string> bases = {"https://ossci-datasets.s3.amazonaws.com/mnist/",
                                                "http://yann.lecun.com/exdb/mnist/"};
        std::vector<Archive> out = {
            {"train-images-idx3-ubyte.gz", "f68b3c2dcbeaaa9fbdd348bbdeb94873", {}},
            {"train-labels-idx1-ubyte.gz", "d53e105ee54ea40749a09fcbcd1e9432", {}},
            {"t10k-images-idx3-ubyte.gz", "9fb629c4189551a2d022fa330f9573f3", {}},
            {"t10k-labels-idx1-ubyte.gz", "ec29112dd5afa0611ce80d1b7f02629c", {}},
        };
        for (auto& a : out)
            for (const auto& b : bases) a.urls.push_back(b + a.file);
        return out;
    }
    if (dataset == "cifar10")
        return {{"cifar-10-binary.tar.gz",
                 "c32a1d4ab5d03f1284b67883e8d87530",
                 {"https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz"}}};
    throw ArgumentError("unknown dataset '" + dataset + "' (expected mnist or cifar10)");
}

std::string md5_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    EVP_DigestInit_ex(ctx.get(), EVP_md5(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    static const char* hex = "0123456789abcdef";
    std::string s;
    for (unsigned i = 0; i < len; ++i) {
        s += hex[md[i] >> 4];
        s += hex[md[i] & 15];
    }
    return s;
}

namespace {

std::size_t write_cb(char* ptr, std::size_t size, std::size_t n, void* user) {
    return std::fwrite(ptr, size, n, static_cast<std::FILE*>(user)) * size;
}

bool download(const std::string& url, const fs::path& dest, std::string& err) {
    const fs::path tmp = dest.string() + ".part";
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) {
        err = "cannot write " + tmp.string();
        return false;
    }
    CURL* c = curl_easy_init();
    curl_easy_setopt(c, CURLOPT_URL, url.c_str());
    curl_easy_setopt(c, CURLOPT_WRITEFUNCTION, write_cb);
    curl_easy_setopt(c, CURLOPT_WRITEDATA, f);
    curl_easy_setopt(c, CURLOPT_FOLLOWLOCATION, 1L);
    curl_easy_setopt(c, CURLOPT_FAILONERROR, 1L);
    curl_easy_setopt(c, CURLOPT_CONNECTTIMEOUT, 30L);
    const CURLcode rc = curl_easy_perform(c);
    curl_easy_cleanup(c);
    std::fclose(f);
    if (rc != CURLE_OK) {
        err = curl_easy_strerror(rc);
        fs::remove(tmp);
        return false;
    }
    fs::rename(tmp, dest);
    return true;
}

std::uint64_t octal(const char* p, std::size_t n) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n && p[i]; ++i)
        if (p[i] >= '0' && p[i] <= '7') v = v * 8 + static_cast<std::uint64_t>(p[i] - '0');
    return v;
}

} // namespace

void extract_tar_gz(const fs::path& archive, const fs::path& dir) {
    const auto data = read_maybe_gzip(archive);
    std::size_t pos = 0;
    while (pos + 512 <= data.size()) {
        const char* h = reinterpret_cast<const char*>(data.data() + pos);
        if (h[0] == '\0') break;
        std::string name(h, strnlen(h, 100));
        if (std::string(h + 257, 5) == "ustar") {
            const std::string prefix(h + 345, strnlen(h + 345, 155));
            if (!prefix.empty()) name = prefix + "/" + name;
        }
        const std::uint64_t size = octal(h + 124, 12);
        const char type = h[156];
        pos += 512;
        if (pos + size > data.size()) throw DataError(archive.string() + ": truncated tar entry " + name);
        if ((type == '0' || type == '\0') && name.find("..") == std::string::npos) {
            const fs::path out = dir / name;
            fs::create_directories(out.parent_path());
            std::ofstream o(out, std::ios::binary);
            o.write(reinterpret_cast<const char*>(data.data() + pos), static_cast<std::streamsize>(size));
            if (!o) throw DataError("cannot write " + out.string());
        }
        pos += (size + 511) / 512 * 512;
    }
}

void fetch_dataset(const std::string& dataset, const fs::path& dir, bool verify_only, const std::string& mirror) {
    const auto archives = archives_for(dataset);
    if (!verify_only) fs::create_directories(dir);
    curl_global_init(CURL_GLOBAL_DEFAULT);
    std::vector<std::string> problems;
    for (auto a : archives) {
        if (!mirror.empty()) a.urls.insert(a.urls.begin(), mirror + (mirror.back() == '/' ? "" : "/") + a.file);
        const fs::path path = dir / a.file;
        if (fs::exists(path) && md5_file(path) == a.md5) {
            std::cerr << "ok       " << a.file << '\n';
            continue;
        }
        if (verify_only) {
            problems.push_back(a.file + (fs::exists(path) ? ": checksum mismatch" : ": missing"));
            continue;
        }
        bool got = false;
        std::string last_error;
        for (const auto& url : a.urls) {
            std::cerr << "fetching " << url << '\n';
            if (!download(url, path, last_error)) {
                std::cerr << "  failed: " << last_error << '\n';
                continue;
            }
            if (md5_file(path) != a.md5) {
                last_error = "checksum mismatch";
                std::cerr << "  failed: checksum mismatch\n";
                fs::remove(path);
                continue;
            }
            got = true;
            break;
        }
        if (!got) problems.push_back(a.file + ": " + last_error);
    }
    curl_global_cleanup();
    if (!problems.empty()) {
        std::string msg = "fetch-data " + dataset + " failed:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw DataError(msg);
    }
    if (dataset == "cifar10" && !fs::exists(dir / "cifar-10-batches-bin" / "test_batch.bin")) {
        if (verify_only) throw DataError("cifar10 archive present but not unpacked under " + dir.string());
        extract_tar_gz(dir / "cifar-10-binary.tar.gz", dir);
    }
}

} // namespace ddlab::fetch
