// `fetch` support: HTTPS download of the real datasets, SHA-256 manifest
// bookkeeping, gzip decompression and minimal ustar extraction for the
// CIFAR tarball. Hashes are recorded into manifest.json on first fetch and
// verified against it on every later fetch (and against any hash already
// present in the built-in manifest).

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <openssl/evp.h>
#include <zlib.h>

#include <json.hpp>

#include "llvit/data.hpp"
#include "llvit/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace llvit {

std::vector<FetchItem> fetch_manifest(const std::string& name) {
    // hashes intentionally blank: recorded on first successful fetch
    if (name == "mnist") {
        const char* base = "https://ossci-datasets.s3.amazonaws.com/mnist/";
        std::vector<FetchItem> items;
        for (const char* f : {"train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz",
                              "t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz"}) {
            items.push_back({std::string(base) + f, f, ""});
        }
        return items;
    }
    if (name == "cifar10") {
        return {{"https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz",
                 "cifar-10-binary.tar.gz", ""}};
    }
    throw ConfigError("no fetch manifest for dataset: " + name);
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx, buf.data(), static_cast<size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    char hex[2 * EVP_MAX_MD_SIZE + 1];
    for (unsigned int i = 0; i < len; ++i) std::snprintf(hex + 2 * i, 3, "%02x", digest[i]);
    return std::string(hex, 2 * len);
}

namespace {

void download(const std::string& url, const std::string& dest) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("bad url: " + url);
    const auto host_start = scheme_end + 3;
    const auto path_start = url.find('/', host_start);
    const std::string origin = url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_follow_location(true);
    client.set_read_timeout(120, 0);
    std::ofstream out(dest, std::ios::binary);
    if (!out) throw IoError("cannot write " + dest);
    auto res = client.Get(path, [&](const char* data, size_t len) {
        out.write(data, static_cast<std::streamsize>(len));
        return static_cast<bool>(out);
    });
    if (!res || res->status != 200) {
        std::error_code ec;
        fs::remove(dest, ec);
        throw IoError("download failed for " + url +
                      (res ? " (http " + std::to_string(res->status) + ")" : " (no response)"));
    }
}

void gunzip_file(const std::string& src, const std::string& dest) {
    gzFile in = gzopen(src.c_str(), "rb");
    if (!in) throw IoError("cannot open " + src);
    std::ofstream out(dest, std::ios::binary);
    if (!out) {
        gzclose(in);
        throw IoError("cannot write " + dest);
    }
    std::vector<char> buf(1 << 16);
    int n;
    while ((n = gzread(in, buf.data(), static_cast<unsigned>(buf.size()))) > 0) {
        out.write(buf.data(), n);
    }
    const bool bad = n < 0;
    gzclose(in);
    if (bad || !out) throw FormatError("gzip decode failed for " + src);
}

// minimal ustar walk: extracts regular files whose basename matches one of
// `names` into `dest_dir`
void untar_select(const std::string& tar_path, const std::vector<std::string>& names,
                  const std::string& dest_dir) {
    std::ifstream in(tar_path, std::ios::binary);
    if (!in) throw IoError("cannot open " + tar_path);
    char header[512];
    while (in.read(header, 512)) {
        bool empty = true;
        for (char c : header) {
            if (c != 0) {
                empty = false;
                break;
            }
        }
        if (empty) break;  // end-of-archive marker
        std::string name(header, strnlen(header, 100));
        char size_field[13] = {};
        std::memcpy(size_field, header + 124, 12);
        const long long size = std::strtoll(size_field, nullptr, 8);
        const char type = header[156];
        const long long padded = (size + 511) / 512 * 512;

        std::string base = name;
        if (const auto slash = base.find_last_of('/'); slash != std::string::npos) {
            base = base.substr(slash + 1);
        }
        const bool want = (type == '0' || type == '\0') &&
                          std::find(names.begin(), names.end(), base) != names.end();
        if (want) {
            std::ofstream out(dest_dir + "/" + base, std::ios::binary);
            if (!out) throw IoError("cannot write " + dest_dir + "/" + base);
            std::vector<char> buf(static_cast<size_t>(size));
            in.read(buf.data(), size);
            if (!in) throw FormatError("truncated tar member in " + tar_path);
            out.write(buf.data(), size);
            in.ignore(padded - size);
        } else {
            in.ignore(padded);
        }
    }
}

}  // namespace

void fetch_dataset(const std::string& name, const std::string& root) {
    const std::string dir = root + "/" + name;
    fs::create_directories(dir);
    const std::string manifest_path = dir + "/manifest.json";

    json recorded = json::object();
    if (fs::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        in >> recorded;
    }

    json files = recorded.value("files", json::object());
    for (const FetchItem& item : fetch_manifest(name)) {
        const std::string dest = dir + "/" + item.filename;
        std::string expected = item.sha256;
        if (expected.empty() && files.contains(item.filename)) {
            expected = files[item.filename].get<std::string>();
        }
        if (!fs::exists(dest)) download(item.url, dest);
        const std::string actual = sha256_file(dest);
        if (!expected.empty() && actual != expected) {
            throw FormatError("checksum mismatch for " + dest + ": expected " + expected +
                              ", got " + actual);
        }
        files[item.filename] = actual;
    }

    // post-process into the layout the loaders expect
    if (name == "mnist") {
        for (const FetchItem& item : fetch_manifest(name)) {
            const std::string gz = dir + "/" + item.filename;
            const std::string plain = gz.substr(0, gz.size() - 3);
            if (!fs::exists(plain)) gunzip_file(gz, plain);
        }
    } else if (name == "cifar10") {
        const std::string tgz = dir + "/cifar-10-binary.tar.gz";
        const std::string tar = dir + "/cifar-10-binary.tar";
        if (!fs::exists(dir + "/data_batch_1.bin")) {
            gunzip_file(tgz, tar);
            untar_select(tar,
                         {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
                          "data_batch_4.bin", "data_batch_5.bin", "test_batch.bin"},
                         dir);
            std::error_code ec;
            fs::remove(tar, ec);
        }
    }

    json manifest;
    manifest["dataset"] = name;
    manifest["files"] = files;
    std::ofstream out(manifest_path);
    out << manifest.dump(2) << "\n";
    if (!out) throw IoError("cannot write " + manifest_path);
}

}  // namespace llvit
