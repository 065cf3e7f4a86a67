#include "mimic/ssm/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <stdexcept>

namespace mimic::ssm {

namespace {

constexpr char MAGIC[] = "MIMICCKPT1\n";
constexpr std::size_t MAGIC_LEN = sizeof(MAGIC) - 1;

struct File {
    std::FILE* f = nullptr;
    explicit File(const std::string& path, const char* mode) : f(std::fopen(path.c_str(), mode)) {
        if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
    }
    ~File() {
        if (f) std::fclose(f);
    }
    File(const File&) = delete;
    File& operator=(const File&) = delete;
};

void write_all(std::FILE* f, const void* p, std::size_t n) {
    if (std::fwrite(p, 1, n, f) != n) throw std::runtime_error("checkpoint: short write");
}

void read_all(std::FILE* f, void* p, std::size_t n) {
    if (std::fread(p, 1, n, f) != n) throw std::runtime_error("checkpoint: short read");
}

nlohmann::json read_manifest(std::FILE* f) {
    char magic[MAGIC_LEN];
    read_all(f, magic, MAGIC_LEN);
    if (std::memcmp(magic, MAGIC, MAGIC_LEN) != 0)
        throw std::runtime_error("checkpoint: bad magic");
    uint64_t len = 0;
    read_all(f, &len, sizeof(len));
    if (len > (1u << 26)) throw std::runtime_error("checkpoint: absurd manifest length");
    std::string buf(len, '\0');
    read_all(f, buf.data(), len);
    return nlohmann::json::parse(buf);
}

} // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<ParamRef<float>>& params,
                     const CheckpointMeta& meta) {
    nlohmann::json manifest;
    manifest["dtype"] = "f32";
    manifest["vocab_hash"] = meta.vocab_hash;
    manifest["config"] = meta.config;
    manifest["trained_epochs"] = meta.trained_epochs;
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& pr : params)
        tensors.push_back({{"name", pr.name}, {"size", pr.p->size()}});
    manifest["tensors"] = std::move(tensors);
    const std::string m = manifest.dump(); // object keys sort; byte-stable

    // Write to a temp file and rename so a crash never leaves a torn file.
    const std::string tmp = path + ".tmp";
    {
        File out(tmp, "wb");
        write_all(out.f, MAGIC, MAGIC_LEN);
        const uint64_t len = m.size();
        write_all(out.f, &len, sizeof(len));
        write_all(out.f, m.data(), m.size());
        for (const auto& pr : params)
            write_all(out.f, pr.p->w.data(), pr.p->size() * sizeof(float));
        if (std::fflush(out.f) != 0) throw std::runtime_error("checkpoint: flush failed");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("checkpoint: rename failed for " + path);
}

CheckpointMeta load_checkpoint(const std::string& path,
                               std::vector<ParamRef<float>>& params) {
    File in(path, "rb");
    const nlohmann::json manifest = read_manifest(in.f);
    if (manifest.value("dtype", "") != std::string("f32"))
        throw std::runtime_error("checkpoint: unsupported dtype");
    const auto& tensors = manifest.at("tensors");
    if (tensors.size() != params.size())
        throw std::runtime_error("checkpoint: tensor count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& t = tensors.at(i);
        if (t.at("name").get<std::string>() != params[i].name)
            throw std::runtime_error("checkpoint: tensor name mismatch at " + params[i].name);
        if (t.at("size").get<std::size_t>() != params[i].p->size())
            throw std::runtime_error("checkpoint: tensor size mismatch at " + params[i].name);
    }
    for (auto& pr : params)
        read_all(in.f, pr.p->w.data(), pr.p->size() * sizeof(float));
    CheckpointMeta meta;
    meta.config = manifest.value("config", nlohmann::json::object());
    meta.vocab_hash = manifest.value("vocab_hash", "");
    meta.trained_epochs = manifest.value("trained_epochs", 0);
    return meta;
}

nlohmann::json read_checkpoint_manifest(const std::string& path) {
    File in(path, "rb");
    return read_manifest(in.f);
}

} // namespace mimic::ssm
