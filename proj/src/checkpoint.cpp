#include "llvit/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <utility>
#include <vector>

#include <json.hpp>

#include "llvit/errors.hpp"
#include "llvit/version.hpp"

namespace llvit {

namespace {

using nlohmann::json;

constexpr char kMagic[8] = {'L', 'L', 'V', 'I', 'T', 'C', 'K', '1'};

void write_u64_le(std::ostream& out, uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 8);
}

uint64_t read_u64_le(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

// thermometer thresholds ride along as named tensors, one per lut block
std::vector<std::pair<std::string, const Tensor*>> threshold_tensors(Model& model) {
    std::vector<std::pair<std::string, const Tensor*>> out;
    const int depth = model.config().depth;
    for (int b = 0; b < depth; ++b) {
        ChannelMixer& mx = model.blocks()[static_cast<size_t>(b)]->mixer();
        if (mx.kind() == MixerKind::lut && mx.codec().calibrated()) {
            out.emplace_back("block" + std::to_string(b) + ".mixer.therm.thresholds",
                             &mx.codec().thresholds);
        }
    }
    return out;
}

}  // namespace

void save_checkpoint(const std::string& path, const RunConfig& rc, Model& model,
                     const Optimizer* opt, int epoch, double best_acc) {
    std::vector<std::pair<std::string, const Tensor*>> entries;
    for (Parameter* p : model.params()) entries.emplace_back(p->name, &p->value);
    for (auto& e : threshold_tensors(model)) entries.push_back(e);
    if (opt) {
        for (const auto& [key, t] : opt->state()) entries.emplace_back("opt." + key, &t);
    }

    json manifest = json::array();
    uint64_t offset = 0;
    for (const auto& [name, t] : entries) {
        json shape = json::array();
        for (int64_t d : t->shape()) shape.push_back(d);
        manifest.push_back({{"name", name},
                            {"dtype", dtype_name(t->dtype())},
                            {"shape", shape},
                            {"offset", offset},
                            {"bytes", t->nbytes()}});
        offset += t->nbytes();
    }

    json header;
    header["version"] = kToolVersion;
    header["config"] = json::parse(run_config_to_json(rc));
    header["epoch"] = epoch;
    header["best_acc"] = best_acc;
    header["opt_kind"] = opt ? opt_kind_name(opt->config().kind) : "";
    header["opt_step"] = opt ? opt->step_count() : 0;
    header["tensors"] = manifest;
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out.write(kMagic, 8);
    write_u64_le(out, header_text.size());
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& [name, t] : entries) {
        (void)name;
        out.write(t->raw(), static_cast<std::streamsize>(t->nbytes()));
    }
    if (!out) throw IoError("short write while saving checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        throw FormatError("bad checkpoint magic in " + path);
    }
    const uint64_t header_len = read_u64_le(in);
    if (!in || header_len == 0 || header_len > (1ull << 30)) {
        throw FormatError("implausible checkpoint header length in " + path);
    }
    std::string header_text(header_len, '\0');
    in.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw FormatError("truncated checkpoint header in " + path);

    json header;
    try {
        header = json::parse(header_text);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }

    Checkpoint ck;
    try {
        ck.version = header.at("version").get<std::string>();
        ck.config_json = header.at("config").dump();
        ck.epoch = header.at("epoch").get<int>();
        ck.best_acc = header.at("best_acc").get<double>();
        ck.opt_kind = header.at("opt_kind").get<std::string>();
        ck.opt_step = header.at("opt_step").get<int64_t>();
        for (const json& entry : header.at("tensors")) {
            const std::string name = entry.at("name").get<std::string>();
            const Dtype dt = dtype_from_name(entry.at("dtype").get<std::string>());
            std::vector<int64_t> shape;
            for (const json& d : entry.at("shape")) shape.push_back(d.get<int64_t>());
            Tensor t = Tensor::zeros(shape, dt);
            if (t.nbytes() != entry.at("bytes").get<uint64_t>()) {
                throw FormatError("checkpoint tensor '" + name + "': byte count disagrees with shape");
            }
            in.seekg(static_cast<std::streamoff>(8 + 8 + header_len +
                                                 entry.at("offset").get<uint64_t>()));
            in.read(t.raw(), static_cast<std::streamsize>(t.nbytes()));
            if (!in) throw FormatError("truncated checkpoint payload for tensor '" + name + "'");
            ck.tensors.emplace(name, std::move(t));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed checkpoint header: ") + e.what());
    }
    return ck;
}

RunConfig checkpoint_config(const Checkpoint& ck) { return run_config_from_json(ck.config_json); }

void restore_model(Model& model, const Checkpoint& ck) {
    for (Parameter* p : model.params()) {
        auto it = ck.tensors.find(p->name);
        if (it == ck.tensors.end()) {
            throw FormatError("checkpoint is missing tensor '" + p->name + "'");
        }
        if (!(it->second.same_shape(p->value)) || it->second.dtype() != p->value.dtype()) {
            throw FormatError("checkpoint tensor '" + p->name + "' has mismatched shape or dtype");
        }
        std::memcpy(p->value.raw(), it->second.raw(), it->second.nbytes());
        p->grad.zero();
    }
    const int depth = model.config().depth;
    for (int b = 0; b < depth; ++b) {
        ChannelMixer& mx = model.blocks()[static_cast<size_t>(b)]->mixer();
        if (mx.kind() != MixerKind::lut) continue;
        auto it = ck.tensors.find("block" + std::to_string(b) + ".mixer.therm.thresholds");
        if (it == ck.tensors.end()) continue;  // uncalibrated checkpoint
        if (it->second.ndim() != 2 || it->second.dim(0) != model.config().dim) {
            throw FormatError("checkpoint thermometer thresholds have mismatched shape");
        }
        mx.codec().bits = static_cast<int>(it->second.dim(1));
        mx.codec().thresholds = it->second;
    }
}

void restore_optimizer(Optimizer& opt, const Checkpoint& ck) {
    if (!ck.opt_kind.empty() && ck.opt_kind != opt_kind_name(opt.config().kind)) {
        throw FormatError("checkpoint optimizer kind '" + ck.opt_kind +
                          "' does not match the configured optimizer");
    }
    opt.state().clear();
    for (const auto& [name, t] : ck.tensors) {
        if (name.rfind("opt.", 0) == 0) opt.state().emplace(name.substr(4), t);
    }
    opt.set_step_count(ck.opt_step);
}

}  // namespace llvit
