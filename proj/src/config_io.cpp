#include "llvit/config_io.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "llvit/errors.hpp"

namespace llvit {

namespace {

using nlohmann::json;

// Strict object view: typed getters record which keys were consumed, and
// finish() rejects anything left over, so typos fail loudly with a path.
class Obj {
   public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j.is_object()) throw ConfigError("config field '" + path_ + "': expected an object");
    }

    std::string key_path(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

    bool has(const std::string& key) const { return j_.contains(key); }

    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    template <typename T>
    void get_int(const std::string& key, T& out) {
        if (!has(key)) return;
        const json& v = raw(key);
        if (!v.is_number_integer() && !v.is_number_unsigned()) {
            throw ConfigError("config field '" + key_path(key) + "': expected an integer");
        }
        out = v.get<T>();
    }

    void get_float(const std::string& key, float& out) {
        if (!has(key)) return;
        const json& v = raw(key);
        if (!v.is_number()) {
            throw ConfigError("config field '" + key_path(key) + "': expected a number");
        }
        out = v.get<float>();
    }

    void get_double(const std::string& key, double& out) {
        if (!has(key)) return;
        const json& v = raw(key);
        if (!v.is_number()) {
            throw ConfigError("config field '" + key_path(key) + "': expected a number");
        }
        out = v.get<double>();
    }

    void get_bool(const std::string& key, bool& out) {
        if (!has(key)) return;
        const json& v = raw(key);
        if (!v.is_boolean()) {
            throw ConfigError("config field '" + key_path(key) + "': expected a boolean");
        }
        out = v.get<bool>();
    }

    void get_string(const std::string& key, std::string& out) {
        if (!has(key)) return;
        const json& v = raw(key);
        if (!v.is_string()) {
            throw ConfigError("config field '" + key_path(key) + "': expected a string");
        }
        out = v.get<std::string>();
    }

    void get_int_list(const std::string& key, std::vector<int64_t>& out) {
        if (!has(key)) return;
        const json& v = raw(key);
        if (!v.is_array()) {
            throw ConfigError("config field '" + key_path(key) + "': expected an array");
        }
        out.clear();
        for (const json& e : v) {
            if (!e.is_number_integer() && !e.is_number_unsigned()) {
                throw ConfigError("config field '" + key_path(key) +
                                  "': expected an array of integers");
            }
            out.push_back(e.get<int64_t>());
        }
    }

    void finish() {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) {
                throw ConfigError("unknown config field '" + key_path(it.key()) + "'");
            }
        }
    }

   private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <typename Enum>
Enum parse_enum(Obj& o, const std::string& key, Enum (*from_name)(const std::string&),
                Enum fallback) {
    if (!o.has(key)) return fallback;
    std::string name;
    o.get_string(key, name);
    try {
        return from_name(name);
    } catch (const std::exception&) {
        throw ConfigError("config field '" + o.key_path(key) + "': unrecognized value '" +
                          name + "'");
    }
}

void parse_mixer(const json& j, const std::string& path, MixerConfig& mc) {
    Obj o(j, path);
    mc.kind = parse_enum(o, "kind", mixer_kind_from_name, mc.kind);
    o.get_int("therm_bits", mc.therm_bits);
    o.get_int_list("widths", mc.widths);
    o.get_int("fan_in", mc.fan_in);
    o.get_float("latent_lr_scale", mc.latent_lr_scale);
    o.get_bool("local_diff", mc.local_diff);
    mc.quant_granularity =
        parse_enum(o, "quant_granularity", quant_granularity_from_name, mc.quant_granularity);
    o.get_int("hidden_ratio", mc.hidden_ratio);
    o.finish();
}

void parse_model(const json& j, const std::string& path, ModelConfig& mc) {
    Obj o(j, path);
    o.get_int("image_size", mc.image_size);
    o.get_int("patch_size", mc.patch_size);
    o.get_int("channels", mc.channels);
    o.get_int("dim", mc.dim);
    o.get_int("heads", mc.heads);
    o.get_int("depth", mc.depth);
    o.get_int("num_classes", mc.num_classes);
    if (o.has("mixer")) parse_mixer(o.raw("mixer"), o.key_path("mixer"), mc.mixer);
    o.finish();
}

void parse_optimizer(const json& j, const std::string& path, OptimizerConfig& oc,
                     float& lr_min_frac) {
    Obj o(j, path);
    oc.kind = parse_enum(o, "kind", opt_kind_from_name, oc.kind);
    o.get_float("lr", oc.lr);
    o.get_float("beta1", oc.beta1);
    o.get_float("beta2", oc.beta2);
    o.get_float("eps", oc.eps);
    o.get_float("weight_decay", oc.weight_decay);
    o.get_float("momentum", oc.momentum);
    o.get_float("lr_min_frac", lr_min_frac);
    o.finish();
}

void parse_hw(const json& j, const std::string& path, HwConfig& hw) {
    Obj o(j, path);
    o.get_int("systolic_dim", hw.systolic_dim);
    o.get_double("clock_mhz", hw.clock_mhz);
    o.get_int("nonlinear_lanes_per_dim", hw.nonlinear_lanes_per_dim);
    o.finish();
}

}  // namespace

void RunConfig::validate() const {
    model.validate();
    hw.validate();
    if (epochs < 1) throw ConfigError("config field 'epochs': must be >= 1");
    if (batch_size < 1) throw ConfigError("config field 'batch_size': must be >= 1");
    if (calib_samples < 1) throw ConfigError("config field 'calib_samples': must be >= 1");
    if (dataset.empty()) throw ConfigError("config field 'dataset': must be non-empty");
    if (!(opt.lr > 0.0f)) throw ConfigError("config field 'optimizer.lr': must be > 0");
    if (lr_min_frac < 0.0f || lr_min_frac > 1.0f) {
        throw ConfigError("config field 'optimizer.lr_min_frac': must be in [0, 1]");
    }
}

RunConfig run_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig rc;
    Obj o(j, "");
    if (o.has("model")) parse_model(o.raw("model"), "model", rc.model);
    if (o.has("optimizer")) parse_optimizer(o.raw("optimizer"), "optimizer", rc.opt, rc.lr_min_frac);
    if (o.has("hw")) parse_hw(o.raw("hw"), "hw", rc.hw);
    o.get_string("dataset", rc.dataset);
    o.get_string("data_root", rc.data_root);
    o.get_string("out_dir", rc.out_dir);
    o.get_int("epochs", rc.epochs);
    o.get_int("batch_size", rc.batch_size);
    o.get_bool("augment", rc.augment);
    o.get_int("calib_samples", rc.calib_samples);
    o.get_int("seed", rc.seed);
    o.finish();
    rc.model.seed = rc.seed;
    rc.validate();
    return rc;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return run_config_from_json(ss.str());
}

std::string run_config_to_json(const RunConfig& rc) {
    json j;
    j["dataset"] = rc.dataset;
    j["data_root"] = rc.data_root;
    j["out_dir"] = rc.out_dir;
    j["epochs"] = rc.epochs;
    j["batch_size"] = rc.batch_size;
    j["augment"] = rc.augment;
    j["calib_samples"] = rc.calib_samples;
    j["seed"] = rc.seed;
    j["model"] = {
        {"image_size", rc.model.image_size}, {"patch_size", rc.model.patch_size},
        {"channels", rc.model.channels},     {"dim", rc.model.dim},
        {"heads", rc.model.heads},           {"depth", rc.model.depth},
        {"num_classes", rc.model.num_classes},
    };
    j["model"]["mixer"] = {
        {"kind", mixer_kind_name(rc.model.mixer.kind)},
        {"therm_bits", rc.model.mixer.therm_bits},
        {"widths", rc.model.mixer.widths},
        {"fan_in", rc.model.mixer.fan_in},
        {"latent_lr_scale", rc.model.mixer.latent_lr_scale},
        {"local_diff", rc.model.mixer.local_diff},
        {"quant_granularity", quant_granularity_name(rc.model.mixer.quant_granularity)},
        {"hidden_ratio", rc.model.mixer.hidden_ratio},
    };
    j["optimizer"] = {
        {"kind", opt_kind_name(rc.opt.kind)},
        {"lr", rc.opt.lr},
        {"beta1", rc.opt.beta1},
        {"beta2", rc.opt.beta2},
        {"eps", rc.opt.eps},
        {"weight_decay", rc.opt.weight_decay},
        {"momentum", rc.opt.momentum},
        {"lr_min_frac", rc.lr_min_frac},
    };
    j["hw"] = {
        {"systolic_dim", rc.hw.systolic_dim},
        {"clock_mhz", rc.hw.clock_mhz},
        {"nonlinear_lanes_per_dim", rc.hw.nonlinear_lanes_per_dim},
    };
    return j.dump(2);
}

}  // namespace llvit
