// Command-line front end: train / eval / stats / perf / export / fetch.
// Exit codes: 0 success, 2 user/config/format error, 3 numerical failure.
#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "llvit/checkpoint.hpp"
#include "llvit/config_io.hpp"
#include "llvit/data.hpp"
#include "llvit/errors.hpp"
#include "llvit/int_infer.hpp"
#include "llvit/netlist.hpp"
#include "llvit/perf_model.hpp"
#include "llvit/stats.hpp"
#include "llvit/threading.hpp"
#include "llvit/train.hpp"
#include "llvit/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace llvit;

namespace {

void write_file(const std::string& path, const std::string& text) {
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << text;
    if (!out) throw IoError("short write: " + path);
}

DatasetPair load_data_for(const RunConfig& rc) {
    const std::string root = resolve_data_root(rc.data_root);
    DatasetPair pair = load_dataset(rc.dataset, root);
    if (pair.train.num_classes != rc.model.num_classes) {
        throw ConfigError("dataset '" + rc.dataset + "' has " +
                          std::to_string(pair.train.num_classes) +
                          " classes but the model config expects " +
                          std::to_string(rc.model.num_classes));
    }
    if (pair.train.height != rc.model.image_size || pair.train.width != rc.model.image_size ||
        pair.train.channels != rc.model.channels) {
        throw ConfigError("dataset '" + rc.dataset + "' geometry " +
                          std::to_string(pair.train.height) + "x" +
                          std::to_string(pair.train.width) + "x" +
                          std::to_string(pair.train.channels) +
                          " does not match the model config image size");
    }
    return pair;
}

int calibrate_if_needed(Model& model, const Dataset& train, int64_t calib_samples) {
    if (!model.needs_calibration()) return 0;
    const int64_t n = std::min<int64_t>(calib_samples, train.size());
    Tensor images = normalized_batch(train, 0, n);
    return model.calibrate(images);
}

Dataset truncate_dataset(const Dataset& ds, int64_t n) {
    Dataset out = ds;
    out.pixels.resize(static_cast<size_t>(n * ds.sample_bytes()));
    out.labels.resize(static_cast<size_t>(n));
    return out;
}

json census_json(const OpCensus& census, int64_t samples) {
    json fams;
    for (const auto& [key, c] : census) {
        fams[key] = {{"mults", c.mults},
                     {"adds", c.adds},
                     {"lookups", c.lookups},
                     {"compares", c.compares}};
    }
    json per_image;
    for (const auto& [key, c] : census) {
        per_image[key] = {
            {"mults", static_cast<double>(c.mults) / static_cast<double>(samples)},
            {"adds", static_cast<double>(c.adds) / static_cast<double>(samples)},
            {"lookups", static_cast<double>(c.lookups) / static_cast<double>(samples)},
            {"compares", static_cast<double>(c.compares) / static_cast<double>(samples)}};
    }
    return {{"samples", samples}, {"totals", fams}, {"per_image", per_image}};
}

// -------- train --------

struct TrainArgs {
    std::string config_path, resume_path;
    int64_t seed = -1;
    int epochs_override = 0;
};

void cmd_train(const TrainArgs& args) {
    RunConfig rc;
    Checkpoint ck;
    const bool resuming = !args.resume_path.empty();
    if (resuming) {
        ck = load_checkpoint(args.resume_path);
        rc = checkpoint_config(ck);  // resume must replay the original config
    } else {
        if (args.config_path.empty()) throw ConfigError("train: --config is required");
        rc = load_run_config(args.config_path);
        if (args.seed >= 0) {
            rc.seed = static_cast<uint64_t>(args.seed);
            rc.model.seed = rc.seed;
        }
    }
    if (args.epochs_override > 0) rc.epochs = args.epochs_override;
    rc.validate();

    DatasetPair data = load_data_for(rc);
    Model model(rc.model);
    const int perturbed = calibrate_if_needed(model, data.train, rc.calib_samples);
    if (rc.model.mixer.kind == MixerKind::lut) {
        std::cout << "thermometer calibration: " << perturbed
                  << " degenerate feature columns perturbed\n";
    }

    Optimizer opt(rc.opt);
    int start_epoch = 0;
    double best = 0.0;
    if (resuming) {
        restore_model(model, ck);
        restore_optimizer(opt, ck);
        start_epoch = ck.epoch + 1;
        best = ck.best_acc;
        std::cout << "resuming from epoch " << start_epoch << " (best " << best << ")\n";
    }

    fs::create_directories(rc.out_dir);
    const std::string metrics_path = rc.out_dir + "/metrics.jsonl";
    std::ofstream metrics(metrics_path,
                          resuming ? (std::ios::app | std::ios::out) : std::ios::trunc);
    if (!metrics) throw IoError("cannot open " + metrics_path);

    for (int epoch = start_epoch; epoch < rc.epochs; ++epoch) {
        const float lr = cosine_lr(rc.opt.lr, rc.lr_min_frac, epoch, rc.epochs);
        EpochMetrics tm =
            train_epoch(model, data.train, opt, lr, rc.batch_size, rc.seed, epoch, rc.augment);
        EvalResult ev = evaluate(model, data.test, rc.batch_size);
        json line = {{"epoch", epoch},
                     {"lr", lr},
                     {"train_loss", tm.loss},
                     {"train_acc", tm.accuracy},
                     {"test_acc", ev.accuracy}};
        metrics << line.dump() << "\n";
        metrics.flush();
        std::cout << "epoch " << epoch << "  lr " << lr << "  train_loss " << tm.loss
                  << "  train_acc " << tm.accuracy << "  test_acc " << ev.accuracy << "\n";
        if (ev.accuracy >= best) {
            best = ev.accuracy;
            save_checkpoint(rc.out_dir + "/best.ckpt", rc, model, &opt, epoch, best);
        }
        save_checkpoint(rc.out_dir + "/last.ckpt", rc, model, &opt, epoch, best);
    }
    std::cout << "done; best test accuracy " << best << "\n";
}

// -------- eval --------

struct EvalArgs {
    std::string checkpoint_path, json_out, census_out;
    bool int8_path = false;
    int condsum_bits = 4;
    int ptq_bits = 0;
    int64_t max_samples = 0;
};

void cmd_eval(const EvalArgs& args) {
    Checkpoint ck = load_checkpoint(args.checkpoint_path);
    RunConfig rc = checkpoint_config(ck);
    DatasetPair data = load_data_for(rc);
    Model model(rc.model);
    restore_model(model, ck);
    calibrate_if_needed(model, data.train, rc.calib_samples);

    Dataset test = data.test;
    if (args.max_samples > 0 && args.max_samples < test.size()) {
        test = truncate_dataset(test, args.max_samples);
    }

    EvalResult ev = evaluate(model, test, rc.batch_size);
    json report;
    report["version"] = kToolVersion;
    report["config"] = json::parse(run_config_to_json(rc));
    report["samples"] = test.size();
    report["float_top1"] = ev.accuracy;
    std::cout << "float top-1: " << ev.accuracy << "  (" << test.size() << " samples)\n";
    json per_class = json::array();
    for (size_t c = 0; c < ev.per_class_total.size(); ++c) {
        const double acc = ev.per_class_total[c] > 0
                               ? static_cast<double>(ev.per_class_correct[c]) /
                                     static_cast<double>(ev.per_class_total[c])
                               : 0.0;
        per_class.push_back({{"class", c},
                             {"correct", ev.per_class_correct[c]},
                             {"total", ev.per_class_total[c]},
                             {"accuracy", acc}});
        std::cout << "  class " << c << ": " << acc << " (" << ev.per_class_correct[c] << "/"
                  << ev.per_class_total[c] << ")\n";
    }
    report["per_class"] = per_class;

    if (args.ptq_bits > 0) {
        // float path with dequantized encoded values (post-training quantization)
        for (auto& blk : model.blocks()) {
            ChannelMixer& mx = blk->mixer();
            if (mx.kind() != MixerKind::lut) continue;
            QuantizedEncoded qe = quantize_encoded(mx.cond_sum().weight().value, args.ptq_bits,
                                                   rc.model.mixer.quant_granularity);
            Tensor deq = dequantize_encoded(qe);
            std::memcpy(mx.cond_sum().weight().value.raw(), deq.raw(), deq.nbytes());
        }
        EvalResult pv = evaluate(model, test, rc.batch_size);
        report["ptq_bits"] = args.ptq_bits;
        report["ptq_top1"] = pv.accuracy;
        std::cout << "ptq(" << args.ptq_bits << "-bit encoded) top-1: " << pv.accuracy << "\n";
    }

    if (args.int8_path) {
        IntModel im = quantize_model(model, data.train, rc.calib_samples, args.condsum_bits);
        OpCensus census;
        std::vector<int32_t> preds;
        preds.reserve(static_cast<size_t>(test.size()));
        for (int64_t start = 0; start < test.size(); start += 256) {
            const int64_t n = std::min<int64_t>(256, test.size() - start);
            std::vector<int32_t> chunk = im.predict(test, start, n, &census);
            preds.insert(preds.end(), chunk.begin(), chunk.end());
        }
        int64_t correct = 0, agree = 0;
        for (int64_t i = 0; i < test.size(); ++i) {
            if (preds[static_cast<size_t>(i)] == test.labels[static_cast<size_t>(i)]) ++correct;
            if (preds[static_cast<size_t>(i)] == ev.predictions[static_cast<size_t>(i)]) ++agree;
        }
        const double int_acc = static_cast<double>(correct) / static_cast<double>(test.size());
        const double agreement = static_cast<double>(agree) / static_cast<double>(test.size());
        report["int8_top1"] = int_acc;
        report["int8_condsum_bits"] = args.condsum_bits;
        report["argmax_agreement"] = agreement;
        report["residual_scale"] = im.s_res;
        std::cout << "int8 top-1: " << int_acc << "  (cond-sum " << args.condsum_bits
                  << "-bit)\nargmax agreement with float: " << agreement << "\n";
        if (!args.census_out.empty()) {
            json cj = census_json(census, test.size());
            cj["version"] = kToolVersion;
            cj["config"] = report["config"];
            write_file(args.census_out, cj.dump(2));
            std::cout << "operation census written to " << args.census_out << "\n";
        }
    }

    if (!args.json_out.empty()) write_file(args.json_out, report.dump(2));
}

// -------- stats --------

struct StatsArgs {
    std::string config_path, baseline_path, json_out;
    bool csv = false;
};

void cmd_stats(const StatsArgs& args) {
    RunConfig rc = load_run_config(args.config_path);
    CostReport rep = cost_report(rc.model);
    if (args.csv) {
        std::cout << cost_report_csv(rep);
    } else {
        std::cout << cost_report_text(rep);
    }
    MixerShare share = mixer_share(rc.model);
    GmacSummary gm = gmac_summary(rc.model);
    json report;
    report["version"] = kToolVersion;
    report["config"] = json::parse(run_config_to_json(rc));
    report["mixer_param_share"] = share.param_share;
    report["mixer_mac_share"] = share.mac_share;
    report["encoder_gmacs"] = gm.encoder_gmacs;
    report["model_gmacs"] = gm.model_gmacs;
    report["model_gmacs_with_adds"] = gm.model_gmacs_with_adds;
    if (!args.csv) {
        std::cout << "mixer share of full model: params " << share.param_share << ", MACs "
                  << share.mac_share << "\n";
        std::cout << "GMACs: encoder " << gm.encoder_gmacs << ", model " << gm.model_gmacs
                  << ", model+adds " << gm.model_gmacs_with_adds << "\n";
    }
    if (!args.baseline_path.empty()) {
        RunConfig base = load_run_config(args.baseline_path);
        CostReport brep = cost_report(base.model);
        ReductionSummary red = reduction_summary(rep, brep);
        report["baseline_config"] = json::parse(run_config_to_json(base));
        report["weight_reduction_bytes"] = red.weight_reduction_bytes;
        report["weight_reduction_params"] = red.weight_reduction_params;
        report["mac_reduction"] = red.mac_reduction;
        report["ours_encoder_mib"] = red.ours_encoder_mib;
        report["baseline_encoder_mib"] = red.baseline_encoder_mib;
        if (!args.csv) {
            std::cout << "vs baseline: weight reduction " << red.weight_reduction_bytes * 100.0
                      << "% (bytes), " << red.weight_reduction_params * 100.0
                      << "% (params); multiplication reduction " << red.mac_reduction * 100.0
                      << "%\n";
            std::cout << "encoder deployed size: ours " << red.ours_encoder_mib
                      << " MiB, baseline " << red.baseline_encoder_mib << " MiB\n";
        }
    }
    if (!args.json_out.empty()) write_file(args.json_out, report.dump(2));
}

// -------- perf --------

struct PerfArgs {
    std::string config_path, json_out, csv_out;
    int systolic_dim = 0;
    double clock_mhz = 0.0;
    bool sweep = false;
};

void cmd_perf(const PerfArgs& args) {
    RunConfig rc = load_run_config(args.config_path);
    HwConfig hw = rc.hw;
    if (args.systolic_dim != 0) hw.systolic_dim = args.systolic_dim;
    if (args.clock_mhz != 0.0) hw.clock_mhz = args.clock_mhz;
    hw.validate();

    if (args.sweep) {
        std::vector<SweepRow> rows = latency_sweep(rc.model, hw, {8, 16, 32, 64});
        std::string csv = "P,encoder_cycles,total_cycles,latency_ms,fps\n";
        for (const SweepRow& r : rows) {
            csv += std::to_string(r.systolic_dim) + "," + std::to_string(r.report.encoder_cycles) +
                   "," + std::to_string(r.report.total_cycles) + "," +
                   std::to_string(r.report.latency_ms) + "," + std::to_string(r.report.fps) + "\n";
        }
        if (!args.csv_out.empty()) {
            write_file(args.csv_out, csv);
            std::cout << "sweep written to " << args.csv_out << "\n";
        } else {
            std::cout << csv;
        }
        return;
    }

    LatencyReport rep = model_latency(rc.model, hw);
    std::cout << "stage cycles (one encoder block):\n";
    for (const StageCycles& s : rep.encoder_stages) {
        std::cout << "  " << s.name << ": " << s.cycles << "\n";
    }
    std::cout << "encoder block: " << rep.encoder_cycles << " cycles\n"
              << "embed: " << rep.embed_cycles << "  head: " << rep.head_cycles << "\n"
              << "total: " << rep.total_cycles << " cycles = " << rep.latency_ms << " ms @ "
              << hw.clock_mhz << " MHz\n"
              << "steady-state fps: " << rep.fps << "\n";
    if (!args.json_out.empty()) {
        json j;
        j["version"] = kToolVersion;
        j["config"] = json::parse(run_config_to_json(rc));
        j["systolic_dim"] = hw.systolic_dim;
        j["clock_mhz"] = hw.clock_mhz;
        json stages = json::array();
        for (const StageCycles& s : rep.encoder_stages) {
            stages.push_back({{"name", s.name}, {"cycles", s.cycles}});
        }
        j["encoder_stages"] = stages;
        j["encoder_cycles"] = rep.encoder_cycles;
        j["embed_cycles"] = rep.embed_cycles;
        j["head_cycles"] = rep.head_cycles;
        j["total_cycles"] = rep.total_cycles;
        j["latency_ms"] = rep.latency_ms;
        j["fps"] = rep.fps;
        write_file(args.json_out, j.dump(2));
    }
}

// -------- export --------

struct ExportArgs {
    std::string checkpoint_path, out_path;
    int condsum_bits = 4;
};

void cmd_export(const ExportArgs& args) {
    Checkpoint ck = load_checkpoint(args.checkpoint_path);
    RunConfig rc = checkpoint_config(ck);
    if (rc.model.mixer.kind != MixerKind::lut) {
        throw ConfigError("nothing to export: checkpoint has an mlp channel mixer");
    }
    DatasetPair data = load_data_for(rc);
    Model model(rc.model);
    restore_model(model, ck);
    calibrate_if_needed(model, data.train, rc.calib_samples);
    IntModel im = quantize_model(model, data.train, rc.calib_samples, args.condsum_bits);
    write_file(args.out_path, netlist_json(im, run_config_to_json(rc)));
    std::cout << "netlist written to " << args.out_path << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{std::string(kToolVersion) +
                 " — LUT-neuron vision transformer: training, integer inference, cost and "
                 "latency models"};
    app.require_subcommand(1);
    app.fallthrough();
    // applied as soon as the flag parses, before any subcommand body runs
    app.add_option_function<int>(
        "--threads", [](int n) { set_num_threads(n); },
        "worker threads for parallel kernels (0 = library default, 1 = strict "
        "deterministic serial order)");

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "train a model from a JSON config");
    train->add_option("--config", train_args.config_path, "run config JSON");
    train->add_option("--seed", train_args.seed, "override config seed");
    train->add_option("--resume", train_args.resume_path, "checkpoint to resume from");
    train->add_option("--epochs", train_args.epochs_override, "override epoch count");
    train->callback([&] { cmd_train(train_args); });

    EvalArgs eval_args;
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    eval->add_option("--checkpoint", eval_args.checkpoint_path, "checkpoint file")->required();
    eval->add_flag("--int8", eval_args.int8_path, "also run the integer inference path");
    eval->add_option("--condsum-bits", eval_args.condsum_bits,
                     "encoded-value width for the integer path (8, 4 or 2)");
    eval->add_option("--ptq-bits", eval_args.ptq_bits,
                     "evaluate the float path with encoded values quantized to this width");
    eval->add_option("--max-samples", eval_args.max_samples, "cap the number of test samples");
    eval->add_option("--json", eval_args.json_out, "write the full report as JSON");
    eval->add_option("--census-out", eval_args.census_out,
                     "write the integer-path operation census as JSON (requires --int8)");
    eval->callback([&] { cmd_eval(eval_args); });

    StatsArgs stats_args;
    CLI::App* stats = app.add_subcommand("stats", "analytical parameter/MAC/byte accounting");
    stats->add_option("--config", stats_args.config_path, "run config JSON")->required();
    stats->add_option("--baseline", stats_args.baseline_path,
                      "baseline config for reduction ratios");
    stats->add_flag("--csv", stats_args.csv, "emit CSV rows instead of the text table");
    stats->add_option("--json", stats_args.json_out, "write the summary as JSON");
    stats->callback([&] { cmd_stats(stats_args); });

    PerfArgs perf_args;
    CLI::App* perf = app.add_subcommand("perf", "analytical accelerator latency model");
    perf->add_option("--config", perf_args.config_path, "run config JSON")->required();
    perf->add_option("--systolic-dim", perf_args.systolic_dim, "override systolic array dimension P");
    perf->add_option("--clock-mhz", perf_args.clock_mhz, "override clock frequency");
    perf->add_flag("--sweep", perf_args.sweep, "emit a CSV sweep over P in {8,16,32,64}");
    perf->add_option("--csv-out", perf_args.csv_out, "write the sweep CSV here");
    perf->add_option("--json", perf_args.json_out, "write the latency report as JSON");
    perf->callback([&] { cmd_perf(perf_args); });

    ExportArgs export_args;
    CLI::App* exp = app.add_subcommand("export", "export the deployable LUT netlist as JSON");
    exp->add_option("--checkpoint", export_args.checkpoint_path, "checkpoint file")->required();
    exp->add_option("--out", export_args.out_path, "output netlist path")->required();
    exp->add_option("--condsum-bits", export_args.condsum_bits, "encoded-value width (8, 4 or 2)");
    exp->callback([&] { cmd_export(export_args); });

    std::string fetch_name, fetch_root;
    CLI::App* fetch = app.add_subcommand("fetch", "download a dataset with checksum manifest");
    fetch->add_option("--dataset", fetch_name, "mnist or cifar10")->required();
    fetch->add_option("--root", fetch_root, "data root (default: $LLVIT_DATA_ROOT or ./data)");
    fetch->callback([&] { fetch_dataset(fetch_name, resolve_data_root(fetch_root)); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const TrainingError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
