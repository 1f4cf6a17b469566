// ipseg command-line front end. Talks to the library only through ipseg.h.
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ipseg/ipseg.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Failure {
    int code;
    std::string message;
};

int exit_for(ipseg_status s)
{
    switch (s) {
    case IPSEG_OK: return kOk;
    case IPSEG_ERR_INVALID_ARGUMENT:
    case IPSEG_ERR_CONFIG_INVALID:
    case IPSEG_ERR_BAD_HYPERPARAMETERS:
    case IPSEG_ERR_SPEC_INVALID:
    case IPSEG_ERR_DUPLICATE_PIPELINE: return kUsage;
    case IPSEG_ERR_NON_FINITE_LOSS: return kNumeric;
    default: return kData;
    }
}

void check(ipseg_status s)
{
    if (s != IPSEG_OK)
        throw Failure{exit_for(s), ipseg_last_error()};
}

// Owns a char* handed out by the library.
struct LibString {
    char* p = nullptr;
    ~LibString() { ipseg_string_free(p); }
    std::string str() const { return p ? p : ""; }
};

template <class T, void (*Free)(T*)>
struct Handle {
    T* p = nullptr;
    Handle() = default;
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    ~Handle() { Free(p); }
};
using Volume = Handle<ipseg_volume, ipseg_volume_free>;
using Mask = Handle<ipseg_mask, ipseg_mask_free>;
using IpImage = Handle<ipseg_ipimage, ipseg_ipimage_free>;
using DatasetH = Handle<ipseg_dataset, ipseg_dataset_free>;
using CheckpointH = Handle<ipseg_checkpoint, ipseg_checkpoint_free>;

json default_run_config()
{
    return json::parse(R"({
        "net": {"in_channels": 3, "num_classes": 3, "base_width": 64, "width_factor": 0.125, "depth": 4,
                "dimensionality": "2d", "activation_slope": 0.01, "batchnorm": true, "bn_epsilon": 1e-5, "bn_momentum": 0.1},
        "hyper": {"epochs": 1000, "learning_rate": 0.001, "optimizer": "adam", "adam_beta1": 0.9, "adam_beta2": 0.999,
                  "adam_epsilon": 1e-8, "batch_size": 2, "loss": "tversky", "alpha": 0.3, "beta": 0.7,
                  "cvp_threshold": 130.0, "cvp_mode": "eq1-literal", "axis": "sagittal", "intensity_scale": 100.0, "seed": 0},
        "data": {"source": "synthetic", "count": 50, "split_ratio": 0.8, "split_seed": 0,
                 "phantom": {"dims": [64, 64, 32], "num_lesions": 3, "radius_range": [2.0, 5.0],
                             "lesion_intensity_range": [200.0, 400.0], "tissue_range": [0.0, 100.0],
                             "noise_sigma": 5.0, "num_classes": 3, "seed": 1}},
        "pipeline": "ip",
        "bench": {"pipelines": ["ip", "slice2d", "vol3d"], "repeats": 3},
        "plan": {"kind": "ipunet", "input": [512, 512]}
    })");
}

std::string config_hash(const json& cfg)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : cfg.dump()) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<std::int64_t> parse_extents(const std::string& text)
{
    std::vector<std::int64_t> out;
    std::string cur;
    for (char c : text + "x") {
        if (c == 'x' || c == 'X' || c == ',') {
            if (cur.empty())
                throw Failure{kUsage, "bad extent list '" + text + "'"};
            out.push_back(std::stoll(cur));
            cur.clear();
        } else if (std::isdigit(static_cast<unsigned char>(c))) {
            cur += c;
        } else {
            throw Failure{kUsage, "bad extent list '" + text + "'"};
        }
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text))
        throw Failure{kData, "cannot write " + path.string()};
}

// Records the effective config and the files a run produced.
class RunOutputs {
public:
    RunOutputs(fs::path dir, const json& cfg) : dir_(std::move(dir)), cfg_(cfg), hash_(config_hash(cfg))
    {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec)
            throw Failure{kData, "cannot create " + dir_.string() + ": " + ec.message()};
        write_text(dir_ / "run_config.json", cfg_.dump(2) + "\n");
    }
    const fs::path& dir() const { return dir_; }
    const std::string& hash() const { return hash_; }
    void add(const fs::path& p) { files_.push_back(p.lexically_relative(dir_).string()); }
    void finish() const
    {
        write_text(dir_ / "manifest.json", json{{"run_config_hash", hash_}, {"outputs", files_}}.dump(2) + "\n");
    }

private:
    fs::path dir_;
    json cfg_;
    std::string hash_;
    std::vector<std::string> files_;
};

struct Options {
    std::string config_file;
    int threads = -1;
    std::string out;
    std::string input;
    std::string input_flag;
    // overrides
    std::optional<int> epochs, batch_size, in_channels, num_classes, depth, count, repeats, lesions;
    std::optional<double> width_factor, lr, alpha, beta, threshold, split_ratio;
    std::optional<std::uint64_t> seed, split_seed, phantom_seed;
    std::optional<std::string> optimizer, loss, mode, axis, pipeline, pipelines, data_dir, kind, plan_input, dims;
    std::string ckpt, resume;
    bool as_json = false;
    bool write_bin = false;
};

json effective_config(const Options& o)
{
    json cfg = default_run_config();
    if (!o.config_file.empty()) {
        std::ifstream in(o.config_file);
        if (!in)
            throw Failure{kUsage, "--config: cannot open " + o.config_file};
        json file;
        try {
            file = json::parse(in);
        } catch (const json::exception& e) {
            throw Failure{kUsage, "--config: " + std::string(e.what())};
        }
        cfg.merge_patch(file);
    }
    auto set = [&](const char* ptr, const auto& v) {
        if (v)
            cfg[json::json_pointer(ptr)] = *v;
    };
    set("/hyper/epochs", o.epochs);
    set("/hyper/batch_size", o.batch_size);
    set("/hyper/learning_rate", o.lr);
    set("/hyper/optimizer", o.optimizer);
    set("/hyper/loss", o.loss);
    set("/hyper/alpha", o.alpha);
    set("/hyper/beta", o.beta);
    set("/hyper/cvp_threshold", o.threshold);
    set("/hyper/cvp_mode", o.mode);
    set("/hyper/axis", o.axis);
    set("/hyper/seed", o.seed);
    set("/net/in_channels", o.in_channels);
    set("/net/num_classes", o.num_classes);
    set("/net/depth", o.depth);
    set("/net/width_factor", o.width_factor);
    set("/data/count", o.count);
    set("/data/split_ratio", o.split_ratio);
    set("/data/split_seed", o.split_seed);
    set("/data/phantom/seed", o.phantom_seed);
    set("/data/phantom/num_lesions", o.lesions);
    if (o.num_classes) {
        cfg["/data/phantom/num_classes"_json_pointer] = *o.num_classes;
        cfg["/data/num_classes"_json_pointer] = *o.num_classes;
    }
    if (o.dims)
        cfg["/data/phantom/dims"_json_pointer] = parse_extents(*o.dims);
    if (o.data_dir) {
        cfg["/data/source"_json_pointer] = "nifti";
        cfg["/data/dir"_json_pointer] = *o.data_dir;
    }
    set("/pipeline", o.pipeline);
    if (o.pipelines) {
        json list = json::array();
        std::stringstream ss(*o.pipelines);
        for (std::string p; std::getline(ss, p, ',');)
            if (!p.empty())
                list.push_back(p);
        cfg["/bench/pipelines"_json_pointer] = list;
    }
    set("/bench/repeats", o.repeats);
    set("/plan/kind", o.kind);
    if (o.plan_input)
        cfg["/plan/input"_json_pointer] = parse_extents(*o.plan_input);
    return cfg;
}

std::string run_json(const json& cfg) { return json{{"net", cfg.at("net")}, {"hyper", cfg.at("hyper")}}.dump(); }

void make_dataset(const json& cfg, DatasetH& ds)
{
    check(ipseg_dataset_create(cfg.at("data").dump().c_str(), &ds.p));
    int train = 0, test = 0;
    ipseg_dataset_counts(ds.p, &train, &test);
    std::printf("dataset: %d train / %d test\n", train, test);
}

const std::string& input_path(const Options& o, const char* sub)
{
    if (!o.input_flag.empty())
        return o.input_flag;
    if (o.input.empty())
        throw Failure{kUsage, std::string(sub) + ": missing input path (positional or --in)"};
    return o.input;
}

int cmd_info(const Options& o)
{
    LibString s;
    check(ipseg_nifti_info(input_path(o, "info").c_str(), &s.p));
    std::printf("%s\n", s.str().c_str());
    return kOk;
}

int cmd_synth(const Options& o, const json& cfg)
{
    RunOutputs run(o.out.empty() ? "synth_out" : o.out, cfg);
    json spec = cfg.at("data").at("phantom");
    const int count = cfg.at("data").value("count", 1);
    const auto base_seed = spec.value("seed", std::uint64_t{1});
    for (int i = 0; i < count; ++i) {
        spec["seed"] = base_seed + static_cast<std::uint64_t>(i);
        Volume vol;
        Mask mask;
        check(ipseg_synth_phantom(spec.dump().c_str(), &vol.p, &mask.p));
        char stem[32];
        std::snprintf(stem, sizeof stem, "phantom_%03d", i);
        const fs::path img = run.dir() / (std::string(stem) + ".nii");
        const fs::path msk = run.dir() / (std::string(stem) + "_mask.nii");
        check(ipseg_volume_write(vol.p, img.c_str()));
        check(ipseg_mask_write(mask.p, msk.c_str()));
        run.add(img);
        run.add(msk);
    }
    run.finish();
    std::printf("wrote %d phantom pairs to %s (config %s)\n", count, run.dir().c_str(), run.hash().c_str());
    return kOk;
}

int cmd_project(const Options& o, const json& cfg)
{
    const fs::path in = input_path(o, "project");
    RunOutputs run(o.out.empty() ? "project_out" : o.out, cfg);
    Volume vol;
    check(ipseg_volume_read(in.c_str(), &vol.p));
    const json& hp = cfg.at("hyper");
    IpImage img;
    check(ipseg_project(vol.p, hp.at("axis").get<std::string>().c_str(), hp.at("cvp_threshold").get<double>(),
                        hp.at("cvp_mode").get<std::string>().c_str(), &img.p));
    std::string stem = in.filename().string();
    for (const char* ext : {".nii.gz", ".nii"})
        if (stem.ends_with(ext))
            stem.resize(stem.size() - std::strlen(ext));
    LibString paths;
    check(ipseg_ipimage_write_nifti(img.p, (run.dir() / stem).c_str(), &paths.p));
    for (const auto& p : json::parse(paths.str())) {
        run.add(p.get<std::string>());
        std::printf("%s\n", p.get<std::string>().c_str());
    }
    if (o.write_bin) {
        const fs::path bin = run.dir() / (stem + "_ip.bin");
        check(ipseg_ipimage_write_bin(img.p, bin.c_str()));
        run.add(bin);
        run.add(bin.string() + ".json");
    }
    run.finish();
    return kOk;
}

void print_epoch(int epoch, double loss, double seconds, void*)
{
    std::printf("epoch %d loss %.6f (%.2fs)\n", epoch, loss, seconds);
    std::fflush(stdout);
}

int cmd_train(const Options& o, const json& cfg)
{
    RunOutputs run(o.out.empty() ? "train_out" : o.out, cfg);
    DatasetH ds;
    make_dataset(cfg, ds);
    CheckpointH resume;
    if (!o.resume.empty())
        check(ipseg_checkpoint_load(o.resume.c_str(), &resume.p));
    CheckpointH ck;
    LibString history;
    check(ipseg_train(cfg.at("pipeline").get<std::string>().c_str(), run_json(cfg).c_str(), ds.p, resume.p, print_epoch, nullptr, &ck.p,
                      &history.p));
    const fs::path ck_path = run.dir() / "checkpoint.ipun";
    check(ipseg_checkpoint_save(ck.p, ck_path.c_str()));
    write_text(run.dir() / "history.csv", history.str());
    run.add(ck_path);
    run.add(run.dir() / "history.csv");
    run.finish();
    std::printf("checkpoint %s (config %s)\n", ck_path.c_str(), run.hash().c_str());
    return kOk;
}

int cmd_eval(const Options& o, const json& cfg)
{
    if (o.ckpt.empty())
        throw Failure{kUsage, "eval: --ckpt is required"};
    RunOutputs run(o.out.empty() ? "eval_out" : o.out, cfg);
    CheckpointH ck;
    check(ipseg_checkpoint_load(o.ckpt.c_str(), &ck.p));
    DatasetH ds;
    make_dataset(cfg, ds);
    LibString report, csv;
    check(ipseg_evaluate(ck.p, ds.p, &report.p, &csv.p));
    json j = json::parse(report.str());
    j["run_config_hash"] = run.hash();
    write_text(run.dir() / "metrics.json", j.dump(2) + "\n");
    write_text(run.dir() / "metrics.csv", "Recall,Precision,DSC\n" + csv.str() + "\n");
    run.add(run.dir() / "metrics.json");
    run.add(run.dir() / "metrics.csv");
    run.finish();
    std::printf("Recall,Precision,DSC\n%s\n", csv.str().c_str());
    return kOk;
}

int cmd_bench(const Options& o, const json& cfg)
{
    RunOutputs run(o.out.empty() ? "bench_out" : o.out, cfg);
    DatasetH ds;
    make_dataset(cfg, ds);
    std::string list;
    for (const auto& p : cfg.at("bench").at("pipelines"))
        list += (list.empty() ? "" : ",") + p.get<std::string>();
    LibString report, csv;
    check(ipseg_bench(list.c_str(), run_json(cfg).c_str(), ds.p, cfg.at("bench").value("repeats", 3), &report.p, &csv.p));
    json j = json::parse(report.str());
    j["run_config_hash"] = run.hash();
    write_text(run.dir() / "bench.json", j.dump(2) + "\n");
    write_text(run.dir() / "bench.csv", csv.str());
    run.add(run.dir() / "bench.json");
    run.add(run.dir() / "bench.csv");
    run.finish();
    std::printf("%s", csv.str().c_str());
    return kOk;
}

int cmd_plan(const Options& o, const json& cfg)
{
    const auto spatial = cfg.at("plan").at("input").get<std::vector<std::int64_t>>();
    LibString out;
    check(ipseg_plan(cfg.at("net").dump().c_str(), cfg.at("plan").at("kind").get<std::string>().c_str(), spatial.data(),
                     static_cast<int>(spatial.size()), o.as_json ? 1 : 0, &out.p));
    std::printf("%s%s", out.str().c_str(), o.as_json ? "\n" : "");
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"IP-UNet toolkit: projections, networks, training and benchmarks", "ipseg"};
    app.require_subcommand(1);
    Options o;
    app.add_option("--config", o.config_file, "JSON run configuration; flags override its values");
    app.add_option("--threads", o.threads, "worker threads (0 = auto; default from IPSEG_THREADS)");

    auto add_train_flags = [&](CLI::App* sub) {
        sub->add_option("--epochs", o.epochs);
        sub->add_option("--batch-size", o.batch_size);
        sub->add_option("--lr", o.lr);
        sub->add_option("--optimizer", o.optimizer, "adam or sgd");
        sub->add_option("--loss", o.loss, "tversky or dice");
        sub->add_option("--alpha", o.alpha);
        sub->add_option("--beta", o.beta);
        sub->add_option("--seed", o.seed);
        sub->add_option("--width-factor", o.width_factor);
        sub->add_option("--in-channels", o.in_channels);
        sub->add_option("--num-classes", o.num_classes);
        sub->add_option("--depth", o.depth);
        sub->add_option("--axis", o.axis);
        sub->add_option("--threshold", o.threshold);
        sub->add_option("--mode", o.mode);
        sub->add_option("--count", o.count, "number of synthetic phantoms");
        sub->add_option("--split-ratio", o.split_ratio);
        sub->add_option("--split-seed", o.split_seed);
        sub->add_option("--phantom-seed", o.phantom_seed);
        sub->add_option("--dims", o.dims, "phantom dims, e.g. 64x64x32");
        sub->add_option("--data-dir", o.data_dir, "directory of X.nii / X_mask.nii pairs instead of phantoms");
        sub->add_option("--out", o.out, "output directory");
    };

    auto* info = app.add_subcommand("info", "print a NIfTI header summary");
    info->add_option("file", o.input);
    info->add_option("--in", o.input_flag);

    auto* synth = app.add_subcommand("synth", "write synthetic phantom image/mask pairs");
    synth->add_option("--out", o.out);
    synth->add_option("--count", o.count);
    synth->add_option("--phantom-seed,--seed", o.phantom_seed);
    synth->add_option("--dims", o.dims);
    synth->add_option("--lesions", o.lesions);
    synth->add_option("--num-classes", o.num_classes);

    auto* project = app.add_subcommand("project", "write CVP / AvgIP / MIP channels of a volume");
    project->add_option("file", o.input);
    project->add_option("--in", o.input_flag);
    project->add_option("--out", o.out);
    project->add_option("--axis", o.axis);
    project->add_option("--threshold", o.threshold);
    project->add_option("--mode", o.mode, "eq1-literal or prose-lmip");
    project->add_flag("--bin", o.write_bin, "also write the raw float32 channel stack");

    auto* train = app.add_subcommand("train", "train one pipeline and write a checkpoint");
    add_train_flags(train);
    train->add_option("--pipeline", o.pipeline, "ip, slice2d or vol3d");
    train->add_option("--resume", o.resume, "continue from a checkpoint");

    auto* eval = app.add_subcommand("eval", "score a checkpoint on the test split");
    add_train_flags(eval);
    eval->add_option("--ckpt", o.ckpt);

    auto* bench = app.add_subcommand("bench", "time and memory comparison of pipelines");
    add_train_flags(bench);
    bench->add_option("--pipelines", o.pipelines, "comma-separated, e.g. ip,vol3d");
    bench->add_option("--repeats", o.repeats);

    auto* plan = app.add_subcommand("plan", "print the layer shape plan");
    plan->add_option("--width-factor", o.width_factor);
    plan->add_option("--in-channels", o.in_channels);
    plan->add_option("--num-classes", o.num_classes);
    plan->add_option("--depth", o.depth);
    plan->add_option("--kind", o.kind, "ipunet, unet2d_slice or unet3d");
    plan->add_option("--input", o.plan_input, "spatial extents, e.g. 512x512");
    plan->add_flag("--json", o.as_json);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "ipseg: error: %s\n", e.what());
        return kUsage;
    }

    try {
        if (o.threads >= 0)
            check(ipseg_set_threads(o.threads));
        const json cfg = effective_config(o);
        if (*info)
            return cmd_info(o);
        if (*synth)
            return cmd_synth(o, cfg);
        if (*project)
            return cmd_project(o, cfg);
        if (*train)
            return cmd_train(o, cfg);
        if (*eval)
            return cmd_eval(o, cfg);
        if (*bench)
            return cmd_bench(o, cfg);
        if (*plan)
            return cmd_plan(o, cfg);
    } catch (const Failure& f) {
        std::fprintf(stderr, "ipseg: error: %s\n", f.message.c_str());
        return f.code;
    } catch (const json::exception& e) {
        std::fprintf(stderr, "ipseg: error: configuration: %s\n", e.what());
        return kUsage;
    }
    return kUsage;
}
