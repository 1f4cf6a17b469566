#include "ipseg/ipseg.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "bench/bench.hpp"
#include "common/error.hpp"
#include "common/parallel.hpp"
#include "ipcore/projection.hpp"
#include "netbuild/network.hpp"
#include "trainer/checkpoint.hpp"
#include "trainer/phantom.hpp"
#include "trainer/train.hpp"
#include "volio/nifti.hpp"

using namespace ipseg;
using nlohmann::json;

struct ipseg_volume {
    volio::Volume3D vol;
};
struct ipseg_mask {
    volio::MaskVolume mask;
};
struct ipseg_ipimage {
    ipcore::IPImage img;
};
struct ipseg_dataset {
    train::Dataset ds;
};
struct ipseg_checkpoint {
    train::Checkpoint ck;
};

namespace {

thread_local std::string g_last_error;

template <class Fn>
ipseg_status guarded(Fn&& fn)
{
    try {
        fn();
        g_last_error.clear();
        return IPSEG_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return static_cast<ipseg_status>(e.code());
    } catch (const json::exception& e) {
        g_last_error = std::string("ConfigInvalid: ") + e.what();
        return IPSEG_ERR_CONFIG_INVALID;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return IPSEG_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return IPSEG_ERR_INTERNAL;
    }
}

void require(bool ok, const char* what)
{
    if (!ok)
        throw Error(ErrorCode::InvalidArgument, what);
}

char* dup_string(const std::string& s)
{
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out)
        throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

json parse_or_empty(const char* text)
{
    if (!text || !*text)
        return json::object();
    json j = json::parse(text);
    if (!j.is_object())
        throw Error(ErrorCode::ConfigInvalid, "expected a JSON object");
    return j;
}

}  // namespace

extern "C" {

const char* ipseg_last_error(void) { return g_last_error.c_str(); }

const char* ipseg_status_name(ipseg_status status)
{
    if (status == IPSEG_OK)
        return "Ok";
    if (status == IPSEG_ERR_INTERNAL)
        return "Internal";
    return error_code_name(static_cast<ErrorCode>(status));
}

const char* ipseg_version(void) { return "1.0.0"; }

void ipseg_string_free(char* s) { std::free(s); }

ipseg_status ipseg_set_threads(int threads)
{
    return guarded([&] {
        require(threads >= 0, "threads must be >= 0");
        set_thread_count(static_cast<std::size_t>(threads));
    });
}

int ipseg_get_threads(void) { return static_cast<int>(thread_count()); }

ipseg_status ipseg_volume_read(const char* path, ipseg_volume** out)
{
    return guarded([&] {
        require(path && out, "null argument");
        *out = new ipseg_volume{volio::read_nifti(path)};
    });
}

ipseg_status ipseg_volume_create(const int64_t dims[3], const float* data, ipseg_volume** out)
{
    return guarded([&] {
        require(dims && data && out, "null argument");
        const volio::Dims3 d{dims[0], dims[1], dims[2]};
        for (auto e : d)
            require(e > 0, "dims must be positive");
        volio::Volume3D vol(d, std::vector<float>(data, data + d[0] * d[1] * d[2]));
        vol.validate();
        *out = new ipseg_volume{std::move(vol)};
    });
}

ipseg_status ipseg_volume_write(const ipseg_volume* vol, const char* path)
{
    return guarded([&] {
        require(vol && path, "null argument");
        volio::write_nifti(vol->vol, path);
    });
}

void ipseg_volume_dims(const ipseg_volume* vol, int64_t dims[3])
{
    for (int i = 0; i < 3; ++i)
        dims[i] = vol ? vol->vol.dims()[static_cast<std::size_t>(i)] : 0;
}

const float* ipseg_volume_data(const ipseg_volume* vol) { return vol ? vol->vol.data().data() : nullptr; }

void ipseg_volume_free(ipseg_volume* vol) { delete vol; }

ipseg_status ipseg_nifti_info(const char* path, char** json_out)
{
    return guarded([&] {
        require(path && json_out, "null argument");
        const volio::NiftiHeader h = volio::read_nifti_header(path);
        const volio::Volume3D vol = volio::read_nifti(path);
        json j = {{"path", path},
                  {"byte_order", h.big_endian ? "big" : "little"},
                  {"dim", h.dim},
                  {"datatype", h.datatype},
                  {"bitpix", h.bitpix},
                  {"pixdim", h.pixdim},
                  {"vox_offset", h.vox_offset},
                  {"scl_slope", h.scl_slope},
                  {"scl_inter", h.scl_inter},
                  {"qform_code", h.qform_code},
                  {"sform_code", h.sform_code},
                  {"dims", vol.dims()},
                  {"spacing", vol.spacing()}};
        if (vol.affine())
            j["affine"] = *vol.affine();
        else
            j["affine"] = nullptr;
        const auto data = vol.data();
        if (!data.empty()) {
            const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
            double sum = 0.0;
            for (float v : data)
                sum += v;
            j["min"] = *lo;
            j["max"] = *hi;
            j["mean"] = sum / static_cast<double>(data.size());
        }
        *json_out = dup_string(j.dump(2));
    });
}

ipseg_status ipseg_mask_read(const char* path, int num_classes, ipseg_mask** out)
{
    return guarded([&] {
        require(path && out, "null argument");
        *out = new ipseg_mask{volio::read_mask_nifti(path, num_classes)};
    });
}

ipseg_status ipseg_mask_write(const ipseg_mask* mask, const char* path)
{
    return guarded([&] {
        require(mask && path, "null argument");
        volio::write_mask_nifti(mask->mask, path);
    });
}

void ipseg_mask_dims(const ipseg_mask* mask, int64_t dims[3])
{
    for (int i = 0; i < 3; ++i)
        dims[i] = mask ? mask->mask.dims()[static_cast<std::size_t>(i)] : 0;
}

const uint8_t* ipseg_mask_labels(const ipseg_mask* mask) { return mask ? mask->mask.labels().data() : nullptr; }

int ipseg_mask_num_classes(const ipseg_mask* mask) { return mask ? mask->mask.num_classes() : 0; }

void ipseg_mask_free(ipseg_mask* mask) { delete mask; }

ipseg_status ipseg_synth_phantom(const char* spec_json, ipseg_volume** vol_out, ipseg_mask** mask_out)
{
    return guarded([&] {
        require(vol_out && mask_out, "null argument");
        const train::PhantomSpec spec = parse_or_empty(spec_json).get<train::PhantomSpec>();
        auto [vol, mask] = train::synth_phantom(spec);
        auto* v = new ipseg_volume{std::move(vol)};
        try {
            *mask_out = new ipseg_mask{std::move(mask)};
        } catch (...) {
            delete v;
            throw;
        }
        *vol_out = v;
    });
}

ipseg_status ipseg_project(const ipseg_volume* vol, const char* axis, double threshold, const char* mode, ipseg_ipimage** out)
{
    return guarded([&] {
        require(vol && out, "null argument");
        const volio::AxisSpec spec = volio::AxisSpec::parse(axis ? axis : "sagittal");
        const int a = volio::resolve_axis(vol->vol, spec);
        ipcore::CvpConfig cfg;
        cfg.threshold = threshold;
        if (mode)
            cfg.mode = ipcore::parse_cvp_mode(mode);
        *out = new ipseg_ipimage{ipcore::compose_ip(vol->vol, a, cfg)};
    });
}

int ipseg_ipimage_channel_count(const ipseg_ipimage* img) { return img ? static_cast<int>(img->img.channels.size()) : 0; }

void ipseg_ipimage_dims(const ipseg_ipimage* img, int64_t dims[2])
{
    dims[0] = img ? img->img.dims()[0] : 0;
    dims[1] = img ? img->img.dims()[1] : 0;
}

const float* ipseg_ipimage_channel(const ipseg_ipimage* img, int channel, const char** name)
{
    if (!img || channel < 0 || channel >= static_cast<int>(img->img.channels.size()))
        return nullptr;
    if (name)
        *name = img->img.channel_names[static_cast<std::size_t>(channel)].c_str();
    return img->img.channels[static_cast<std::size_t>(channel)].data.data();
}

ipseg_status ipseg_ipimage_write_nifti(const ipseg_ipimage* img, const char* prefix, char** paths_json)
{
    return guarded([&] {
        require(img && prefix, "null argument");
        const auto paths = ipcore::write_ip_nifti(img->img, prefix);
        if (paths_json) {
            json arr = json::array();
            for (const auto& p : paths)
                arr.push_back(p.string());
            *paths_json = dup_string(arr.dump());
        }
    });
}

ipseg_status ipseg_ipimage_write_bin(const ipseg_ipimage* img, const char* path)
{
    return guarded([&] {
        require(img && path, "null argument");
        ipcore::write_ip_bin(img->img, path);
    });
}

void ipseg_ipimage_free(ipseg_ipimage* img) { delete img; }

ipseg_status ipseg_plan(const char* net_json, const char* kind, const int64_t* spatial, int n_spatial, int as_json, char** out)
{
    return guarded([&] {
        require(spatial && n_spatial > 0 && out, "null argument");
        const net::NetConfig cfg = parse_or_empty(net_json).get<net::NetConfig>();
        const std::string k = kind ? kind : "ipunet";
        std::optional<net::Network> network;
        if (k == "ipunet")
            network = net::build_ipunet(cfg);
        else if (k == "unet2d_slice")
            network = net::build_unet2d_slice(cfg);
        else if (k == "unet3d")
            network = net::build_unet3d(cfg);
        else
            throw Error(ErrorCode::ConfigInvalid, "unknown network kind '" + k + "'");
        const net::ShapePlan plan = net::shape_plan(*network, std::vector<std::int64_t>(spatial, spatial + n_spatial));
        *out = dup_string(as_json ? plan.to_json().dump(2) : plan.to_text());
    });
}

ipseg_status ipseg_dataset_create(const char* text, ipseg_dataset** out)
{
    return guarded([&] {
        require(out, "null argument");
        *out = new ipseg_dataset{train::make_dataset(parse_or_empty(text))};
    });
}

void ipseg_dataset_counts(const ipseg_dataset* ds, int* train, int* test)
{
    if (train)
        *train = ds ? static_cast<int>(ds->ds.train.size()) : 0;
    if (test)
        *test = ds ? static_cast<int>(ds->ds.test.size()) : 0;
}

void ipseg_dataset_free(ipseg_dataset* ds) { delete ds; }

ipseg_status ipseg_train(const char* pipeline, const char* run_json, const ipseg_dataset* ds, const ipseg_checkpoint* resume,
                         ipseg_epoch_callback callback, void* user, ipseg_checkpoint** out, char** history_csv)
{
    return guarded([&] {
        require(pipeline && ds && out, "null argument");
        const json run = parse_or_empty(run_json);
        const auto cfg = run.value("net", json::object()).get<net::NetConfig>();
        const auto hp = run.value("hyper", json::object()).get<train::HyperParams>();
        train::EpochCallback cb;
        if (callback)
            cb = [callback, user](const train::EpochRecord& r) { callback(r.epoch, r.loss, r.seconds, user); };
        train::TrainResult result = train::train(train::parse_pipeline(pipeline), cfg, ds->ds, hp, resume ? &resume->ck : nullptr, cb);
        char* csv = history_csv ? dup_string(train::history_csv(result.history)) : nullptr;
        *out = new ipseg_checkpoint{std::move(result.checkpoint)};
        if (history_csv)
            *history_csv = csv;
    });
}

ipseg_status ipseg_checkpoint_save(const ipseg_checkpoint* ck, const char* path)
{
    return guarded([&] {
        require(ck && path, "null argument");
        train::save_checkpoint(ck->ck, path);
    });
}

ipseg_status ipseg_checkpoint_load(const char* path, ipseg_checkpoint** out)
{
    return guarded([&] {
        require(path && out, "null argument");
        *out = new ipseg_checkpoint{train::load_checkpoint(path)};
    });
}

ipseg_status ipseg_checkpoint_info(const ipseg_checkpoint* ck, char** json_out)
{
    return guarded([&] {
        require(ck && json_out, "null argument");
        json tensors = json::array();
        for (const auto& b : ck->ck.tensors)
            tensors.push_back({{"name", b.name}, {"shape", b.shape}});
        json j = ck->ck.config_json();
        j["epoch"] = ck->ck.epoch;
        j["optimizer_steps"] = ck->ck.optimizer.steps;
        j["tensors"] = tensors;
        *json_out = dup_string(j.dump(2));
    });
}

void ipseg_checkpoint_free(ipseg_checkpoint* ck) { delete ck; }

ipseg_status ipseg_evaluate(const ipseg_checkpoint* ck, const ipseg_dataset* ds, char** report_json, char** csv_line)
{
    return guarded([&] {
        require(ck && ds && report_json, "null argument");
        const loss::MetricReport report = train::evaluate(ck->ck, ds->ds);
        json j = report;
        j["pipeline"] = train::pipeline_name(ck->ck.pipeline);
        char* csv = csv_line ? dup_string(report.csv_line()) : nullptr;
        *report_json = dup_string(j.dump(2));
        if (csv_line)
            *csv_line = csv;
    });
}

ipseg_status ipseg_bench(const char* pipelines, const char* run_json, const ipseg_dataset* ds, int repeats, char** report_json, char** csv)
{
    return guarded([&] {
        require(pipelines && ds, "null argument");
        const json run = parse_or_empty(run_json);
        const auto cfg = run.value("net", json::object()).get<net::NetConfig>();
        const auto hp = run.value("hyper", json::object()).get<train::HyperParams>();
        std::vector<std::string> names;
        std::stringstream list(pipelines);
        for (std::string name; std::getline(list, name, ',');)
            if (!name.empty())
                names.push_back(name);
        std::vector<train::Pipeline> parsed;
        for (const auto& n : names)
            parsed.push_back(train::parse_pipeline(n));
        std::vector<bench::BenchRecord> records;
        for (std::size_t i = 0; i < parsed.size(); ++i) {
            for (std::size_t k = 0; k < i; ++k)
                if (parsed[k] == parsed[i])
                    throw Error(ErrorCode::DuplicatePipeline, "pipeline '" + names[i] + "' listed twice");
        }
        for (auto p : parsed)
            records.push_back(bench::run_pipeline_bench(p, cfg, ds->ds, hp, repeats));
        bench::ComparisonReport report;
        if (records.size() >= 2) {
            const bool has_vol3d = std::any_of(records.begin(), records.end(), [](const auto& r) { return r.pipeline == "vol3d"; });
            report = bench::compare(records, has_vol3d ? "vol3d" : records.back().pipeline);
        } else {
            report.records = records;
        }
        char* c = csv ? dup_string(report.csv()) : nullptr;
        if (report_json) {
            try {
                *report_json = dup_string(json(report).dump(2));
            } catch (...) {
                std::free(c);
                throw;
            }
        }
        if (csv)
            *csv = c;
    });
}

}  // extern "C"
