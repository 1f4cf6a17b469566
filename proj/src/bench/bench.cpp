#include "bench/bench.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "common/error.hpp"
#include "common/memtrack.hpp"

namespace ipseg::bench {

std::optional<std::uint64_t> peak_rss_bytes()
{
    std::ifstream in("/proc/self/status");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("VmHWM:", 0) == 0) {
            std::istringstream fields(line.substr(6));
            std::uint64_t kb = 0;
            if (fields >> kb)
                return kb * 1024;
        }
    }
    return std::nullopt;
}

BenchRecord run_pipeline_bench(train::Pipeline pipeline, const net::NetConfig& cfg, const train::Dataset& data, const train::HyperParams& hp,
                               int repeats, bool with_metrics)
{
    if (repeats < 1)
        throw Error(ErrorCode::InvalidArgument, "repeats must be >= 1");
    BenchRecord rec;
    rec.pipeline = train::pipeline_name(pipeline);
    rec.epochs = hp.epochs;
    rec.repeats = repeats;
    rec.seed = hp.seed;
    double total = 0.0;
    std::optional<train::Checkpoint> last;
    for (int r = 0; r < repeats; ++r) {
        last.reset();
        mem::reset_peak();
        const auto t0 = std::chrono::steady_clock::now();
        train::TrainResult result = train::train(pipeline, cfg, data, hp);
        total += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rec.peak_tracked_bytes = mem::peak_bytes();
        rec.largest_allocation_bytes = mem::largest_allocation();
        last = std::move(result.checkpoint);
    }
    rec.total_seconds = total / repeats;
    rec.per_epoch_seconds = hp.epochs > 0 ? rec.total_seconds / hp.epochs : 0.0;
    rec.peak_rss_bytes = peak_rss_bytes();
    rec.config = last->config_json();
    if (with_metrics && !data.test.empty())
        rec.metrics = train::evaluate(*last, data).macro;
    return rec;
}

double reduction(double subject, double reference)
{
    if (reference == 0.0)
        return subject == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return 1.0 - subject / reference;
}

ComparisonReport compare(const std::vector<BenchRecord>& records, const std::string& reference)
{
    std::set<std::string> seen;
    for (const auto& r : records)
        if (!seen.insert(r.pipeline).second)
            throw Error(ErrorCode::DuplicatePipeline, "pipeline '" + r.pipeline + "' appears twice");
    if (records.size() < 2)
        throw Error(ErrorCode::InvalidArgument, "compare needs at least two records");
    const BenchRecord* ref = nullptr;
    for (const auto& r : records)
        if (r.pipeline == reference)
            ref = &r;
    if (!ref)
        throw Error(ErrorCode::InvalidArgument, "reference pipeline '" + reference + "' has no record");

    ComparisonReport out;
    out.records = records;
    std::vector<const BenchRecord*> subjects;
    for (const auto& r : records)
        if (&r != ref)
            subjects.push_back(&r);
    std::stable_partition(subjects.begin(), subjects.end(), [](const BenchRecord* r) { return r->pipeline == "ip"; });
    for (const BenchRecord* s : subjects)
        out.reductions.push_back({s->pipeline, ref->pipeline, reduction(s->total_seconds, ref->total_seconds),
                                  reduction(static_cast<double>(s->peak_tracked_bytes), static_cast<double>(ref->peak_tracked_bytes))});
    return out;
}

std::string ComparisonReport::csv() const
{
    std::string out = "pipeline,epochs,total_s,per_epoch_s,peak_tracked_bytes,peak_rss_bytes,recall,precision,dsc\n";
    char buf[512];
    for (const auto& r : records) {
        const std::string rss = r.peak_rss_bytes ? std::to_string(*r.peak_rss_bytes) : "";
        std::string m = ",,";
        if (r.metrics) {
            std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f", r.metrics->paper_recall, r.metrics->paper_precision, r.metrics->dsc);
            m = buf;
        }
        std::snprintf(buf, sizeof buf, "%s,%d,%.6f,%.6f,%llu,%s,%s\n", r.pipeline.c_str(), r.epochs, r.total_seconds, r.per_epoch_seconds,
                      static_cast<unsigned long long>(r.peak_tracked_bytes), rss.c_str(), m.c_str());
        out += buf;
    }
    return out;
}

void to_json(nlohmann::json& j, const BenchRecord& r)
{
    j = {{"pipeline", r.pipeline},
         {"epochs", r.epochs},
         {"repeats", r.repeats},
         {"total_s", r.total_seconds},
         {"per_epoch_s", r.per_epoch_seconds},
         {"peak_tracked_bytes", r.peak_tracked_bytes},
         {"largest_allocation_bytes", r.largest_allocation_bytes},
         {"peak_rss_bytes", r.peak_rss_bytes ? nlohmann::json(*r.peak_rss_bytes) : nlohmann::json(nullptr)},
         {"config", r.config},
         {"seed", r.seed},
         {"metrics", r.metrics ? nlohmann::json(*r.metrics) : nlohmann::json(nullptr)}};
}

void from_json(const nlohmann::json& j, BenchRecord& r)
{
    j.at("pipeline").get_to(r.pipeline);
    j.at("epochs").get_to(r.epochs);
    j.at("repeats").get_to(r.repeats);
    j.at("total_s").get_to(r.total_seconds);
    j.at("per_epoch_s").get_to(r.per_epoch_seconds);
    j.at("peak_tracked_bytes").get_to(r.peak_tracked_bytes);
    j.at("largest_allocation_bytes").get_to(r.largest_allocation_bytes);
    r.peak_rss_bytes.reset();
    if (!j.at("peak_rss_bytes").is_null())
        r.peak_rss_bytes = j.at("peak_rss_bytes").get<std::uint64_t>();
    r.config = j.at("config");
    j.at("seed").get_to(r.seed);
    r.metrics.reset();
    if (!j.at("metrics").is_null())
        r.metrics = j.at("metrics").get<loss::MetricValues>();
}

void to_json(nlohmann::json& j, const Reduction& r)
{
    j = {{"subject", r.subject}, {"reference", r.reference}, {"time_reduction", r.time_reduction}, {"memory_reduction", r.memory_reduction}};
}

void from_json(const nlohmann::json& j, Reduction& r)
{
    j.at("subject").get_to(r.subject);
    j.at("reference").get_to(r.reference);
    j.at("time_reduction").get_to(r.time_reduction);
    j.at("memory_reduction").get_to(r.memory_reduction);
}

void to_json(nlohmann::json& j, const ComparisonReport& r) { j = {{"records", r.records}, {"reductions", r.reductions}}; }

void from_json(const nlohmann::json& j, ComparisonReport& r)
{
    j.at("records").get_to(r.records);
    j.at("reductions").get_to(r.reductions);
}

}  // namespace ipseg::bench
