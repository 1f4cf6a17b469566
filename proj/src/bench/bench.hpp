#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "segloss/metrics.hpp"
#include "trainer/train.hpp"

namespace ipseg::bench {

struct BenchRecord {
    std::string pipeline;
    int epochs = 0;
    int repeats = 1;
    double total_seconds = 0.0;  // mean over repeats
    double per_epoch_seconds = 0.0;
    std::uint64_t peak_tracked_bytes = 0;
    std::uint64_t largest_allocation_bytes = 0;
    std::optional<std::uint64_t> peak_rss_bytes;  // informational, OS high-water mark
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::optional<loss::MetricValues> metrics;
};

// Trains `repeats` times from scratch; tracked peak comes from the last run
// (identical across runs for a fixed seed).
BenchRecord run_pipeline_bench(train::Pipeline pipeline, const net::NetConfig& cfg, const train::Dataset& data, const train::HyperParams& hp,
                               int repeats = 3, bool with_metrics = true);

struct Reduction {
    std::string subject;
    std::string reference;
    double time_reduction = 0.0;    // 1 - time(subject) / time(reference)
    double memory_reduction = 0.0;  // same on peak_tracked_bytes
};

struct ComparisonReport {
    std::vector<BenchRecord> records;
    std::vector<Reduction> reductions;

    std::string csv() const;
};

double reduction(double subject, double reference);

// Reductions of every other pipeline against `reference` (vol3d by default);
// with ip present, ip is listed first as the subject of interest.
ComparisonReport compare(const std::vector<BenchRecord>& records, const std::string& reference = "vol3d");

std::optional<std::uint64_t> peak_rss_bytes();

void to_json(nlohmann::json& j, const BenchRecord& r);
void from_json(const nlohmann::json& j, BenchRecord& r);
void to_json(nlohmann::json& j, const Reduction& r);
void from_json(const nlohmann::json& j, Reduction& r);
void to_json(nlohmann::json& j, const ComparisonReport& r);
void from_json(const nlohmann::json& j, ComparisonReport& r);

}  // namespace ipseg::bench
