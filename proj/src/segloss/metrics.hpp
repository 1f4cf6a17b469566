#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace ipseg::loss {

struct ConfusionCounts {
    std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o);
    bool operator==(const ConfusionCounts&) const = default;
};

// One-vs-rest counts of `cls` over two equally sized label arrays.
ConfusionCounts confusion_counts(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> target, int cls);

struct MetricValues {
    double precision_std = 0.0;    // TP / (TP + FP)
    double recall_std = 0.0;       // TP / (TP + FN)
    double specificity = 0.0;      // TN / (TN + FP)
    double paper_precision = 0.0;  // TP / (TP + FN), the published "precision"
    double paper_recall = 0.0;     // TN / (TN + FP), the published "recall"
    double dsc = 0.0;              // 2TP / (2TP + FP + FN)
};

// A zero denominator gives 1 when the class has no error of the
// complementary kind either (nothing to find and nothing wrongly found), else 0.
MetricValues metrics(const ConfusionCounts& c);

struct ClassMetrics {
    int cls = 0;
    ConfusionCounts counts;
    MetricValues values;
};

struct MetricReport {
    std::vector<ClassMetrics> per_class;
    MetricValues macro;

    // Recall,Precision,DSC using the published definitions.
    static std::string csv_header();
    std::string csv_line() const;
};

// Accumulates counts per class over many (pred, target) pairs.
class MetricAccumulator {
public:
    explicit MetricAccumulator(std::vector<int> classes);
    void add(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> target);
    MetricReport report() const;

private:
    std::vector<int> classes_;
    std::vector<ConfusionCounts> counts_;
};

void to_json(nlohmann::json& j, const ConfusionCounts& c);
void from_json(const nlohmann::json& j, ConfusionCounts& c);
void to_json(nlohmann::json& j, const MetricValues& v);
void from_json(const nlohmann::json& j, MetricValues& v);
void to_json(nlohmann::json& j, const MetricReport& r);
void from_json(const nlohmann::json& j, MetricReport& r);

}  // namespace ipseg::loss
