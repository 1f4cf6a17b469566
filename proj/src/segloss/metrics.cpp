#include "segloss/metrics.hpp"

#include <cstdio>

#include "common/error.hpp"

namespace ipseg::loss {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o)
{
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
}

ConfusionCounts confusion_counts(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> target, int cls)
{
    if (pred.size() != target.size())
        throw Error(ErrorCode::ShapeMismatch, "prediction has " + std::to_string(pred.size()) + " labels, target " + std::to_string(target.size()));
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const bool p = pred[i] == cls;
        const bool g = target[i] == cls;
        if (p && g)
            ++c.tp;
        else if (p)
            ++c.fp;
        else if (g)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den, std::uint64_t other_errors)
{
    if (den == 0)
        return other_errors == 0 ? 1.0 : 0.0;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

MetricValues metrics(const ConfusionCounts& c)
{
    MetricValues v;
    v.precision_std = ratio(c.tp, c.tp + c.fp, c.fn);
    v.recall_std = ratio(c.tp, c.tp + c.fn, c.fp);
    v.specificity = ratio(c.tn, c.tn + c.fp, c.fn);
    v.paper_precision = v.recall_std;
    v.paper_recall = v.specificity;
    v.dsc = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn, 0);
    return v;
}

std::string MetricReport::csv_header() { return "Recall,Precision,DSC"; }

std::string MetricReport::csv_line() const
{
    char buf[128];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f", macro.paper_recall, macro.paper_precision, macro.dsc);
    return buf;
}

MetricAccumulator::MetricAccumulator(std::vector<int> classes) : classes_(std::move(classes)), counts_(classes_.size())
{
    if (classes_.empty())
        throw Error(ErrorCode::EmptyClassSet, "no classes to evaluate");
}

void MetricAccumulator::add(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> target)
{
    for (std::size_t i = 0; i < classes_.size(); ++i)
        counts_[i] += confusion_counts(pred, target, classes_[i]);
}

MetricReport MetricAccumulator::report() const
{
    MetricReport r;
    MetricValues sum;
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        const MetricValues v = metrics(counts_[i]);
        r.per_class.push_back({classes_[i], counts_[i], v});
        sum.precision_std += v.precision_std;
        sum.recall_std += v.recall_std;
        sum.specificity += v.specificity;
        sum.paper_precision += v.paper_precision;
        sum.paper_recall += v.paper_recall;
        sum.dsc += v.dsc;
    }
    const double n = static_cast<double>(classes_.size());
    r.macro = {sum.precision_std / n, sum.recall_std / n, sum.specificity / n, sum.paper_precision / n, sum.paper_recall / n, sum.dsc / n};
    return r;
}

void to_json(nlohmann::json& j, const ConfusionCounts& c) { j = {{"tp", c.tp}, {"fp", c.fp}, {"tn", c.tn}, {"fn", c.fn}}; }

void from_json(const nlohmann::json& j, ConfusionCounts& c)
{
    j.at("tp").get_to(c.tp);
    j.at("fp").get_to(c.fp);
    j.at("tn").get_to(c.tn);
    j.at("fn").get_to(c.fn);
}

void to_json(nlohmann::json& j, const MetricValues& v)
{
    j = {{"precision_std", v.precision_std}, {"recall_std", v.recall_std}, {"specificity", v.specificity},
         {"paper_precision", v.paper_precision}, {"paper_recall", v.paper_recall}, {"dsc", v.dsc}};
}

void from_json(const nlohmann::json& j, MetricValues& v)
{
    j.at("precision_std").get_to(v.precision_std);
    j.at("recall_std").get_to(v.recall_std);
    j.at("specificity").get_to(v.specificity);
    j.at("paper_precision").get_to(v.paper_precision);
    j.at("paper_recall").get_to(v.paper_recall);
    j.at("dsc").get_to(v.dsc);
}

void to_json(nlohmann::json& j, const MetricReport& r)
{
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& c : r.per_class)
        classes.push_back({{"class", c.cls}, {"counts", c.counts}, {"metrics", c.values}});
    j = {{"per_class", classes}, {"macro", r.macro}};
}

void from_json(const nlohmann::json& j, MetricReport& r)
{
    r.per_class.clear();
    for (const auto& c : j.at("per_class"))
        r.per_class.push_back({c.at("class").get<int>(), c.at("counts").get<ConfusionCounts>(), c.at("metrics").get<MetricValues>()});
    j.at("macro").get_to(r.macro);
}

}  // namespace ipseg::loss
