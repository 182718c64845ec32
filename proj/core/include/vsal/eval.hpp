#pragma once

#include <iosfwd>
#include <span>
#include <vector>

namespace vsal {

// Per-class ranked predictions with ground-truth relevance flags.
struct RankedPredictions {
    std::vector<int> sample_ids;
    std::vector<double> confidence;
    std::vector<char> relevant;
};

// matches / total
double accuracy(std::span<const int> preds, std::span<const int> truth);

// Classic retrieval AP: sort by confidence descending (ties break to lower
// sample id), average precision at each positive rank.
double average_precision(const RankedPredictions& ranked);

double mean_ap(std::span<const double> per_class_ap);

// CSV report: one "class,ap" row per class plus a trailing "mAP,<value>" row.
void write_ap_report(std::span<const double> per_class_ap, std::ostream& out);

}  // namespace vsal
