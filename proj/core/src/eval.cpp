#include "vsal/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace vsal {

double accuracy(std::span<const int> preds, std::span<const int> truth) {
    if (preds.size() != truth.size() || preds.empty())
        throw std::invalid_argument("accuracy: need equal non-empty prediction/truth lists");
    std::size_t matches = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i] == truth[i]) ++matches;
    return static_cast<double>(matches) / static_cast<double>(preds.size());
}

double average_precision(const RankedPredictions& ranked) {
    const std::size_t n = ranked.sample_ids.size();
    if (ranked.confidence.size() != n || ranked.relevant.size() != n)
        throw std::invalid_argument("average_precision: ragged prediction lists");
    for (double c : ranked.confidence)
        if (!std::isfinite(c)) throw std::invalid_argument("average_precision: non-finite confidence");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (ranked.confidence[a] != ranked.confidence[b])
            return ranked.confidence[a] > ranked.confidence[b];
        return ranked.sample_ids[a] < ranked.sample_ids[b];
    });
    std::size_t positives = 0, seen_pos = 0;
    for (char r : ranked.relevant)
        if (r) ++positives;
    if (positives == 0)
        throw std::invalid_argument("average_precision: class has no positive sample");
    double sum = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (!ranked.relevant[order[k]]) continue;
        ++seen_pos;
        sum += static_cast<double>(seen_pos) / static_cast<double>(k + 1);
    }
    return sum / static_cast<double>(positives);
}

double mean_ap(std::span<const double> per_class_ap) {
    if (per_class_ap.empty()) throw std::invalid_argument("mean_ap: need at least one class");
    double sum = 0;
    for (double ap : per_class_ap) sum += ap;
    return sum / static_cast<double>(per_class_ap.size());
}

void write_ap_report(std::span<const double> per_class_ap, std::ostream& out) {
    out << "class,ap\n";
    std::ostringstream ss;
    ss.precision(17);
    for (std::size_t j = 0; j < per_class_ap.size(); ++j) {
        ss.str("");
        ss << per_class_ap[j];
        out << j << ',' << ss.str() << "\n";
    }
    ss.str("");
    ss << mean_ap(per_class_ap);
    out << "mAP," << ss.str() << "\n";
}

}  // namespace vsal
