#include "vsal/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

namespace vsal {

std::vector<double> class_coefficients(std::span<const ScoreStack> train, int cls, double lambda) {
    if (train.empty()) throw std::invalid_argument("class_coefficients: empty training set");
    const int m = train[0].streams();
    std::vector<double> coeff(m, 0.0);
    bool any_positive = false;
    for (const ScoreStack& s : train) {
        if (s.streams() != m) throw std::invalid_argument("inconsistent stream count");
        const double sign = s.label == cls ? 1.0 : -lambda;
        if (s.label == cls) any_positive = true;
        for (int k = 0; k < m; ++k) coeff[k] += sign * s.rows[k][cls];
    }
    if (!any_positive)
        throw std::invalid_argument("class_coefficients: class has no positive sample");
    return coeff;
}

ClassWeights learn_weights(std::span<const ScoreStack> train, const FusionConfig& cfg) {
    if (train.empty()) throw std::invalid_argument("learn_weights: empty training set");
    const int m = train[0].streams();
    const int c = train[0].classes();
    if (cfg.epsilon < 0 || cfg.epsilon > 1.0 / m)
        throw std::invalid_argument("learn_weights: epsilon outside [0, 1/m]");
    ClassWeights out;
    out.w.resize(c);
    for (int j = 0; j < c; ++j) {
        std::vector<double> coeff = class_coefficients(train, j, cfg.lambda);
        double best = *std::max_element(coeff.begin(), coeff.end());
        std::vector<int> argmaxes;
        for (int k = 0; k < m; ++k)
            if (coeff[k] == best) argmaxes.push_back(k);
        // Linear objective over the epsilon-floored simplex: put the free mass
        // on the best coefficient, split equally over exact ties.
        std::vector<double> w(m, cfg.epsilon);
        double excess = 1.0 - m * cfg.epsilon;
        for (int k : argmaxes) w[k] += excess / static_cast<double>(argmaxes.size());
        out.w[j] = std::move(w);
    }
    return out;
}

std::pair<int, std::vector<double>> predict(const ScoreStack& sample,
                                            const ClassWeights& weights) {
    const int c = sample.classes();
    if (static_cast<int>(weights.w.size()) != c)
        throw std::invalid_argument("predict: weight/class count mismatch");
    std::vector<double> fused(c, 0.0);
    for (int i = 0; i < c; ++i)
        for (int k = 0; k < sample.streams(); ++k) fused[i] += weights.w[i][k] * sample.rows[k][i];
    int arg = 0;
    for (int i = 1; i < c; ++i)
        if (fused[i] > fused[arg]) arg = i;
    return {arg, fused};
}

std::vector<double> fuse_late(const ScoreStack& sample) {
    const int c = sample.classes();
    const int m = sample.streams();
    if (m < 1) throw std::invalid_argument("fuse_late: no streams");
    std::vector<double> mean(c, 0.0);
    for (int k = 0; k < m; ++k)
        for (int i = 0; i < c; ++i) mean[i] += sample.rows[k][i];
    for (double& v : mean) v /= m;
    return mean;
}

std::vector<double> LinearClassifier::decision(std::span<const double> features) const {
    std::vector<double> d(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) {
        double acc = b[j];
        for (std::size_t k = 0; k < features.size(); ++k) acc += w[j][k] * features[k];
        d[j] = acc;
    }
    return d;
}

int LinearClassifier::predict(std::span<const double> features) const {
    std::vector<double> d = decision(features);
    int arg = 0;
    for (std::size_t j = 1; j < d.size(); ++j)
        if (d[j] > d[arg]) arg = static_cast<int>(j);
    return arg;
}

LinearClassifier fuse_early(const std::vector<std::vector<double>>& features,
                            const std::vector<int>& labels, int classes, int epochs, double lr,
                            double l2, std::uint64_t seed) {
    if (features.empty() || features[0].empty())
        throw std::invalid_argument("fuse_early: empty features");
    if (features.size() != labels.size())
        throw std::invalid_argument("fuse_early: feature/label count mismatch");
    const std::size_t dim = features[0].size();
    for (const auto& f : features)
        if (f.size() != dim) throw std::invalid_argument("fuse_early: ragged features");

    LinearClassifier clf;
    clf.w.assign(classes, std::vector<double>(dim, 0.0));
    clf.b.assign(classes, 0.0);

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> order(features.size());
    std::iota(order.begin(), order.end(), 0);
    for (int e = 0; e < epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t idx : order) {
            const std::vector<double>& x = features[idx];
            for (int j = 0; j < classes; ++j) {
                double y = labels[idx] == j ? 1.0 : -1.0;
                double margin = clf.b[j];
                for (std::size_t k = 0; k < dim; ++k) margin += clf.w[j][k] * x[k];
                margin *= y;
                for (std::size_t k = 0; k < dim; ++k) {
                    double g = l2 * clf.w[j][k];
                    if (margin < 1.0) g -= y * x[k];
                    clf.w[j][k] -= lr * g;
                }
                if (margin < 1.0) clf.b[j] += lr * y;
            }
        }
    }
    return clf;
}

std::vector<double> fuse_cv_weighted(std::span<const ScoreStack> validation, int streams) {
    if (validation.empty()) throw std::invalid_argument("fuse_cv_weighted: empty validation set");
    constexpr int steps = 20;  // 0.05 grid
    std::vector<double> best_w;
    int best_correct = -1;
    // Enumerate grid points of the simplex in lexicographic order; strict
    // improvement keeps the lexicographically lowest among ties.
    std::vector<int> g(streams, 0);
    auto evaluate = [&](const std::vector<double>& w) {
        int correct = 0;
        for (const ScoreStack& s : validation) {
            const int c = s.classes();
            int arg = 0;
            double best = -std::numeric_limits<double>::infinity();
            for (int i = 0; i < c; ++i) {
                double f = 0;
                for (int k = 0; k < streams; ++k) f += w[k] * s.rows[k][i];
                if (f > best) {
                    best = f;
                    arg = i;
                }
            }
            if (arg == s.label) ++correct;
        }
        return correct;
    };
    // recursively assign grid units to streams
    std::vector<double> w(streams);
    auto rec = [&](auto&& self, int k, int remaining) -> void {
        if (k == streams - 1) {
            g[k] = remaining;
            for (int i = 0; i < streams; ++i) w[i] = static_cast<double>(g[i]) / steps;
            int correct = evaluate(w);
            if (correct > best_correct) {
                best_correct = correct;
                best_w = w;
            }
            return;
        }
        for (int units = 0; units <= remaining; ++units) {
            g[k] = units;
            self(self, k + 1, remaining - units);
        }
    };
    rec(rec, 0, steps);
    return best_w;
}

namespace {

std::string fmt17(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace

void write_score_table(std::span<const ScoreStack> samples, std::ostream& out) {
    const int c = samples.empty() ? 0 : samples[0].classes();
    out << "sample_id,stream,label";
    for (int i = 0; i < c; ++i) out << ",score_" << i;
    out << "\n";
    for (std::size_t id = 0; id < samples.size(); ++id) {
        const ScoreStack& s = samples[id];
        for (int k = 0; k < s.streams(); ++k) {
            out << id << ',' << k << ',' << s.label;
            for (int i = 0; i < c; ++i) out << ',' << fmt17(s.rows[k][i]);
            out << "\n";
        }
    }
}

std::vector<ScoreStack> read_score_table(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("score table: missing header");
    std::vector<ScoreStack> samples;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f = split_csv(line);
        if (f.size() < 4) throw std::runtime_error("score table: short row");
        std::size_t id = std::stoul(f[0]);
        int label = std::stoi(f[2]);
        if (id >= samples.size()) samples.resize(id + 1);
        samples[id].label = label;
        std::vector<double> row;
        for (std::size_t i = 3; i < f.size(); ++i) row.push_back(std::stod(f[i]));
        std::size_t stream = std::stoul(f[1]);
        if (stream >= samples[id].rows.size()) samples[id].rows.resize(stream + 1);
        samples[id].rows[stream] = std::move(row);
    }
    return samples;
}

void write_weights(const ClassWeights& weights, std::ostream& out) {
    const int m = weights.w.empty() ? 0 : static_cast<int>(weights.w[0].size());
    out << "class";
    for (int k = 0; k < m; ++k) out << ",w_" << k;
    out << "\n";
    for (std::size_t j = 0; j < weights.w.size(); ++j) {
        out << j;
        for (double v : weights.w[j]) out << ',' << fmt17(v);
        out << "\n";
    }
}

ClassWeights read_weights(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("weights: missing header");
    ClassWeights out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f = split_csv(line);
        if (f.size() < 2) throw std::runtime_error("weights: short row");
        std::size_t cls = std::stoul(f[0]);
        if (cls >= out.w.size()) out.w.resize(cls + 1);
        std::vector<double> row;
        for (std::size_t i = 1; i < f.size(); ++i) row.push_back(std::stod(f[i]));
        out.w[cls] = std::move(row);
    }
    return out;
}

}  // namespace vsal
