#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "vsal/tensor.hpp"

namespace vsal {

// Stacked per-stream softmax scores of one sample: m rows of c class scores.
struct ScoreStack {
    std::vector<std::vector<double>> rows;
    int label = -1;  // true class for training samples, -1 otherwise

    int streams() const { return static_cast<int>(rows.size()); }
    int classes() const { return rows.empty() ? 0 : static_cast<int>(rows[0].size()); }
};

// One weight vector (length m, sums to 1) per class.
struct ClassWeights {
    std::vector<std::vector<double>> w;
};

struct FusionConfig {
    double lambda = 5e-3;  // positive/negative balance
    double epsilon = 0.0;  // per-stream weight floor
};

// m-vector: sum of positives' column-j stream scores minus lambda times the
// same sum over negatives. Throws if the class has no positive sample.
std::vector<double> class_coefficients(std::span<const ScoreStack> train, int cls, double lambda);

// Per class, the maximizer of coeff . W over {W : sum W = 1, W >= epsilon}:
// 1-(m-1)*epsilon on the argmax coefficient, epsilon elsewhere; exact ties
// split the excess equally.
ClassWeights learn_weights(std::span<const ScoreStack> train, const FusionConfig& cfg);

// Fused score of class i is sum_m w[i][m] * rows[m][i]; argmax, ties to the
// lowest class index.
std::pair<int, std::vector<double>> predict(const ScoreStack& sample, const ClassWeights& weights);

// Arithmetic mean across streams.
std::vector<double> fuse_late(const ScoreStack& sample);

// One-vs-rest linear classifier on concatenated per-stream features, trained
// with hinge loss + L2 by subgradient descent.
struct LinearClassifier {
    std::vector<std::vector<double>> w;  // per class
    std::vector<double> b;

    std::vector<double> decision(std::span<const double> features) const;
    int predict(std::span<const double> features) const;
};

LinearClassifier fuse_early(const std::vector<std::vector<double>>& features,
                            const std::vector<int>& labels, int classes, int epochs, double lr,
                            double l2, std::uint64_t seed);

// Single global stream-weight vector from a 0.05-step simplex grid search
// maximizing validation accuracy; ties break to the lexicographically lowest
// weight vector.
std::vector<double> fuse_cv_weighted(std::span<const ScoreStack> validation, int streams);

// CSV round trip at 17 significant digits.
// Score table: header sample_id,stream,label,score_0..score_{c-1}.
void write_score_table(std::span<const ScoreStack> samples, std::ostream& out);
std::vector<ScoreStack> read_score_table(std::istream& in);
// Weights: header class,w_0..w_{m-1}.
void write_weights(const ClassWeights& weights, std::ostream& out);
ClassWeights read_weights(std::istream& in);

}  // namespace vsal
