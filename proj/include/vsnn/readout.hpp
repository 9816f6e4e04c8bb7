#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

namespace vsnn {

inline constexpr int kNumClasses = 3;

// One-hot label matrix, one row per data point, column j <-> class j+1.
struct LabelMatrix {
    Eigen::MatrixXd entries;
};

// class_indices are 1-based (1..n_classes).
LabelMatrix one_hot_labels(const std::vector<int>& class_indices, int n_classes = kNumClasses);

struct TrainingMeta {
    std::uint64_t seed = 0;             // split seed the training set came from
    std::vector<int> training_indices;  // dataset rows used for training
    int rank = 0;                       // numerical rank of S
    double residual = 0.0;              // ||S W - L||_F
    bool degenerate_labels = false;     // some class absent from L
};

// Trained output layer: W = S+ L (minimum-norm least squares).
struct ReadoutWeights {
    Eigen::MatrixXd entries;  // n_nodes x n_classes
    TrainingMeta meta;
};

struct Prediction {
    std::array<double, kNumClasses> scores{};
    int class_index = 0;  // 1-based; argmax with ties toward the lowest index
};

// Solves S W = L in the least-squares sense through a singular value
// decomposition, dropping singular values below 1e-10 * max(rows, cols)
// relative to the largest; among all minimizers returns the minimum-norm
// one. Rank-deficient S (duplicate spike patterns) is the expected case.
ReadoutWeights train(const Eigen::MatrixXd& S, const LabelMatrix& L);

// scores = s^T W.
Prediction predict(const ReadoutWeights& weights, const Eigen::VectorXd& node_states);

}  // namespace vsnn
