#include "vsnn/readout.hpp"

#include <algorithm>

#include "vsnn/errors.hpp"

namespace vsnn {

LabelMatrix one_hot_labels(const std::vector<int>& class_indices, int n_classes) {
    if (n_classes < 1) throw InvalidDimension("one_hot_labels: need at least one class");
    LabelMatrix labels;
    labels.entries = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(class_indices.size()),
                                           n_classes);
    for (std::size_t i = 0; i < class_indices.size(); ++i) {
        const int c = class_indices[i];
        if (c < 1 || c > n_classes)
            throw DimensionMismatch("one_hot_labels: class index " + std::to_string(c) +
                                    " outside 1.." + std::to_string(n_classes));
        labels.entries(static_cast<Eigen::Index>(i), c - 1) = 1.0;
    }
    return labels;
}

ReadoutWeights train(const Eigen::MatrixXd& S, const LabelMatrix& L) {
    if (S.rows() == 0) throw EmptyTrainingSet("train: no training rows");
    if (S.rows() != L.entries.rows())
        throw DimensionMismatch("train: " + std::to_string(S.rows()) + " state rows vs " +
                                std::to_string(L.entries.rows()) + " label rows");

    Eigen::BDCSVD<Eigen::MatrixXd> svd(S, Eigen::ComputeThinU | Eigen::ComputeThinV);
    svd.setThreshold(1.0e-10 * static_cast<double>(std::max(S.rows(), S.cols())));

    ReadoutWeights weights;
    weights.entries = svd.solve(L.entries);
    weights.meta.rank = static_cast<int>(svd.rank());
    weights.meta.residual = (S * weights.entries - L.entries).norm();
    for (Eigen::Index c = 0; c < L.entries.cols(); ++c)
        if (L.entries.col(c).maxCoeff() <= 0.0) weights.meta.degenerate_labels = true;
    return weights;
}

Prediction predict(const ReadoutWeights& weights, const Eigen::VectorXd& node_states) {
    if (node_states.size() != weights.entries.rows())
        throw DimensionMismatch("predict: state vector length " +
                                std::to_string(node_states.size()) + " vs " +
                                std::to_string(weights.entries.rows()) + " weight rows");
    const Eigen::RowVectorXd scores = node_states.transpose() * weights.entries;

    Prediction p;
    const int n = static_cast<int>(std::min<Eigen::Index>(scores.size(), kNumClasses));
    int best = 0;
    for (int c = 0; c < n; ++c) {
        p.scores[static_cast<std::size_t>(c)] = scores(c);
        if (scores(c) > scores(best)) best = c;  // strict: ties keep the lowest index
    }
    p.class_index = best + 1;
    return p;
}

}  // namespace vsnn
