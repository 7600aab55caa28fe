// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "trnn/rnn.hpp"

namespace trnn {

/// Synthetic sequence classification. Each class owns a rank-1 prototype
/// tensor over `input_dims`; a sample is Gaussian noise at every step with the
/// prototype of its class added at one random step.
struct ToyTaskConfig {
    Index classes{5};
    Index steps{6};
    Shape input_dims{4, 4, 4, 4};
    Shape hidden_dims{4, 4};
    /// Ring ranks of each input map; empty means 2 everywhere.
    std::vector<Index> ranks;
    Index train_samples{1000};
    Index test_samples{500};
    double noise{1.0};
    int epochs{15};
    Index batch{32};
    double learning_rate{1e-2};
    double forget_bias{1.0};
    std::uint64_t seed{0};

    void validate() const;
    std::vector<Index> ring_ranks() const;
};

struct SequenceSet {
    std::vector<Eigen::MatrixXd> steps;  // each I×N
    std::vector<int> labels;
};

struct ToyData {
    SequenceSet train, test;
};

ToyData generate_toy_data(const ToyTaskConfig& cfg);

/// LSTM encoder plus a linear softmax readout on the final hidden state.
struct SequenceClassifier {
    TRLSTMParams lstm;
    Eigen::MatrixXd V;  // C×H
    Eigen::VectorXd c;

    Eigen::MatrixXd logits(const std::vector<Eigen::MatrixXd>& xs) const;
    double accuracy(const SequenceSet& data) const;
};

struct ToyModelResult {
    double accuracy{0};
    Index input_params{0};
    std::vector<double> epoch_loss;
};

struct ToyTrainResult {
    ToyModelResult ring;
    ToyModelResult dense;
    /// Ring input-to-hidden parameters over dense ones.
    double param_fraction{0};
};

/// Trains a classifier with Adam on mean cross-entropy; returns test accuracy.
ToyModelResult train_classifier(SequenceClassifier& model, const ToyData& data, const ToyTaskConfig& cfg);

/// Trains a TR-LSTM and a dense LSTM of the same hidden size on one dataset.
ToyTrainResult run_toytrain(const ToyTaskConfig& cfg);

}  // namespace trnn
