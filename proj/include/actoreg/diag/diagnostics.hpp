#pragma once

#include <optional>
#include <string>
#include <vector>

#include "actoreg/compute/adam.hpp"
#include "actoreg/data/dataset.hpp"
#include "actoreg/net/actor_critic.hpp"

namespace actoreg::diag {

using compute::Tensor;

// Actor-internal health metrics, each computed on the train and validation
// splits and reported with validation/train ratios (missing when the train
// side is zero). The plasticity probe runs on validation data only.
struct DiagnosticsReport {
    int64_t step = 0;
    double dead_fraction_train = 0.0, dead_fraction_val = 0.0;
    double feature_norm_train = 0.0, feature_norm_val = 0.0;
    int srank_train = 0, srank_val = 0;
    double plasticity_loss = 0.0;
    std::optional<double> dead_ratio, feature_norm_ratio, srank_ratio;
};

// Fraction of penultimate-layer units whose post-ReLU activation is zero on
// every sample of the batch.
double dead_neuron_fraction(net::Actor& actor, const Tensor& states);

// Mean per-sample L2 norm of the penultimate features.
double feature_norm(net::Actor& actor, const Tensor& states);

// Smallest k such that the top-k singular values of the matrix hold at least
// `delta` of the total singular-value mass; 0 for an all-zero matrix.
int srank(const std::vector<double>& mat, int rows, int cols, double delta = 0.99);
int srank(const Tensor& features, double delta = 0.99);

// Singular values (descending) by one-sided Jacobi iteration, in double.
std::vector<double> singular_values(std::vector<double> mat, int rows, int cols);

// Clones the actor and runs `steps` full-batch Adam updates of the
// behavior-cloning objective mean((pi(s) - a)^2) on the given data; returns
// the loss after the last update. The probed actor itself is not modified.
double plasticity_loss(net::Actor& actor, const Tensor& states, const Tensor& actions,
                       const compute::AdamConfig& adam, int steps = 100);

// All metrics over a dataset's split. Each side uses the full split up to
// `max_batch` samples (seeded uniform subsample beyond).
DiagnosticsReport diagnostics_report(net::Actor& actor, const data::TransitionDataset& ds,
                                     const data::SplitDataset& split,
                                     const compute::AdamConfig& adam, int64_t step,
                                     uint64_t seed, int plasticity_steps = 100,
                                     int64_t max_batch = 4096);

// Dataset rows (states + actions) for a list of transition indices.
std::pair<Tensor, Tensor> gather_rows(const data::TransitionDataset& ds,
                                      const std::vector<int64_t>& indices);

std::string to_json_line(const DiagnosticsReport& r);
void append_line(const std::string& path, const std::string& line);

}  // namespace actoreg::diag
