#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "rpm/nn/train.hpp"

namespace rpm::kws {

struct SweepRow {
  double train_fraction = 0.0;
  double train_accuracy = 0.0;
  double validation_accuracy = 0.0;

  bool operator==(const SweepRow&) const = default;
};

struct SweepResult {
  std::vector<SweepRow> rows;

  bool operator==(const SweepResult&) const = default;
};

struct TrainOutcome {
  nn::Model model;
  double train_accuracy;
  double validation_accuracy;
};

/// Stratified split at train_fraction (seeded by config.seed), then a fresh
/// model seeded by config.seed trained on the training side.
TrainOutcome train_and_evaluate(const nn::Dataset& data, const nn::Architecture& arch, double train_fraction,
                                const nn::TrainConfig& config);

/// One train_and_evaluate per split, all with the same seed.
SweepResult run_split_sweep(const nn::Dataset& data, const nn::Architecture& arch, std::span<const double> splits,
                            const nn::TrainConfig& config);

inline const std::vector<double> kDefaultSplits{0.5, 0.6, 0.7, 0.8, 0.9};

/// Header `split,train_acc,val_acc`, one row per split.
void write_sweep_csv(const SweepResult& result, std::ostream& out);
SweepResult read_sweep_csv(std::istream& in);

}  // namespace rpm::kws
