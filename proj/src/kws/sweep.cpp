#include "rpm/kws/sweep.hpp"

#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

namespace rpm::kws {

TrainOutcome train_and_evaluate(const nn::Dataset& data, const nn::Architecture& arch, double train_fraction,
                                const nn::TrainConfig& config) {
  const nn::Split split = nn::split_dataset(data.labels(), train_fraction, config.seed);
  nn::Model model(arch, config.seed);
  nn::train(model, data, split.train, config);
  const double train_acc = nn::evaluate_accuracy(model, data, split.train);
  const double val_acc = nn::evaluate_accuracy(model, data, split.validation);
  return {std::move(model), train_acc, val_acc};
}

SweepResult run_split_sweep(const nn::Dataset& data, const nn::Architecture& arch, std::span<const double> splits,
                            const nn::TrainConfig& config) {
  if (splits.empty()) throw nn::DatasetError("sweep needs at least one split");
  for (double s : splits) {
    if (!(s > 0.0 && s < 1.0)) throw nn::DatasetError(fmt::format("split {} outside (0, 1)", s));
  }
  SweepResult result;
  for (double s : splits) {
    const TrainOutcome o = train_and_evaluate(data, arch, s, config);
    result.rows.push_back({s, o.train_accuracy, o.validation_accuracy});
  }
  return result;
}

void write_sweep_csv(const SweepResult& result, std::ostream& out) {
  out << "split,train_acc,val_acc\n";
  for (const auto& r : result.rows) {
    out << fmt::format("{:.2f},{:.6f},{:.6f}\n", r.train_fraction, r.train_accuracy, r.validation_accuracy);
  }
}

SweepResult read_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "split,train_acc,val_acc") {
    throw nn::DatasetError("sweep CSV missing header");
  }
  SweepResult result;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    SweepRow r;
    char c1 = 0, c2 = 0;
    if (!(row >> r.train_fraction >> c1 >> r.train_accuracy >> c2 >> r.validation_accuracy) || c1 != ',' ||
        c2 != ',') {
      throw nn::DatasetError(fmt::format("bad sweep CSV row '{}'", line));
    }
    result.rows.push_back(r);
  }
  return result;
}

}  // namespace rpm::kws
