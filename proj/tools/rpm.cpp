// rpm: node runner, benchmarks, plotting and keyword-spotting training.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "rpm/bench/experiments.hpp"
#include "rpm/bench/plot.hpp"
#include "rpm/kws/dataset.hpp"
#include "rpm/kws/sweep.hpp"

namespace {

using namespace rpm;
namespace fs = std::filesystem;

struct NodeOptions {
  std::string role = "device";
  std::string mode = "fog";
  std::string listen = "127.0.0.1:0";
  std::string upstream;
  std::uint32_t patient = 1;
  double period_ms = 100;
  double link_delay_ms = 0;
  double link_rate = 0;
  double service_time_ms = 5;
  double processing_rate = 0;
  double store_time_ms = 0;
  std::string policy;
  std::string model;
};

struct DataOptions {
  std::string dataset = "synth";
  std::size_t classes = 8;
  std::size_t per_class = 200;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
};

kws::KwsDataset load_dataset(const DataOptions& o) {
  if (o.dataset == "synth") return kws::synth_dataset(o.classes, o.per_class, o.seed);
  return kws::load_speech_commands(o.dataset);
}

nn::TrainConfig train_config(const DataOptions& o) {
  nn::TrainConfig c;
  c.epochs = o.epochs;
  c.batch_size = o.batch_size;
  c.learning_rate = o.learning_rate;
  c.seed = o.seed;
  return c;
}

void add_data_options(CLI::App* cmd, DataOptions& o) {
  cmd->add_option("--dataset", o.dataset, "'synth' or a Speech Commands directory")->capture_default_str();
  cmd->add_option("--classes", o.classes, "synthetic classes")->capture_default_str();
  cmd->add_option("--per-class", o.per_class, "synthetic clips per class")->capture_default_str();
  cmd->add_option("--epochs", o.epochs)->capture_default_str();
  cmd->add_option("--batch-size", o.batch_size)->capture_default_str();
  cmd->add_option("--lr", o.learning_rate, "learning rate")->capture_default_str();
  cmd->add_option("--seed", o.seed)->capture_default_str();
}

std::shared_ptr<const kws::KeywordClassifier> load_model(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_shared<kws::KeywordClassifier>(nn::load_checkpoint(path));
}

filter::PolicyFile load_policies(const std::string& path) {
  return path.empty() ? nodes::default_policy_file() : filter::load_policy_file(path);
}

// Blocks SIGINT and SIGTERM so they can be collected with sigtimedwait.
sigset_t block_stop_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

// Returns true on a stop signal, false when `alive` turned false first.
bool wait_for_stop(const sigset_t& set, const std::function<bool()>& alive) {
  const timespec tick{0, 200'000'000};
  while (alive()) {
    if (sigtimedwait(&set, nullptr, &tick) > 0) return true;
  }
  return false;
}

int run_node(const NodeOptions& o) {
  const sigset_t signals = block_stop_signals();
  const nodes::LinkProfile link{o.link_delay_ms, o.link_rate};
  const auto listen = parse_endpoint(o.listen);

  if (o.role == "device") {
    if (o.upstream.empty()) throw ConfigError("--upstream is required for a device");
    nodes::DeviceConfig c;
    c.patient = PatientId{o.patient};
    c.upstream = parse_endpoint(o.upstream);
    c.period_ms = o.period_ms;
    c.link = link;
    nodes::DeviceNode device(c);
    device.start();
    fmt::print(std::cerr, "device {} sending to {}\n", o.patient, c.upstream.to_string());
    const bool stopped = wait_for_stop(signals, [&] { return device.healthy(); });
    device.stop();
    nodes::dump_metrics(std::cout, device.metrics(), {});
    return stopped ? 0 : 1;
  }

  if (o.role == "fog") {
    if (o.upstream.empty()) throw ConfigError("--upstream is required for a fog");
    nodes::FogConfig c;
    c.listen = listen;
    c.upstream = parse_endpoint(o.upstream);
    c.service_time_ms = o.service_time_ms;
    c.processing_bytes_per_s = o.processing_rate;
    c.link = link;
    if (o.model.empty()) throw ConfigError("--model is required for a fog");
    nodes::FogNode fog(c, load_model(o.model), load_policies(o.policy));
    fog.start();
    fmt::print(std::cerr, "fog listening on {}\n", fog.endpoint().to_string());
    wait_for_stop(signals, [] { return true; });
    fog.stop();
    nodes::dump_metrics(std::cout, fog.metrics(), fog.engine().drops_by_category());
    return 0;
  }

  if (o.role == "cloud") {
    nodes::CloudConfig c;
    c.listen = listen;
    c.mode = topology_from_string(o.mode);
    c.service_time_ms = o.service_time_ms;
    c.processing_bytes_per_s = o.processing_rate;
    c.store_time_ms = o.store_time_ms;
    c.link = link;
    nodes::CloudNode cloud(c, load_model(o.model), load_policies(o.policy));
    cloud.start();
    fmt::print(std::cerr, "cloud ({} mode) listening on {}\n", o.mode, cloud.endpoint().to_string());
    wait_for_stop(signals, [] { return true; });
    cloud.stop();
    nodes::dump_metrics(std::cout, cloud.metrics(), cloud.engine().drops_by_category());
    std::string stored;
    for (DataCategory cat : kAllCategories) {
      stored += fmt::format("{}{}:{}", stored.empty() ? "" : ",", to_string(cat), cloud.store().count(cat));
    }
    fmt::print("stored_by_category={}\n", stored);
    return 0;
  }
  throw ConfigError(fmt::format("unknown role '{}'", o.role));
}

void print_summary(const std::vector<bench::CellSummary>& cells, std::string_view x_name, std::string_view unit) {
  for (const auto& c : cells) {
    fmt::print("{:>5} {}={:<6} n={:<3} mean={:.3f} median={:.3f} stddev={:.3f} {}\n", to_string(c.topology), x_name,
               c.x, c.count, c.mean, c.median, c.stddev, unit);
  }
}

void print_comparison(const bench::Comparison& cmp, std::string_view x_name) {
  for (const auto& v : cmp.cells) {
    fmt::print("{}={:<6} mean_diff={:+.3f} median_diff={:+.3f} fog_better={}\n", x_name, v.x, v.mean_difference,
               v.median_difference, v.fog_better);
  }
  fmt::print("fog_better_everywhere={}\n", cmp.fog_better_everywhere);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(fmt::format("bad list item '{}'", item));
    }
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Remote patient monitoring nodes, benchmarks and keyword spotting"};
  app.require_subcommand(1);

  NodeOptions node;
  auto* node_cmd = app.add_subcommand("node", "run one device, fog or cloud node until interrupted");
  node_cmd->add_option("--role", node.role)->check(CLI::IsMember({"device", "fog", "cloud"}))->required();
  node_cmd->add_option("--mode", node.mode, "cloud topology: fog or cloud")
      ->check(CLI::IsMember({"fog", "cloud"}))
      ->capture_default_str();
  node_cmd->add_option("--listen", node.listen, "HOST:PORT")->capture_default_str();
  node_cmd->add_option("--upstream", node.upstream, "HOST:PORT of the next hop");
  node_cmd->add_option("--patient", node.patient)->capture_default_str();
  node_cmd->add_option("--period-ms", node.period_ms, "vitals period")->capture_default_str();
  node_cmd->add_option("--link-delay-ms", node.link_delay_ms, "emulated delay per outgoing hop")->capture_default_str();
  node_cmd->add_option("--link-rate", node.link_rate, "emulated link rate, bytes/s (0 = unlimited)");
  node_cmd->add_option("--service-time-ms", node.service_time_ms)->capture_default_str();
  node_cmd->add_option("--processing-rate", node.processing_rate, "payload processing rate, bytes/s");
  node_cmd->add_option("--store-time-ms", node.store_time_ms, "cloud cost per fog-processed frame");
  node_cmd->add_option("--policy", node.policy, "policy file");
  node_cmd->add_option("--model", node.model, "checkpoint written by 'rpm train'");

  auto* bench_cmd = app.add_subcommand("bench", "latency and throughput experiments");
  bench_cmd->require_subcommand(1);

  bench::LatencyConfig lat;
  std::string lat_out = ".";
  auto* lat_cmd = bench_cmd->add_subcommand("latency", "round-trip time versus rooms");
  lat_cmd->add_option("--rooms", lat.max_rooms)->capture_default_str();
  lat_cmd->add_option("--iterations", lat.iterations)->capture_default_str();
  lat_cmd->add_option("--link-delay-ms", lat.profile.link_delay_ms)->capture_default_str();
  lat_cmd->add_option("--cloud-service-ms", lat.profile.cloud_service_time_ms)->capture_default_str();
  lat_cmd->add_option("--fog-service-ms", lat.profile.fog_service_time_ms)->capture_default_str();
  lat_cmd->add_option("--seed", lat.seed)->capture_default_str();
  lat_cmd->add_option("--out", lat_out, "output directory")->capture_default_str();

  bench::ThroughputConfig thr;
  std::string sizes = "1024,2048,4096,8192,16384,32768";
  std::string thr_out = ".";
  auto* thr_cmd = bench_cmd->add_subcommand("throughput", "frames accepted at the cloud versus packet size");
  thr_cmd->add_option("--sizes", sizes, "comma-separated payload sizes in bytes")->capture_default_str();
  thr_cmd->add_option("--duration-s", thr.duration_s, "window per cell")->capture_default_str();
  thr_cmd->add_option("--trials", thr.trials)->capture_default_str();
  thr_cmd->add_option("--link-delay-ms", thr.profile.link_delay_ms)->capture_default_str();
  thr_cmd->add_option("--link-rate", thr.profile.link_rate_bytes_per_s, "bytes/s per hop (0 = unlimited)");
  thr_cmd->add_option("--processing-rate", thr.profile.processing_bytes_per_s, "bytes/s")->capture_default_str();
  thr_cmd->add_option("--seed", thr.seed)->capture_default_str();
  thr_cmd->add_option("--out", thr_out, "output directory")->capture_default_str();

  std::string plot_in, plot_out;
  auto* plot_cmd = app.add_subcommand("plot", "render a latency or throughput CSV as SVG");
  plot_cmd->add_option("--in", plot_in)->required();
  plot_cmd->add_option("--out", plot_out)->required();

  DataOptions train_data;
  double split = 0.7;
  std::string model_out = "model.bin";
  auto* train_cmd = app.add_subcommand("train", "train the keyword classifier and write a checkpoint");
  add_data_options(train_cmd, train_data);
  train_cmd->add_option("--split", split, "training fraction")->capture_default_str();
  train_cmd->add_option("--out", model_out)->capture_default_str();

  DataOptions sweep_data;
  std::string splits = "0.5,0.6,0.7,0.8,0.9";
  std::string sweep_out;
  auto* sweep_cmd = app.add_subcommand("sweep", "train once per split and report accuracies as CSV");
  add_data_options(sweep_cmd, sweep_data);
  sweep_cmd->add_option("--splits", splits)->capture_default_str();
  sweep_cmd->add_option("--out", sweep_out, "CSV path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*node_cmd) return run_node(node);

    if (*lat_cmd) {
      const auto report = bench::run_latency_experiment(lat);
      fs::create_directories(lat_out);
      bench::write_csv(report, (fs::path(lat_out) / "latency.csv").string());
      for (const auto& f : report.failures) fmt::print(std::cerr, "cell {} rooms={} failed: {}\n", to_string(f.topology), f.x, f.message);
      print_summary(bench::summarize(report), "rooms", "ms");
      if (!report.rows.empty() && report.failures.empty()) {
        bench::emit_plot_svg(report, (fs::path(lat_out) / "latency.svg").string());
        print_comparison(bench::compare_reports(bench::rows_for(report, TopologyMode::Fog),
                                                bench::rows_for(report, TopologyMode::Cloud)),
                         "rooms");
      }
      return report.failures.empty() ? 0 : 1;
    }

    if (*thr_cmd) {
      thr.packet_sizes.clear();
      for (double s : parse_list(sizes)) thr.packet_sizes.push_back(static_cast<std::uint32_t>(s));
      const auto report = bench::run_throughput_experiment(thr);
      fs::create_directories(thr_out);
      bench::write_csv(report, (fs::path(thr_out) / "throughput.csv").string());
      for (const auto& f : report.failures) fmt::print(std::cerr, "cell {} size={} failed: {}\n", to_string(f.topology), f.x, f.message);
      print_summary(bench::summarize(report), "size", "packets");
      if (!report.rows.empty() && report.failures.empty()) {
        bench::emit_plot_svg(report, (fs::path(thr_out) / "throughput.svg").string());
        print_comparison(bench::compare_reports(bench::rows_for(report, TopologyMode::Fog),
                                                bench::rows_for(report, TopologyMode::Cloud)),
                         "size");
      }
      return report.failures.empty() ? 0 : 1;
    }

    if (*plot_cmd) {
      if (bench::detect_report_kind(plot_in) == bench::ReportKind::Latency) {
        bench::emit_plot_svg(bench::read_latency_csv(plot_in), plot_out);
      } else {
        bench::emit_plot_svg(bench::read_throughput_csv(plot_in), plot_out);
      }
      return 0;
    }

    if (*train_cmd) {
      const auto ds = load_dataset(train_data);
      const auto features = kws::build_feature_dataset(ds);
      const auto arch = kws::architecture_for(ds.vocabulary.size());
      const auto outcome = kws::train_and_evaluate(features, arch, split, train_config(train_data));
      nn::save_checkpoint(model_out, outcome.model, ds.vocabulary);
      fmt::print("clips={} classes={} split={:.2f} train_acc={:.6f} val_acc={:.6f}\n", ds.clips.size(),
                 ds.vocabulary.size(), split, outcome.train_accuracy, outcome.validation_accuracy);
      return 0;
    }

    if (*sweep_cmd) {
      const auto ds = load_dataset(sweep_data);
      const auto features = kws::build_feature_dataset(ds);
      const auto arch = kws::architecture_for(ds.vocabulary.size());
      const auto list = parse_list(splits);
      const auto result = kws::run_split_sweep(features, arch, list, train_config(sweep_data));
      if (sweep_out.empty()) {
        kws::write_sweep_csv(result, std::cout);
      } else {
        std::ofstream out(sweep_out, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(fmt::format("cannot open '{}' for writing", sweep_out));
        kws::write_sweep_csv(result, out);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    fmt::print(std::cerr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
