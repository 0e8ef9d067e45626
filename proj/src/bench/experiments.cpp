#include "rpm/bench/experiments.hpp"

#include <atomic>
#include <barrier>
#include <random>
#include <thread>

#include <fmt/format.h>

#include "rpm/kws/dataset.hpp"

namespace rpm::bench {

using nodes::Clock;

std::shared_ptr<const kws::KeywordClassifier> stand_in_classifier(std::uint64_t seed) {
  constexpr std::size_t kClasses = 8;
  std::vector<std::string> vocab;
  for (std::size_t k = 0; k < kClasses; ++k) vocab.push_back(fmt::format("tone{}", k));
  return std::make_shared<kws::KeywordClassifier>(nn::Model(kws::architecture_for(kClasses), seed), vocab);
}

Deployment::Deployment(const TopologyConfig& topology, std::shared_ptr<const kws::KeywordClassifier> classifier,
                       const nodes::DeviceConfig& device_template, bool retain_payloads) {
  topology.validate();
  const nodes::LinkProfile link{topology.link_delay_ms, topology.link_rate_bytes_per_s};

  nodes::CloudConfig cc;
  cc.mode = topology.mode;
  cc.service_time_ms = topology.cloud_service_time_ms;
  cc.processing_bytes_per_s = topology.processing_bytes_per_s;
  cc.store_time_ms = topology.cloud_store_time_ms;
  cc.link = link;
  cc.retain_payloads = retain_payloads;
  cloud_ = std::make_unique<nodes::CloudNode>(cc, classifier);
  cloud_->start();

  std::vector<Endpoint> entries(topology.rooms, cloud_->endpoint());
  if (topology.mode == TopologyMode::Fog) {
    for (std::uint32_t r = 0; r < topology.rooms; ++r) {
      nodes::FogConfig fc;
      fc.upstream = cloud_->endpoint();
      fc.service_time_ms = topology.fog_service_time_ms;
      fc.processing_bytes_per_s = topology.processing_bytes_per_s;
      fc.link = link;
      auto fog = std::make_unique<nodes::FogNode>(fc, classifier);
      fog->start();
      entries[r] = fog->endpoint();
      fogs_.push_back(std::move(fog));
    }
    for (auto& fog : fogs_) {
      const auto deadline = Clock::now() + std::chrono::seconds(5);
      while (!fog->upstream_connected()) {
        if (Clock::now() > deadline) throw nodes::NetError("fog could not reach the cloud");
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
      }
    }
  }

  std::uint32_t patient = 1;
  for (std::uint32_t r = 0; r < topology.rooms; ++r) {
    for (std::uint32_t k = 0; k < topology.devices_per_room; ++k, ++patient) {
      nodes::DeviceConfig dc = device_template;
      dc.patient = PatientId{patient};
      dc.upstream = entries[r];
      dc.link = link;
      dc.seed = device_template.seed * 1000 + patient;
      auto device = std::make_unique<nodes::DeviceNode>(dc);
      device->connect();
      devices_.push_back(std::move(device));
    }
  }
}

Deployment::~Deployment() { shutdown(); }

void Deployment::shutdown() {
  for (auto& d : devices_) d->stop(std::chrono::milliseconds(500));
  for (auto& f : fogs_) f->stop(std::chrono::milliseconds(500));
  if (cloud_) cloud_->stop();
}

void LatencyConfig::validate() const {
  if (max_rooms < 1) throw ConfigError("max_rooms must be at least 1");
  if (iterations < 1) throw ConfigError("iterations must be at least 1");
  if (topologies.empty()) throw ConfigError("no topology selected");
  if (pause_ms < 0) throw ConfigError("pause_ms must be nonnegative");
  profile.validate();
}

namespace {

// Runs one latency cell; returns the per-iteration mean RTTs.
std::vector<double> latency_cell(const LatencyConfig& config, TopologyMode mode, std::uint32_t rooms,
                                 const std::shared_ptr<const kws::KeywordClassifier>& classifier) {
  TopologyConfig topo = config.profile;
  topo.mode = mode;
  topo.rooms = rooms;
  nodes::DeviceConfig tmpl;
  tmpl.period_ms = 0;
  tmpl.seed = config.seed;
  Deployment deployment(topo, classifier, tmpl);
  auto& devices = deployment.devices();
  const std::size_t n = devices.size();
  const std::uint32_t total = config.warmup_iterations + config.iterations;

  std::vector<std::vector<double>> rtt(n, std::vector<double>(total, 0.0));
  std::atomic<bool> failed{false};
  std::string failure;
  std::mutex failure_mu;
  std::barrier sync(static_cast<std::ptrdiff_t>(n));
  std::vector<std::thread> senders;
  for (std::size_t i = 0; i < n; ++i) {
    senders.emplace_back([&, i] {
      auto& dev = *devices[i];
      for (std::uint32_t it = 0; it < total; ++it) {
        sync.arrive_and_wait();
        if (!failed) {
          try {
            dev.send_vital();
            if (!dev.wait_for_acks(std::chrono::seconds(5))) throw nodes::NetError("ack timed out");
            rtt[i][it] = dev.metrics().rtts().back();
          } catch (const Error& e) {
            std::lock_guard lock(failure_mu);
            failure = e.what();
            failed = true;
          }
        }
        sync.arrive_and_wait();
        if (i == 0) nodes::sleep_ms(config.pause_ms);
      }
    });
  }
  for (auto& t : senders) t.join();
  deployment.shutdown();
  if (failed) throw nodes::NetError(failure);

  std::vector<double> out;
  for (std::uint32_t it = config.warmup_iterations; it < total; ++it) {
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) sum += rtt[i][it];
    out.push_back(quantize_rtt(sum / static_cast<double>(n)));
  }
  return out;
}

std::uint64_t throughput_cell(const ThroughputConfig& config, TopologyMode mode, std::uint32_t size,
                              std::uint32_t trial, const std::shared_ptr<const kws::KeywordClassifier>& classifier) {
  TopologyConfig topo = config.profile;
  topo.mode = mode;
  topo.rooms = config.rooms;
  nodes::DeviceConfig tmpl;
  tmpl.period_ms = 0;
  tmpl.max_in_flight = config.max_in_flight;
  tmpl.seed = config.seed;
  Deployment deployment(topo, classifier, tmpl);

  std::atomic<bool> go{true};
  std::atomic<bool> failed{false};
  std::vector<std::thread> senders;
  const auto start = Clock::now();
  for (std::size_t i = 0; i < deployment.devices().size(); ++i) {
    senders.emplace_back([&, i] {
      auto& dev = *deployment.devices()[i];
      std::mt19937_64 rng(config.seed ^ (std::uint64_t{size} << 20) ^ (std::uint64_t{trial} << 8) ^ i);
      Frame f;
      f.category = DataCategory::Vitals;
      f.payload.resize(size);
      for (auto& b : f.payload) b = static_cast<std::uint8_t>(rng());
      try {
        while (go) dev.send_frame(f);
      } catch (const Error&) {
        failed = true;
      }
    });
  }
  const auto window =
      std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(config.duration_s));
  std::this_thread::sleep_until(start + window);
  const auto counted = deployment.cloud().store().count_between(DataCategory::Vitals, start, start + window);
  go = false;
  for (auto& t : senders) t.join();
  deployment.shutdown();
  if (failed) throw nodes::NetError("a sender lost its connection");
  return counted;
}

}  // namespace

LatencyReport run_latency_experiment(const LatencyConfig& config) {
  config.validate();
  const auto classifier = config.classifier ? config.classifier : stand_in_classifier(config.seed);
  LatencyReport report;
  for (std::uint32_t rooms = 1; rooms <= config.max_rooms; ++rooms) {
    for (TopologyMode mode : config.topologies) {
      try {
        const auto rtts = latency_cell(config, mode, rooms, classifier);
        for (std::uint32_t it = 0; it < rtts.size(); ++it) report.rows.push_back({mode, rooms, it, rtts[it]});
      } catch (const Error& e) {
        report.failures.push_back({mode, rooms, e.what()});
        report.rows.push_back({mode, rooms, 0, std::nullopt});
      }
    }
  }
  return report;
}

TopologyConfig ThroughputConfig::default_throughput_profile() {
  TopologyConfig t;
  t.processing_bytes_per_s = 8e6;
  return t;
}

void ThroughputConfig::validate() const {
  if (packet_sizes.empty()) throw ConfigError("no packet sizes");
  for (auto s : packet_sizes) {
    if (s < 1 || s > kMaxPayload) throw ConfigError(fmt::format("packet size {} out of range", s));
  }
  if (!(duration_s > 0)) throw ConfigError("duration_s must be positive");
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (rooms < 1) throw ConfigError("rooms must be at least 1");
  if (topologies.empty()) throw ConfigError("no topology selected");
  profile.validate();
}

ThroughputReport run_throughput_experiment(const ThroughputConfig& config) {
  config.validate();
  const auto classifier = config.classifier ? config.classifier : stand_in_classifier(config.seed);
  ThroughputReport report;
  for (std::uint32_t size : config.packet_sizes) {
    for (TopologyMode mode : config.topologies) {
      for (std::uint32_t trial = 0; trial < config.trials; ++trial) {
        try {
          report.rows.push_back({mode, size, trial, throughput_cell(config, mode, size, trial, classifier)});
        } catch (const Error& e) {
          report.failures.push_back({mode, size, e.what()});
          report.rows.push_back({mode, size, trial, std::nullopt});
        }
      }
    }
  }
  return report;
}

}  // namespace rpm::bench
