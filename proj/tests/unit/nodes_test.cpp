#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <thread>

#include "rpm/domain/codec.hpp"
#include "rpm/domain/segment.hpp"
#include "rpm/kws/dataset.hpp"
#include "rpm/nodes/device.hpp"
#include "rpm/nodes/servers.hpp"

namespace rpm::nodes {
namespace {

using namespace std::chrono_literals;

std::shared_ptr<const kws::KeywordClassifier> stand_in_classifier(std::size_t n_classes = 3) {
  std::vector<std::string> vocab;
  for (std::size_t k = 0; k < n_classes; ++k) vocab.push_back("w" + std::to_string(k));
  return std::make_shared<kws::KeywordClassifier>(nn::Model(kws::architecture_for(n_classes), 5), vocab);
}

bool eventually(const std::function<bool()>& pred, Clock::duration timeout = 5s) {
  const auto deadline = Clock::now() + timeout;
  while (Clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(5ms);
  }
  return pred();
}

filter::PolicyFile allow_everyone(std::initializer_list<DataCategory> allowed, bool redact = false) {
  filter::PolicyFile file;
  file.default_policy = filter::policy_from_consent(PatientId{0}, allowed, redact);
  return file;
}

CloudConfig quick_cloud(TopologyMode mode) {
  CloudConfig c;
  c.mode = mode;
  c.service_time_ms = 0;
  return c;
}

DeviceConfig device_to(const Endpoint& ep, std::uint32_t patient = 1) {
  DeviceConfig d;
  d.patient = PatientId{patient};
  d.upstream = ep;
  d.period_ms = 0;
  return d;
}

Frame opaque_frame(DataCategory c, std::vector<std::uint8_t> payload, std::uint32_t patient = 1) {
  Frame f;
  f.category = c;
  f.patient = PatientId{patient};
  f.payload = std::move(payload);
  return f;
}

// Connected loopback socket pair.
struct Pipe {
  Listener listener{Endpoint{"127.0.0.1", 0}};
  Socket client;
  Socket server;
  Pipe() {
    client = connect_to(listener.endpoint());
    server = std::move(*listener.accept());
  }
};

// --- camera state machine --------------------------------------------------

TEST(CameraFsm, ExhaustiveTableOfTwelvePairs) {
  using S = CameraState;
  using C = CameraCommand;
  const std::array<S, 3> states{S::Sleep, S::Monitoring, S::Streaming};
  const std::array<C, 4> cmds{C::CameraOn, C::CameraOff, C::CheckupStart, C::CheckupEnd};
  const std::map<std::pair<S, C>, S> moves{
      {{S::Sleep, C::CheckupStart}, S::Monitoring},
      {{S::Monitoring, C::CameraOn}, S::Streaming},
      {{S::Streaming, C::CameraOff}, S::Monitoring},
      {{S::Monitoring, C::CheckupEnd}, S::Sleep},
  };
  int checked = 0;
  for (S s : states) {
    for (C c : cmds) {
      const auto it = moves.find({s, c});
      const S expected = it == moves.end() ? s : it->second;
      EXPECT_EQ(handle_camera_command(s, c), expected) << to_string(s) << " + " << to_string(c);
      ++checked;
    }
  }
  EXPECT_EQ(checked, 12);
}

TEST(CameraFsm, Examples) {
  EXPECT_EQ(handle_camera_command(CameraState::Sleep, CameraCommand::CameraOff), CameraState::Sleep);
  const auto monitoring = handle_camera_command(CameraState::Sleep, CameraCommand::CheckupStart);
  EXPECT_EQ(monitoring, CameraState::Monitoring);
  EXPECT_EQ(handle_camera_command(monitoring, CameraCommand::CameraOn), CameraState::Streaming);
  // Streaming is reachable only through CameraOn.
  EXPECT_EQ(handle_camera_command(CameraState::Sleep, CameraCommand::CameraOn), CameraState::Sleep);
}

// --- delayed link and frame reader ------------------------------------------

TEST(DelayedLink, ZeroDelayWritesBeforeSendReturns) {
  Pipe pipe;
  DelayedLink link(pipe.client, 0.0);
  link.send(opaque_frame(DataCategory::Vitals, {1, 2, 3}));
  EXPECT_EQ(link.frames_written(), 1u);
  EXPECT_EQ(link.bytes_written(), kFrameOverhead + 3);
  FrameReader reader(pipe.server);
  const auto got = reader.next();
  ASSERT_TRUE(got);
  EXPECT_EQ(got->payload, (std::vector<std::uint8_t>{1, 2, 3}));
}

TEST(DelayedLink, FiftyMillisecondDelayIsObservedOneWay) {
  Pipe pipe;
  DelayedLink link(pipe.client, 50.0);
  FrameReader reader(pipe.server);
  for (int i = 0; i < 5; ++i) {
    const auto sent = Clock::now();
    link.send(opaque_frame(DataCategory::Vitals, {static_cast<std::uint8_t>(i)}));
    ASSERT_TRUE(reader.next());
    EXPECT_GE(elapsed_ms(sent), 50.0);
  }
}

TEST(DelayedLink, HundredFramesArriveInSendOrder) {
  Pipe pipe;
  DelayedLink link(pipe.client, 5.0);
  std::vector<std::uint8_t> payload(100);
  for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = static_cast<std::uint8_t>(i);
  for (const Frame& f : segment_payload(PatientId{1}, DataCategory::AudioClip, payload, 1)) link.send(f);
  FrameReader reader(pipe.server);
  for (std::uint32_t k = 0; k < 100; ++k) {
    const auto got = reader.next();
    ASSERT_TRUE(got);
    EXPECT_EQ(got->seq, k);
    EXPECT_EQ(got->total, 100u);
  }
}

TEST(DelayedLink, ClosedConnectionSurfacesSendError) {
  Pipe pipe;
  pipe.server.close();
  DelayedLink link(pipe.client, 0.0);
  const Frame f = opaque_frame(DataCategory::Vitals, std::vector<std::uint8_t>(4096));
  EXPECT_THROW(
      {
        for (int i = 0; i < 200; ++i) link.send(f);
      },
      NetError);
  EXPECT_TRUE(link.failed());

  Pipe other;
  DelayedLink delayed(other.client, 1.0);
  other.server.close();
  EXPECT_THROW(
      {
        for (int i = 0; i < 1000; ++i) {
          delayed.send(f);
          std::this_thread::sleep_for(1ms);
        }
      },
      NetError);
}

TEST(DelayedLink, RateLimitSerializesFrames) {
  Pipe pipe;
  // 10 frames of 1000 bytes at 100 kB/s occupy the hop for about 100 ms.
  DelayedLink link(pipe.client, 0.0, 100000.0);
  const auto start = Clock::now();
  const auto frame = opaque_frame(DataCategory::Vitals, std::vector<std::uint8_t>(1000 - kFrameOverhead));
  for (int i = 0; i < 10; ++i) link.send(frame);
  FrameReader reader(pipe.server);
  for (int i = 0; i < 10; ++i) ASSERT_TRUE(reader.next());
  EXPECT_GE(elapsed_ms(start), 95.0);
}

TEST(DelayedLink, RejectsNegativeProfile) {
  Pipe pipe;
  EXPECT_THROW(DelayedLink(pipe.client, -1.0), ConfigError);
}

TEST(FrameReader, SkipsGarbageAndCorruptFramesThenResyncs) {
  Pipe pipe;
  auto good = encode_frame(opaque_frame(DataCategory::Vitals, {9}));
  auto bad = good;
  bad[kFrameHeaderSize] ^= 0xFF;
  std::vector<std::uint8_t> wire(17, 0xAB);
  wire.insert(wire.end(), bad.begin(), bad.end());
  wire.insert(wire.end(), good.begin(), good.end());
  pipe.client.send_all(wire);
  pipe.client.shutdown_write();

  FrameReader reader(pipe.server);
  const auto got = reader.next();
  ASSERT_TRUE(got);
  EXPECT_EQ(got->payload, (std::vector<std::uint8_t>{9}));
  EXPECT_FALSE(reader.next());
  EXPECT_EQ(reader.stats().protocol_errors, 1u);
  EXPECT_EQ(reader.stats().crc_failures, 1u);
  EXPECT_EQ(reader.stats().truncated_frames, 0u);
}

TEST(FrameReader, CountsPartialFrameAtEndOfStream) {
  Pipe pipe;
  const auto bytes = encode_frame(opaque_frame(DataCategory::Vitals, {1, 2, 3, 4}));
  pipe.client.send_all(std::span(bytes).first(bytes.size() - 2));
  pipe.client.shutdown_write();
  FrameReader reader(pipe.server);
  EXPECT_FALSE(reader.next());
  EXPECT_EQ(reader.stats().truncated_frames, 1u);
}

// --- cloud -----------------------------------------------------------------

TEST(Cloud, AckCarriesSenderSeq) {
  CloudNode cloud(quick_cloud(TopologyMode::Fog));
  cloud.start();
  NodeMetrics m;
  Socket raw = connect_to(cloud.endpoint());
  FrameReader reader(raw);
  ControlMessage hello;
  hello.role = NodeRole::Fog;
  raw.send_all(encode_frame(make_control_frame(PatientId{0}, hello)));
  ASSERT_TRUE(reader.next());

  const auto segments = segment_payload(PatientId{4}, DataCategory::Vitals, std::vector<std::uint8_t>(40, 1), 4);
  for (const Frame& f : segments) raw.send_all(encode_frame(f));
  for (std::uint32_t k = 0; k < segments.size(); ++k) {
    const auto ack = reader.next();
    ASSERT_TRUE(ack);
    EXPECT_EQ(ack->category, DataCategory::Ack);
    EXPECT_EQ(ack->seq, k);
    EXPECT_EQ(ack->patient, PatientId{4});
    EXPECT_EQ(decode_ack(ack->payload).acked, DataCategory::Vitals);
  }
  raw.shutdown_write();
  EXPECT_FALSE(reader.next());
  cloud.stop();
}

TEST(Cloud, MalformedAndCorruptFramesAreDroppedAndConnectionStaysOpen) {
  CloudNode cloud(quick_cloud(TopologyMode::Fog));
  cloud.start();
  Socket raw = connect_to(cloud.endpoint());
  FrameReader reader(raw);
  ControlMessage hello;
  hello.role = NodeRole::Fog;
  raw.send_all(encode_frame(make_control_frame(PatientId{0}, hello)));
  ASSERT_TRUE(reader.next());

  auto good = encode_frame(opaque_frame(DataCategory::Vitals, {1, 2}));
  auto corrupt = good;
  corrupt.back() ^= 0x01;
  raw.send_all(std::vector<std::uint8_t>(9, 0x00));
  raw.send_all(corrupt);
  raw.send_all(good);
  const auto ack = reader.next();
  ASSERT_TRUE(ack);
  EXPECT_EQ(ack->category, DataCategory::Ack);
  EXPECT_TRUE(eventually([&] { return cloud.metrics().crc_failures.load() == 1; }));
  EXPECT_EQ(cloud.metrics().protocol_errors.load(), 1u);
  EXPECT_EQ(cloud.store().count(DataCategory::Vitals), 1u);

  raw.send_all(good);
  EXPECT_TRUE(reader.next());
  EXPECT_EQ(cloud.store().count(DataCategory::Vitals), 2u);
  cloud.stop();
}

TEST(Cloud, SerializedServiceBoundsAggregateRate) {
  CloudConfig cfg = quick_cloud(TopologyMode::Cloud);
  cfg.service_time_ms = 2.0;
  cfg.retain_payloads = false;
  CloudNode cloud(cfg, stand_in_classifier(), allow_everyone({DataCategory::Vitals}));
  cloud.start();

  std::vector<std::unique_ptr<DeviceNode>> devices;
  for (std::uint32_t p = 1; p <= 6; ++p) {
    auto d = device_to(cloud.endpoint(), p);
    d.max_in_flight = 4;
    devices.push_back(std::make_unique<DeviceNode>(d));
    devices.back()->connect();
  }
  std::atomic<bool> go{true};
  std::vector<std::thread> senders;
  const auto start = Clock::now();
  for (auto& d : devices) {
    senders.emplace_back([&, dev = d.get()] {
      while (go) dev->send_frame(opaque_frame(DataCategory::Vitals, {1}));
    });
  }
  std::this_thread::sleep_for(1s);
  const auto stored = cloud.store().count_between(DataCategory::Vitals, start, start + 1s);
  go = false;
  for (auto& t : senders) t.join();
  for (auto& d : devices) d->stop();
  cloud.stop();

  EXPECT_LE(stored, 500u);
  EXPECT_GT(stored, 250u);  // servicing is the bottleneck, not the senders
}

TEST(Cloud, StoreCountersEqualLogTallies) {
  CloudNode cloud(quick_cloud(TopologyMode::Cloud), stand_in_classifier(),
                  allow_everyone({DataCategory::Vitals, DataCategory::KeywordEvent, DataCategory::CameraControl,
                                  DataCategory::Identity}));
  cloud.start();
  DeviceNode device(device_to(cloud.endpoint()));
  device.connect();
  std::mt19937 rng(3);
  for (int i = 0; i < 60; ++i) {
    switch (rng() % 4) {
      case 0: device.send_vital(); break;
      case 1: device.camera_command(static_cast<CameraCommand>(rng() % 4)); break;
      case 2:
        if (device.camera_state() != CameraState::Sleep) device.send_identity({"x", 1, 1});
        break;
      default: device.send_frame(opaque_frame(DataCategory::KeywordEvent, encode_keyword({1, 0.5}))); break;
    }
  }
  ASSERT_TRUE(device.wait_for_acks(5s));
  device.stop();
  cloud.stop();

  std::array<std::uint64_t, kCategoryCount> recount{};
  for (const auto& e : cloud.store().snapshot()) ++recount[index_of(e.category)];
  EXPECT_EQ(cloud.store().counters(), recount);
  EXPECT_EQ(cloud.store().size(), static_cast<std::size_t>(std::accumulate(recount.begin(), recount.end(), 0ull)));
  EXPECT_GT(cloud.store().size(), 0u);
}

TEST(Cloud, RefusesRolesOutsideItsTopology) {
  CloudNode fog_mode(quick_cloud(TopologyMode::Fog));
  fog_mode.start();
  DeviceNode stray(device_to(fog_mode.endpoint()));
  EXPECT_THROW(stray.connect(), TopologyError);
  EXPECT_EQ(fog_mode.metrics().topology_rejections.load(), 1u);
  EXPECT_EQ(fog_mode.store().size(), 0u);

  CloudNode cloud_mode(quick_cloud(TopologyMode::Cloud), stand_in_classifier());
  cloud_mode.start();
  NodeMetrics m;
  EXPECT_THROW(ClientSession(cloud_mode.endpoint(), NodeRole::Fog, PatientId{0}, {}, m), TopologyError);
  EXPECT_EQ(cloud_mode.metrics().topology_rejections.load(), 1u);
}

TEST(Cloud, CloudModeRequiresModel) {
  EXPECT_THROW(CloudNode(quick_cloud(TopologyMode::Cloud)), ConfigError);
  EXPECT_NO_THROW(CloudNode(quick_cloud(TopologyMode::Fog)));
}

// --- device ----------------------------------------------------------------

TEST(Device, TenSecondsAtHundredMillisecondsGivesHundredVitals) {
  CloudNode cloud(quick_cloud(TopologyMode::Cloud), stand_in_classifier());
  cloud.start();
  auto cfg = device_to(cloud.endpoint());
  cfg.period_ms = 100;
  DeviceNode device(cfg);
  device.start();
  std::this_thread::sleep_for(10s);
  device.stop();
  cloud.stop();

  const auto n = cloud.store().count(DataCategory::Vitals);
  EXPECT_GE(n, 98u);
  EXPECT_LE(n, 102u);
  EXPECT_EQ(cloud.metrics().truncated_frames.load(), 0u);
  EXPECT_EQ(cloud.metrics().crc_failures.load(), 0u);

  // Timestamps are nondecreasing and every kind stays in range.
  std::uint64_t last = 0;
  for (const auto& e : cloud.store().snapshot()) {
    const auto v = decode_vital(*e.payload);
    EXPECT_GE(v.timestamp_ms, last);
    EXPECT_TRUE(in_range(v.kind, v.value));
    last = v.timestamp_ms;
  }
}

TEST(Device, StopShutsDownCleanly) {
  CloudNode cloud(quick_cloud(TopologyMode::Cloud), stand_in_classifier());
  cloud.start();
  auto cfg = device_to(cloud.endpoint());
  cfg.period_ms = 5;
  cfg.link.delay_ms = 3;
  DeviceNode device(cfg);
  device.start();
  std::this_thread::sleep_for(300ms);
  device.stop();
  EXPECT_TRUE(eventually([&] { return cloud.metrics().frames_received.load() > 1; }));
  cloud.stop();
  EXPECT_EQ(cloud.metrics().truncated_frames.load(), 0u);
  EXPECT_EQ(device.metrics().ack_mismatches.load(), 0u);
  EXPECT_EQ(device.metrics().rtts().size(), cloud.store().count(DataCategory::Vitals));
}

TEST(Device, AudioClipIsReassembledByteIdentical) {
  CloudNode cloud(quick_cloud(TopologyMode::Cloud), stand_in_classifier(),
                  allow_everyone({DataCategory::AudioClip, DataCategory::CameraControl}));
  cloud.start();
  DeviceNode device(device_to(cloud.endpoint()));
  device.connect();

  AudioClip clip;
  clip.samples.resize(16384);  // 32768 bytes
  std::mt19937 rng(11);
  for (auto& s : clip.samples) s = static_cast<std::int16_t>(rng());
  EXPECT_THROW(device.send_audio(clip), StateError);
  device.camera_command(CameraCommand::CheckupStart);
  device.send_audio(clip);
  ASSERT_TRUE(device.wait_for_acks(5s));
  device.stop();
  cloud.stop();

  std::vector<Frame> segments;
  for (const auto& e : cloud.store().snapshot()) {
    if (e.category != DataCategory::AudioClip) continue;
    Frame f;
    f.category = e.category;
    f.patient = e.patient;
    f.seq = e.seq;
    f.total = e.total;
    f.payload = *e.payload;
    segments.push_back(f);
  }
  ASSERT_EQ(segments.size(), 4u);
  const auto whole = reassemble(segments);
  ASSERT_TRUE(whole.complete());
  EXPECT_EQ(*whole.payload, encode_pcm(clip.samples));
  EXPECT_EQ(cloud.processor().clips_classified(), 1u);
}

TEST(Device, ConnectRetriesThenFails) {
  std::uint16_t port;
  {
    Listener probe(Endpoint{"127.0.0.1", 0});
    port = probe.port();
  }
  auto cfg = device_to(Endpoint{"127.0.0.1", port});
  cfg.retry_backoff_ms = 50;
  DeviceNode device(cfg);
  const auto start = Clock::now();
  EXPECT_THROW(device.connect(), NetError);
  EXPECT_GE(elapsed_ms(start), 150.0 - 1.0);  // backoffs of 50 and 100 ms between three attempts
}

TEST(Device, ReconnectsOnceAfterMidStreamDisconnect) {
  auto cloud = std::make_unique<CloudNode>(quick_cloud(TopologyMode::Cloud), stand_in_classifier());
  cloud->start();
  const auto port = cloud->endpoint().port;
  DeviceNode device(device_to(cloud->endpoint()));
  device.connect();
  device.send_vital();
  ASSERT_TRUE(device.wait_for_acks(2s));
  cloud.reset();

  CloudConfig again = quick_cloud(TopologyMode::Cloud);
  again.listen.port = port;
  CloudNode replacement(again, stand_in_classifier());
  replacement.start();
  // The dead connection may accept a write or two before failing.
  EXPECT_TRUE(eventually([&] {
    device.send_vital();
    return replacement.store().count(DataCategory::Vitals) > 0;
  }));
  EXPECT_EQ(device.metrics().reconnects.load(), 1u);

  replacement.stop();
  EXPECT_THROW(
      {
        for (int i = 0; i < 100; ++i) {
          device.send_vital();
          std::this_thread::sleep_for(2ms);
        }
      },
      NetError);
}

TEST(Device, StreamingSendsHeartbeats) {
  CloudNode cloud(quick_cloud(TopologyMode::Cloud), stand_in_classifier());
  cloud.start();
  auto cfg = device_to(cloud.endpoint());
  cfg.heartbeat_period_ms = 50;
  DeviceNode device(cfg);
  device.start();
  device.camera_command(CameraCommand::CheckupStart);
  EXPECT_EQ(device.camera_command(CameraCommand::CameraOn), CameraState::Streaming);
  std::this_thread::sleep_for(400ms);
  EXPECT_EQ(cloud.processor().camera_state(PatientId{1}), CameraState::Streaming);
  device.camera_command(CameraCommand::CameraOff);
  device.stop();
  cloud.stop();

  int heartbeats = 0;
  for (const auto& e : cloud.store().snapshot()) {
    if (e.category != DataCategory::CameraControl) continue;
    const auto m = decode_control(*e.payload);
    if (m.op == ControlOp::StreamHeartbeat) {
      ++heartbeats;
      EXPECT_EQ(m.resolution, 720);
    }
  }
  EXPECT_GE(heartbeats, 4);
  EXPECT_LE(heartbeats, 10);
}

TEST(Device, PolicyUpdatesAreVersioned) {
  CloudNode cloud(quick_cloud(TopologyMode::Cloud), stand_in_classifier(), allow_everyone({DataCategory::Vitals}));
  cloud.start();
  DeviceNode device(device_to(cloud.endpoint()));
  device.connect();

  auto policy = filter::policy_from_consent(PatientId{1}, {DataCategory::KeywordEvent}, false);
  policy.version = 3;
  device.request_policy(policy);
  device.send_vital();
  device.send_frame(opaque_frame(DataCategory::KeywordEvent, encode_keyword({0, 0.9})));
  policy.version = 2;
  device.request_policy(policy);  // stale
  auto other = filter::policy_from_consent(PatientId{2}, {DataCategory::Vitals}, false);
  other.version = 9;
  device.request_policy(other);  // not this patient's record
  ASSERT_TRUE(device.wait_for_acks(5s));

  EXPECT_EQ(device.rejected_acks(), 2u);
  EXPECT_EQ(cloud.engine().policy_for(PatientId{1})->version, 3u);
  EXPECT_EQ(cloud.engine().policy_for(PatientId{2}), nullptr);
  EXPECT_EQ(cloud.store().count(DataCategory::Vitals), 0u);
  EXPECT_EQ(cloud.store().count(DataCategory::KeywordEvent), 1u);
  device.stop();
  cloud.stop();
}

// --- fog -------------------------------------------------------------------

TEST(Fog, RequiresModel) {
  FogConfig cfg;
  cfg.upstream = Endpoint{"127.0.0.1", 1};
  EXPECT_THROW(FogNode(cfg, nullptr), ConfigError);
}

TEST(Fog, KeywordEventReplacesAudioUpstream) {
  CloudNode cloud(quick_cloud(TopologyMode::Fog));
  cloud.start();
  FogConfig fcfg;
  fcfg.upstream = cloud.endpoint();
  fcfg.service_time_ms = 0;
  FogNode fog(fcfg, stand_in_classifier());  // default policy keeps raw audio local
  fog.start();
  ASSERT_TRUE(eventually([&] { return fog.upstream_connected(); }));

  DeviceNode device(device_to(fog.endpoint()));
  device.connect();
  device.camera_command(CameraCommand::CheckupStart);
  AudioClip clip;
  clip.samples.assign(16384, 1000);
  device.send_audio(clip);
  ASSERT_TRUE(device.wait_for_acks(10s));
  ASSERT_TRUE(eventually([&] { return cloud.store().count(DataCategory::KeywordEvent) == 1; }));
  device.stop();
  fog.stop();
  cloud.stop();

  const auto audio_in = fog.metrics().bytes_received_by_category[index_of(DataCategory::AudioClip)].load();
  const auto upstream = fog.metrics().bytes_sent.load();
  EXPECT_EQ(audio_in, 32768u + 4 * kFrameOverhead);
  EXPECT_LT(static_cast<double>(upstream), 0.01 * static_cast<double>(audio_in));
  EXPECT_EQ(cloud.store().count(DataCategory::AudioClip), 0u);
  for (const auto& e : cloud.store().snapshot()) {
    EXPECT_EQ(e.source, NodeRole::Fog);
    if (e.category == DataCategory::KeywordEvent) {
      EXPECT_LE(e.payload_size + kFrameOverhead, 64u);
    }
  }
}

TEST(Fog, TwoDevicesAreBothAckedWithoutCorruption) {
  CloudConfig ccfg = quick_cloud(TopologyMode::Fog);
  ccfg.link.delay_ms = 2;
  CloudNode cloud(ccfg);
  cloud.start();
  FogConfig fcfg;
  fcfg.upstream = cloud.endpoint();
  fcfg.service_time_ms = 0.5;
  fcfg.link.delay_ms = 2;
  FogNode fog(fcfg, stand_in_classifier(), allow_everyone({DataCategory::Vitals}));
  fog.start();

  std::vector<std::unique_ptr<DeviceNode>> devices;
  for (std::uint32_t p : {1u, 2u}) {
    auto d = device_to(fog.endpoint(), p);
    d.link.delay_ms = 2;
    devices.push_back(std::make_unique<DeviceNode>(d));
    devices.back()->connect();
  }
  std::vector<std::thread> senders;
  for (auto& d : devices) {
    senders.emplace_back([dev = d.get()] {
      for (int i = 0; i < 150; ++i) {
        std::vector<std::uint8_t> payload(1 + i * 37 % 3000, static_cast<std::uint8_t>(i));
        dev->send_frame(opaque_frame(DataCategory::Vitals, payload));
      }
    });
  }
  for (auto& t : senders) t.join();
  for (auto& d : devices) {
    ASSERT_TRUE(d->wait_for_acks(10s));
    EXPECT_EQ(d->metrics().rtts().size(), 150u);
    EXPECT_EQ(d->metrics().ack_mismatches.load(), 0u);
    EXPECT_EQ(d->metrics().crc_failures.load(), 0u);
    d->stop();
  }
  ASSERT_TRUE(eventually([&] { return cloud.store().count(DataCategory::Vitals) == 300; }));
  fog.stop();
  cloud.stop();
  EXPECT_EQ(fog.metrics().crc_failures.load(), 0u);
  EXPECT_EQ(fog.metrics().protocol_errors.load(), 0u);
  EXPECT_EQ(cloud.metrics().crc_failures.load(), 0u);

  std::map<std::uint32_t, int> per_patient;
  for (const auto& e : cloud.store().snapshot()) ++per_patient[e.patient.value];
  EXPECT_EQ(per_patient[1], 150);
  EXPECT_EQ(per_patient[2], 150);
}

TEST(Fog, BuffersWhileCloudIsDownAndDropsOldest) {
  std::uint16_t port;
  {
    Listener probe(Endpoint{"127.0.0.1", 0});
    port = probe.port();
  }
  FogConfig fcfg;
  fcfg.upstream = Endpoint{"127.0.0.1", port};
  fcfg.service_time_ms = 0;
  fcfg.upstream_buffer = 5;
  fcfg.reconnect_interval_ms = 20;
  FogNode fog(fcfg, stand_in_classifier(), allow_everyone({DataCategory::Vitals}));
  fog.start();

  DeviceNode device(device_to(fog.endpoint()));
  device.connect();
  for (std::uint8_t i = 0; i < 8; ++i) device.send_frame(opaque_frame(DataCategory::Vitals, {i}));
  ASSERT_TRUE(device.wait_for_acks(5s));  // acked locally although the cloud is down
  EXPECT_EQ(fog.upstream_queue_size(), 5u);
  EXPECT_EQ(fog.metrics().upstream_dropped.load(), 3u);

  CloudConfig ccfg = quick_cloud(TopologyMode::Fog);
  ccfg.listen.port = port;
  CloudNode cloud(ccfg);
  cloud.start();
  ASSERT_TRUE(eventually([&] { return cloud.store().count(DataCategory::Vitals) == 5; }));
  std::vector<std::uint8_t> kept;
  for (const auto& e : cloud.store().snapshot()) kept.push_back(e.payload->at(0));
  EXPECT_EQ(kept, (std::vector<std::uint8_t>{3, 4, 5, 6, 7}));
  device.stop();
  fog.stop();
  cloud.stop();
}

TEST(Topology, CloudOnlySeesItsAdmittedRole) {
  for (TopologyMode mode : {TopologyMode::Fog, TopologyMode::Cloud}) {
    CloudNode cloud(quick_cloud(mode), stand_in_classifier());
    cloud.start();
    std::unique_ptr<FogNode> fog;
    Endpoint entry = cloud.endpoint();
    if (mode == TopologyMode::Fog) {
      FogConfig fcfg;
      fcfg.upstream = cloud.endpoint();
      fcfg.service_time_ms = 0;
      fog = std::make_unique<FogNode>(fcfg, stand_in_classifier());
      fog->start();
      entry = fog->endpoint();
    }
    std::vector<std::unique_ptr<DeviceNode>> devices;
    for (std::uint32_t p = 1; p <= 3; ++p) {
      devices.push_back(std::make_unique<DeviceNode>(device_to(entry, p)));
      devices.back()->connect();
      for (int i = 0; i < 10; ++i) devices.back()->send_vital();
    }
    for (auto& d : devices) {
      ASSERT_TRUE(d->wait_for_acks(5s));
      d->stop();
    }
    if (fog) {
      ASSERT_TRUE(eventually([&] { return cloud.store().size() == 30; }));
      fog->stop();
    }
    cloud.stop();
    const NodeRole expected = mode == TopologyMode::Fog ? NodeRole::Fog : NodeRole::Device;
    ASSERT_EQ(cloud.store().size(), 30u) << to_string(mode);
    for (const auto& e : cloud.store().snapshot()) EXPECT_EQ(e.source, expected);
  }
}

TEST(FilterEndToEnd, ConcurrentDevicesNeverLeakAudioOrIdentity) {
  CloudNode cloud(quick_cloud(TopologyMode::Fog));
  cloud.start();
  FogConfig fcfg;
  fcfg.upstream = cloud.endpoint();
  fcfg.service_time_ms = 0;
  FogNode fog(fcfg, stand_in_classifier(), allow_everyone({DataCategory::Vitals, DataCategory::KeywordEvent}));
  fog.start();

  std::vector<std::thread> threads;
  std::vector<std::unique_ptr<DeviceNode>> devices;
  for (std::uint32_t p = 1; p <= 3; ++p) {
    auto d = device_to(fog.endpoint(), p);
    d.chunk_size = 4000;
    devices.push_back(std::make_unique<DeviceNode>(d));
    devices.back()->connect();
  }
  for (auto& d : devices) {
    threads.emplace_back([dev = d.get()] {
      dev->camera_command(CameraCommand::CheckupStart);
      AudioClip clip;
      clip.samples.assign(16000, 200);
      for (int i = 0; i < 3; ++i) {
        dev->send_vital();
        dev->send_identity({"Somebody", 3, 4});
        dev->send_audio(clip);
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& d : devices) {
    ASSERT_TRUE(d->wait_for_acks(20s));
    d->stop();
  }
  ASSERT_TRUE(eventually([&] { return cloud.store().count(DataCategory::KeywordEvent) == 9; }, 20s));
  fog.stop();
  cloud.stop();
  EXPECT_EQ(cloud.store().count(DataCategory::AudioClip), 0u);
  EXPECT_EQ(cloud.store().count(DataCategory::Identity), 0u);
  EXPECT_EQ(cloud.store().count(DataCategory::Vitals), 9u);
  EXPECT_EQ(fog.engine().drops_by_category()[index_of(DataCategory::Identity)], 9u);
}

}  // namespace
}  // namespace rpm::nodes
