#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "rpm/domain/types.hpp"

namespace rpm {

class ConfigError : public Error {
 public:
  using Error::Error;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  std::string to_string() const;
  bool operator==(const Endpoint&) const = default;
};

/// Parses "HOST:PORT". Throws ConfigError.
Endpoint parse_endpoint(std::string_view text);

enum class TopologyMode { Cloud, Fog };

std::string_view to_string(TopologyMode mode);
TopologyMode topology_from_string(std::string_view text);

/// Timing profile shared by all nodes of a topology. A message's service cost
/// at a processing node is service_time_ms + payload_bytes / processing_bytes_per_s
/// (the second term is skipped when the rate is 0). The cloud only pays that
/// cost for frames it has to process itself; frames already processed by a
/// fog cost cloud_store_time_ms.
struct TopologyConfig {
  TopologyMode mode = TopologyMode::Fog;
  std::uint32_t rooms = 1;
  std::uint32_t devices_per_room = 2;
  Endpoint cloud_address;
  std::vector<Endpoint> fog_addresses;
  double link_delay_ms = 10.0;
  double link_rate_bytes_per_s = 0.0;  // 0 = unlimited
  double cloud_service_time_ms = 5.0;
  double fog_service_time_ms = 5.0;
  double processing_bytes_per_s = 0.0;  // 0 = size-independent service
  double cloud_store_time_ms = 0.0;

  /// Throws ConfigError when an invariant is broken.
  void validate() const;
};

/// Service cost in milliseconds of one message of payload_bytes.
double service_cost_ms(double base_ms, double processing_bytes_per_s, std::size_t payload_bytes);

}  // namespace rpm
