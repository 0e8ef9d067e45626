#include "rpm/domain/topology.hpp"

#include <charconv>

#include <fmt/format.h>

namespace rpm {

std::string Endpoint::to_string() const { return fmt::format("{}:{}", host, port); }

Endpoint parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0) {
    throw ConfigError(fmt::format("endpoint '{}' is not HOST:PORT", text));
  }
  const auto port_text = text.substr(colon + 1);
  unsigned port = 0;
  const auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port > 65535) {
    throw ConfigError(fmt::format("bad port in endpoint '{}'", text));
  }
  return Endpoint{std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

std::string_view to_string(TopologyMode mode) { return mode == TopologyMode::Cloud ? "cloud" : "fog"; }

TopologyMode topology_from_string(std::string_view text) {
  if (text == "cloud") return TopologyMode::Cloud;
  if (text == "fog") return TopologyMode::Fog;
  throw ConfigError(fmt::format("unknown topology '{}'", text));
}

void TopologyConfig::validate() const {
  if (rooms < 1) throw ConfigError("rooms must be at least 1");
  if (devices_per_room < 1) throw ConfigError("devices_per_room must be at least 1");
  if (link_delay_ms < 0 || cloud_service_time_ms < 0 || fog_service_time_ms < 0 || cloud_store_time_ms < 0) {
    throw ConfigError("delays and service times must be non-negative");
  }
  if (link_rate_bytes_per_s < 0 || processing_bytes_per_s < 0) throw ConfigError("rates must be non-negative");
}

double service_cost_ms(double base_ms, double processing_bytes_per_s, std::size_t payload_bytes) {
  double cost = base_ms;
  if (processing_bytes_per_s > 0) cost += 1000.0 * static_cast<double>(payload_bytes) / processing_bytes_per_s;
  return cost;
}

}  // namespace rpm
