#include "rpm/filter/policy.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "rpm/domain/payloads.hpp"

namespace rpm::filter {

std::vector<DataCategory> FilterPolicy::allowed_categories() const {
  std::vector<DataCategory> out;
  for (DataCategory c : kAllCategories) {
    if (allows(c)) out.push_back(c);
  }
  return out;
}

FilterPolicy policy_from_consent(PatientId patient, std::span<const DataCategory> allowed, bool redact) {
  FilterPolicy p;
  p.patient = patient;
  for (DataCategory c : allowed) p.allowed[index_of(c)] = true;
  p.allowed[index_of(DataCategory::Ack)] = true;
  p.redact_identity = redact;
  p.version = 1;
  return p;
}

FilterPolicy policy_from_consent(PatientId patient, std::initializer_list<DataCategory> allowed, bool redact) {
  return policy_from_consent(patient, std::span<const DataCategory>(allowed.begin(), allowed.size()), redact);
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass:
      return "pass";
    case Verdict::Drop:
      return "drop";
    case Verdict::Redact:
      return "redact";
  }
  return "?";
}

Frame redact_identity(const Frame& frame) {
  Frame out = frame;
  const std::size_t n = out.payload.size() >= kIdentityPayloadSize ? kIdentityNameBytes : out.payload.size();
  std::fill_n(out.payload.begin(), n, std::uint8_t{0});
  return out;
}

FilterDecision evaluate(const FilterPolicy& policy, const Frame& frame) {
  if (frame.patient != policy.patient) {
    throw RoutingError(fmt::format("frame for patient {} evaluated against policy of patient {}", frame.patient.value,
                                   policy.patient.value));
  }
  FilterDecision d;
  d.policy_version = policy.version;
  if (!policy.allows(frame.category)) return d;
  if (policy.redact_identity && frame.category == DataCategory::Identity) {
    d.verdict = Verdict::Redact;
    d.frame = redact_identity(frame);
  } else {
    d.verdict = Verdict::Pass;
    d.frame = frame;
  }
  return d;
}

UpdateResult PolicyEngine::update_policy(const FilterPolicy& policy) {
  std::unique_lock lock(mu_);
  auto it = policies_.find(policy.patient);
  if (it != policies_.end() && policy.version <= it->second->version) return {false, it->second->version};
  auto snapshot = std::make_shared<const FilterPolicy>(policy);
  policies_[policy.patient] = snapshot;
  return {true, policy.version};
}

FilterPolicy PolicyEngine::apply_consent(PatientId patient, std::span<const DataCategory> allowed, bool redact) {
  FilterPolicy p = policy_from_consent(patient, allowed, redact);
  std::unique_lock lock(mu_);
  if (auto it = policies_.find(patient); it != policies_.end()) p.version = it->second->version + 1;
  policies_[patient] = std::make_shared<const FilterPolicy>(p);
  return p;
}

void PolicyEngine::set_default_policy(std::optional<FilterPolicy> policy) {
  std::unique_lock lock(mu_);
  default_ = policy ? std::make_shared<const FilterPolicy>(*policy) : nullptr;
}

std::shared_ptr<const FilterPolicy> PolicyEngine::policy_for(PatientId patient) const {
  std::shared_lock lock(mu_);
  auto it = policies_.find(patient);
  return it == policies_.end() ? nullptr : it->second;
}

FilterDecision PolicyEngine::evaluate(const Frame& frame) {
  std::shared_ptr<const FilterPolicy> policy;
  {
    std::shared_lock lock(mu_);
    auto it = policies_.find(frame.patient);
    policy = it != policies_.end() ? it->second : default_;
  }
  FilterDecision d;
  if (!policy) {
    // No consent on record: only acknowledgements flow.
    if (frame.category == DataCategory::Ack) {
      d.verdict = Verdict::Pass;
      d.frame = frame;
    }
  } else if (policy->patient == frame.patient) {
    d = filter::evaluate(*policy, frame);
  } else {
    FilterPolicy adopted = *policy;
    adopted.patient = frame.patient;
    d = filter::evaluate(adopted, frame);
  }
  if (d.verdict == Verdict::Drop) drops_[index_of(frame.category)].fetch_add(1, std::memory_order_relaxed);
  return d;
}

std::array<std::uint64_t, kCategoryCount> PolicyEngine::drops_by_category() const {
  std::array<std::uint64_t, kCategoryCount> out{};
  for (std::size_t i = 0; i < kCategoryCount; ++i) out[i] = drops_[i].load(std::memory_order_relaxed);
  return out;
}

std::uint64_t PolicyEngine::total_drops() const {
  const auto d = drops_by_category();
  std::uint64_t total = 0;
  for (auto v : d) total += v;
  return total;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct Record {
  bool wildcard = false;
  FilterPolicy policy;
  std::size_t line = 0;
};

}  // namespace

PolicyFile parse_policy(std::istream& in) {
  std::vector<Record> records;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw PolicyError(fmt::format("line {}: expected key=value", line_no));
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));

    if (key == "patient") {
      Record r;
      r.line = line_no;
      r.policy.allowed[index_of(DataCategory::Ack)] = true;
      if (value == "*") {
        r.wildcard = true;
      } else {
        try {
          std::size_t used = 0;
          const unsigned long id = std::stoul(value, &used);
          if (used != value.size() || id == 0 || id > 0xFFFFFFFFul) throw std::invalid_argument(value);
          r.policy.patient = PatientId{static_cast<std::uint32_t>(id)};
        } catch (const std::exception&) {
          throw PolicyError(fmt::format("line {}: bad patient id '{}'", line_no, value));
        }
      }
      records.push_back(r);
      continue;
    }
    if (records.empty()) throw PolicyError(fmt::format("line {}: '{}' before any patient=", line_no, key));
    FilterPolicy& p = records.back().policy;
    if (key == "allowed") {
      std::stringstream items(value);
      std::string item;
      while (std::getline(items, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        const auto c = category_from_string(item);
        if (!c) throw PolicyError(fmt::format("line {}: unknown category '{}'", line_no, item));
        p.allowed[index_of(*c)] = true;
      }
    } else if (key == "redact_identity") {
      if (value == "true") {
        p.redact_identity = true;
      } else if (value == "false") {
        p.redact_identity = false;
      } else {
        throw PolicyError(fmt::format("line {}: redact_identity must be true or false", line_no));
      }
    } else if (key == "version") {
      try {
        std::size_t used = 0;
        p.version = std::stoull(value, &used);
        if (used != value.size() || p.version == 0) throw std::invalid_argument(value);
      } catch (const std::exception&) {
        throw PolicyError(fmt::format("line {}: bad version '{}'", line_no, value));
      }
    } else {
      throw PolicyError(fmt::format("line {}: unknown key '{}'", line_no, key));
    }
  }

  PolicyFile out;
  for (const Record& r : records) {
    if (r.wildcard) {
      if (out.default_policy) throw PolicyError(fmt::format("line {}: second default policy", r.line));
      out.default_policy = r.policy;
      continue;
    }
    const bool dup = std::any_of(out.policies.begin(), out.policies.end(),
                                 [&](const FilterPolicy& p) { return p.patient == r.policy.patient; });
    if (dup) throw PolicyError(fmt::format("line {}: patient {} listed twice", r.line, r.policy.patient.value));
    out.policies.push_back(r.policy);
  }
  return out;
}

PolicyFile load_policy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PolicyError(fmt::format("cannot open policy file {}", path));
  return parse_policy(in);
}

namespace {

void write_record(std::ostream& out, const FilterPolicy& p, bool wildcard) {
  out << "patient=" << (wildcard ? std::string("*") : std::to_string(p.patient.value)) << '\n';
  out << "allowed=";
  bool first = true;
  for (DataCategory c : p.allowed_categories()) {
    if (c == DataCategory::Ack) continue;
    out << (first ? "" : ",") << to_string(c);
    first = false;
  }
  out << '\n' << "redact_identity=" << (p.redact_identity ? "true" : "false") << '\n';
  out << "version=" << p.version << '\n';
}

}  // namespace

void write_policy(const PolicyFile& file, std::ostream& out) {
  if (file.default_policy) write_record(out, *file.default_policy, true);
  for (const auto& p : file.policies) write_record(out, p, false);
}

std::vector<UpdateResult> install(PolicyEngine& engine, const PolicyFile& file) {
  std::vector<UpdateResult> results;
  for (const auto& p : file.policies) results.push_back(engine.update_policy(p));
  if (file.default_policy) engine.set_default_policy(file.default_policy);
  return results;
}

std::string policy_to_text(const FilterPolicy& policy) {
  std::ostringstream out;
  write_record(out, policy, false);
  return out.str();
}

FilterPolicy policy_from_text(const std::string& text) {
  std::istringstream in(text);
  PolicyFile f = parse_policy(in);
  if (f.policies.size() != 1 || f.default_policy) throw PolicyError("policy update must hold exactly one patient");
  return f.policies.front();
}

}  // namespace rpm::filter
