#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <vector>

#include "rpm/domain/types.hpp"

namespace rpm::filter {

/// Frame evaluated against another patient's policy.
class RoutingError : public Error {
 public:
  using Error::Error;
};

class PolicyError : public Error {
 public:
  using Error::Error;
};

/// Consent record for one patient. Ack is always allowed.
struct FilterPolicy {
  PatientId patient;
  std::array<bool, kCategoryCount> allowed{};
  bool redact_identity = false;
  std::uint64_t version = 1;

  bool allows(DataCategory c) const { return c == DataCategory::Ack || allowed[index_of(c)]; }
  std::vector<DataCategory> allowed_categories() const;

  bool operator==(const FilterPolicy&) const = default;
};

/// Version-1 policy allowing exactly `allowed` plus Ack.
FilterPolicy policy_from_consent(PatientId patient, std::span<const DataCategory> allowed, bool redact_identity);
FilterPolicy policy_from_consent(PatientId patient, std::initializer_list<DataCategory> allowed,
                                 bool redact_identity);

enum class Verdict { Pass, Drop, Redact };

std::string_view to_string(Verdict v);

struct FilterDecision {
  Verdict verdict = Verdict::Drop;
  Frame frame;  // what to forward: the input on Pass, the redacted copy on Redact, empty on Drop
  std::uint64_t policy_version = 0;
};

/// Byte range of the patient name inside an Identity payload.
inline constexpr std::size_t kIdentityNameBytes = 32;

/// Pure decision for one frame. Throws RoutingError when the frame belongs to
/// a different patient than the policy.
FilterDecision evaluate(const FilterPolicy& policy, const Frame& frame);

/// Copy of an Identity frame with the name field zeroed. A payload too short
/// to hold a full record is zeroed entirely.
Frame redact_identity(const Frame& frame);

struct UpdateResult {
  bool accepted = false;
  std::uint64_t current_version = 0;
};

/// Holds the live policy set. Readers take an immutable snapshot under a
/// shared lock, so an evaluation always sees one complete policy version.
class PolicyEngine {
 public:
  /// Accepts the policy when its version exceeds the installed one for that
  /// patient (any version is accepted for a new patient).
  UpdateResult update_policy(const FilterPolicy& policy);

  /// Installs a consent record as the next version for the patient.
  FilterPolicy apply_consent(PatientId patient, std::span<const DataCategory> allowed, bool redact_identity);

  /// Policy used for patients without their own record. Without one, frames
  /// from unknown patients are dropped.
  void set_default_policy(std::optional<FilterPolicy> policy);

  std::shared_ptr<const FilterPolicy> policy_for(PatientId patient) const;

  /// Evaluates against the patient's current policy and counts drops.
  FilterDecision evaluate(const Frame& frame);

  std::array<std::uint64_t, kCategoryCount> drops_by_category() const;
  std::uint64_t total_drops() const;

 private:
  mutable std::shared_mutex mu_;
  std::map<PatientId, std::shared_ptr<const FilterPolicy>> policies_;
  std::shared_ptr<const FilterPolicy> default_;
  std::array<std::atomic<std::uint64_t>, kCategoryCount> drops_{};
};

struct PolicyFile {
  std::vector<FilterPolicy> policies;
  std::optional<FilterPolicy> default_policy;
};

/// key=value lines; every `patient=` line opens a new record and `patient=*`
/// opens the default record. Keys: patient, allowed (comma-separated category
/// names), redact_identity (true/false), version. '#' starts a comment.
PolicyFile parse_policy(std::istream& in);
PolicyFile load_policy_file(const std::string& path);
void write_policy(const PolicyFile& file, std::ostream& out);

/// Applies every record through update_policy (so stale versions are rejected)
/// and sets the default policy when the file has one.
std::vector<UpdateResult> install(PolicyEngine& engine, const PolicyFile& file);

/// Policy text for the PolicyUpdate control message (one record, same syntax).
std::string policy_to_text(const FilterPolicy& policy);
FilterPolicy policy_from_text(const std::string& text);

}  // namespace rpm::filter
