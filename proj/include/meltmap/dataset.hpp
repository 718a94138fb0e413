#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "meltmap/numerics.hpp"

namespace meltmap {

enum class Field { power, velocity, length, width, depth, cross_section, volume, spatter };

inline constexpr std::array<Field, 8> kAllFields = {
    Field::power, Field::velocity, Field::length,  Field::width,
    Field::depth, Field::cross_section, Field::volume, Field::spatter};

// Lower-case identifier ("power", "cross_section", ...).
std::string_view field_name(Field field);
// Header used in dataset CSV files ("power_W", ...).
std::string_view csv_column(Field field);
// Display name used in design-matrix column names ("Power", ...).
std::string_view display_name(Field field);
std::string_view unit(Field field);

// Accepts the identifier, the display name or the CSV header, case-insensitively.
std::optional<Field> parse_field(std::string_view text);
Field parse_field_or_throw(std::string_view text);

/// One simulated single-track experiment at a fixed process condition.
struct ProcessMapRecord {
  double power = 0.0;          // W
  double velocity = 0.0;       // mm/s
  double length = 0.0;         // um
  double width = 0.0;          // um
  double depth = 0.0;          // um
  double cross_section = 0.0;  // um^2
  double volume = 0.0;         // um^3
  double spatter = 0.0;        // um^3

  double get(Field field) const;
  void set(Field field, double value);

  friend bool operator==(const ProcessMapRecord&, const ProcessMapRecord&) = default;
};

// Synthetic records are evaluated polynomials and may dip below zero where the
// generating equation does; measured records may not.
enum class RecordPolicy { measured, synthetic };

// Throws validation_error describing the first violated invariant.
void validate_record(const ProcessMapRecord& record, RecordPolicy policy = RecordPolicy::measured);

// Provenance tags starting with "synthetic" select the synthetic policy.
RecordPolicy policy_for(std::string_view provenance);

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::vector<ProcessMapRecord> records, std::string provenance);

  RecordPolicy policy() const noexcept { return policy_for(provenance_); }

  const std::vector<ProcessMapRecord>& records() const noexcept { return records_; }
  const std::string& provenance() const noexcept { return provenance_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  std::vector<double> column(Field field) const;
  Dataset subset(std::span<const std::size_t> indices, std::string provenance) const;

 private:
  std::vector<ProcessMapRecord> records_;
  std::string provenance_;
};

double velocity_magnitude(double vx, double vy, double vz);

Dataset load_csv(const std::filesystem::path& path);
Dataset parse_csv(std::istream& in, const std::string& source_name = "<stream>");
void write_csv(const Dataset& dataset, std::ostream& out);
void write_csv(const Dataset& dataset, const std::filesystem::path& path);

inline constexpr double kDefaultTestFraction = 0.2;
inline constexpr std::uint64_t kDefaultSeed = 42;

// Returns (train, test); test size is round(test_fraction * n) clamped to [1, n - 1].
std::pair<Dataset, Dataset> train_test_split(const Dataset& dataset,
                                             double test_fraction = kDefaultTestFraction,
                                             std::uint64_t seed = kDefaultSeed);

// Index form of the split, shared by every consumer that needs aligned rows.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double test_fraction, std::uint64_t seed);

enum class Transform { identity, natural_log };

struct FeatureEntry {
  Field field = Field::power;
  Transform transform = Transform::identity;

  std::string column_name() const;
  double apply(double raw) const;

  friend bool operator==(const FeatureEntry&, const FeatureEntry&) = default;
};

// Parses "power", "Velocity", "log_velocity", "log_Length", ...
FeatureEntry parse_feature_entry(std::string_view text);

class FeatureSpec {
 public:
  explicit FeatureSpec(std::vector<FeatureEntry> entries);

  // Comma-separated list of entries, e.g. "power,velocity,log_velocity".
  static FeatureSpec parse(std::string_view text);
  static FeatureSpec process_conditions();

  const std::vector<FeatureEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::vector<std::string> column_names() const;
  std::string to_string() const;

  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;

 private:
  std::vector<FeatureEntry> entries_;
};

struct Design {
  DenseMatrix matrix;
  std::vector<std::string> names;
};

Design build_design(const Dataset& dataset, const FeatureSpec& spec);

}  // namespace meltmap
