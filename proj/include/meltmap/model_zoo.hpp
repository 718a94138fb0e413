#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "meltmap/dataset.hpp"
#include "meltmap/polyfit.hpp"

namespace meltmap {

/// A published constitutive equation with the fit quality reported for it.
struct ZooEntry {
  std::string id;
  std::string description;
  Field target;
  FeatureSpec input_set;
  SymbolicEquation equation;
  unsigned reported_degree = 0;
  double reported_r2_train = 0.0;
  double reported_r2_test = 0.0;
  // Constants printed alongside the intercept without a monomial; kept for
  // fidelity checks, not added into predictions.
  std::vector<double> unattributed_constants;
  std::vector<std::string> notes;
};

// The process-condition region the published equations were fitted over.
struct Envelope {
  double power_min = 50.0;
  double power_max = 500.0;
  double velocity_min = 100.0;
  double velocity_max = 2000.0;

  bool contains(double power, double velocity) const {
    return power >= power_min && power <= power_max && velocity >= velocity_min &&
           velocity <= velocity_max;
  }
};

inline constexpr Envelope kCalibrationEnvelope{};

const std::vector<ZooEntry>& list_models();
// Throws not_found listing the valid ids.
const ZooEntry& find_model(std::string_view id);
std::vector<std::string> model_ids();

struct MeltPoolPrediction {
  double length = 0.0;
  double width = 0.0;
  double depth = 0.0;
  double cross_section = 0.0;
  double volume = 0.0;
  bool out_of_envelope = false;
  bool has_negative = false;
};

MeltPoolPrediction predict_melt_pool(double power, double velocity);

struct ZooPrediction {
  double value = 0.0;
  bool out_of_envelope = false;  // process condition outside the calibration envelope
  bool non_physical = false;     // negative volume, length or area
};

// Melt-pool dimensions count as calibrated when each supplied length, width and
// depth is positive and no larger than the process-condition equations reach
// over the calibration envelope.
bool dimensions_in_envelope(const std::map<Field, double>& values);

// Evaluates an entry from raw field values; log transforms are applied here.
ZooPrediction predict_spatter(std::string_view id, const std::map<Field, double>& values);
ZooPrediction predict_entry(const ZooEntry& entry, const std::map<Field, double>& values);

// Evaluates any entry at a process condition. Entries driven by melt-pool
// dimensions take length, width and depth from the process-condition equations.
ZooPrediction predict_at_process_condition(const ZooEntry& entry, double power, double velocity);

}  // namespace meltmap
