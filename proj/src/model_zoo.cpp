#include "meltmap/model_zoo.hpp"

#include <algorithm>

#include "meltmap/error.hpp"

namespace meltmap {
namespace {

// Coefficients as printed in the source tables, graded-lex order, intercept first.
// length_pv
constexpr double kLengthPv[] = {
    170.3876, 0.7513, -0.5552, -0.0032, 0.0034, 5.40e-4,
    4.19e-6, -4.83e-6, 4.49e-7, -3.46e-7};

// width_pv
constexpr double kWidthPv[] = {
    14.7778, -0.0065, 0.3516, 0.0173, -0.0056, 1.94e-4,
    -9.14e-5, 3.31e-5, -4.99e-6, -1.35e-7, 1.96e-7, -1.12e-7,
    3.67e-8, -4.82e-9, 7.74e-10};

// depth_pv
constexpr double kDepthPv[] = {
    53.7694, 1.5055, -0.3504, -2.92e-4, -7.54e-4, 2.12e-4};

// area_pv
constexpr double kAreaPv[] = {
    4176.5581, 224.9810, -54.3024, -0.0011, -0.1333, 0.0353};

// volume_pv
constexpr double kVolumePv[] = {
    -1262141.6793, 21113.6671, 7.5091, 17.3061, -9.5400, -0.4026};

// spatter_pv
constexpr double kSpatterPv[] = {
    -47591.2675, -0.2616, -0.0237, -0.0944, 0.2825, 3.0756,
    0.2039, -0.1063, 0.0093, -0.0102, -0.0014, 5.58e-4,
    3.93e-5, -1.76e-5, 1.47e-5, 3.68e-6, -1.14e-6, -2.27e-7,
    6.23e-8, -2.26e-9, -8.52e-9, -3.32e-9, 1.26e-9, -2.78e-10,
    2.47e-10, -8.39e-11, 1.11e-11, 1.42e-12};

// spatter_dims
constexpr double kSpatterDims[] = {
    -73673.5843, 60.4532, 1719.4559, 424.9562, 1.6502, -23.3099,
    14.7747, 48.4069, -77.2674, 24.4086, -0.0070, 0.0752,
    -0.0317, -0.1816, 0.1530, -0.0400, 0.0515, 0.0234,
    -0.0140, -0.0023};

// spatter_logdims
constexpr double kSpatterLogdims[] = {
    -1262141.6793, -34.2697, 46.6761, 3.3128, 1832.5419, -19.5423,
    2.0622, -0.0189, 6.79e-4, 1.5434, 1.1827, 0.0032,
    0.0011, -6.1771, -0.1413, 1.73e-5, -0.3015, -0.2274,
    -347.0129, 40.4521, -26.0121};

// spatter_pvlogv
constexpr double kSpatterPvlogv[] = {
    -94877.9016, 0.0016, -0.0113, -0.0131, 0.0192, -0.0054,
    0.0023, -0.0043, -2.81e-4, -6.35e-4, 0.3343, 0.0824,
    0.0351, -0.0297, -0.0093, 1.98e-4, -0.0378, -0.0140,
    -0.0019, -1.05e-4, -0.0303, 0.7149, 0.2123, 0.0801,
    0.0937, 0.0668, -0.1631, -0.0153, -0.0357, -0.0020,
    0.0014, -0.0473, -0.0347, -0.0075, -5.44e-4, 6.57e-6,
    2.25e-4, 0.0143, -7.38e-4, -0.2463, -0.6532, 1.34e-4,
    -0.0214, 0.0456, 0.0618, -1.87e-5, 0.0427, 0.1350,
    -0.0936, -0.0160, -1.04e-6, -0.0018, -0.0172, -0.0543,
    -0.0257, -0.0026, 2.08e-9, 6.55e-9, -2.34e-6, 8.67e-9,
    -2.98e-5, -0.0020, -1.53e-8, 8.50e-5, 0.0244, 0.0579,
    5.18e-9, -1.74e-5, 0.0010, -0.0073, -0.1802, -1.17e-9,
    2.95e-6, -0.0029, 0.0018, -0.0679, -0.0785, 9.03e-11,
    1.59e-8, 2.22e-4, 0.0071, 0.0482, -0.0750, -0.0110};

constexpr double kSpatterPvDanglingConstant = -0.1273;

ZooEntry make_entry(std::string id, std::string description, Field target, const char* inputs,
                    unsigned degree, std::span<const double> coefficients, unsigned reported_degree,
                    double r2_train, double r2_test) {
  auto spec = FeatureSpec::parse(inputs);
  auto eq = SymbolicEquation::from_coefficients(std::string(field_name(target)), spec.column_names(),
                                                degree, coefficients);
  return ZooEntry{std::move(id), std::move(description), target, std::move(spec), std::move(eq),
                  reported_degree, r2_train, r2_test, {}, {}};
}

std::vector<ZooEntry> build_zoo() {
  std::vector<ZooEntry> zoo;
  zoo.push_back(make_entry("length_pv", "Average melt-pool length from power and velocity",
                           Field::length, "power,velocity", 3, kLengthPv, 3, 0.98, 0.95));
  zoo.push_back(make_entry("width_pv", "Average melt-pool width from power and velocity",
                           Field::width, "power,velocity", 4, kWidthPv, 5, 0.95, 0.95));
  zoo.back().notes.push_back(
      "reported polynomial order is 5 but the printed equation has only degree <= 4 terms; stored as degree 4");
  zoo.push_back(make_entry("depth_pv", "Average melt-pool depth from power and velocity",
                           Field::depth, "power,velocity", 2, kDepthPv, 2, 0.99, 0.99));
  zoo.push_back(make_entry("area_pv", "Average cross-sectional area from power and velocity",
                           Field::cross_section, "power,velocity", 2, kAreaPv, 2, 0.99, 0.99));
  zoo.push_back(make_entry("volume_pv", "Average melt-pool volume from power and velocity",
                           Field::volume, "power,velocity", 2, kVolumePv, 2, 0.98, 0.97));
  zoo.push_back(make_entry("spatter_pv", "Volume indicated as spatter from power and velocity",
                           Field::spatter, "power,velocity", 6, kSpatterPv, 6, 0.83, 0.75));
  zoo.back().unattributed_constants.push_back(kSpatterPvDanglingConstant);
  zoo.back().notes.push_back(
      "a second constant (-0.1273) is printed after the intercept; kept as an unattributed constant and excluded from evaluation");
  zoo.push_back(make_entry("spatter_pvlogv",
                           "Volume indicated as spatter from power, velocity and log velocity",
                           Field::spatter, "power,velocity,log_velocity", 6, kSpatterPvlogv, 6, 0.9, 0.79));
  zoo.back().notes.push_back(
      "the source caption mentions log-transformed melt-pool dimensions but the equation is in P, V and log V");
  zoo.push_back(make_entry("spatter_dims", "Volume indicated as spatter from length, width and depth",
                           Field::spatter, "length,width,depth", 3, kSpatterDims, 3, 0.8, 0.71));
  zoo.push_back(make_entry("spatter_logdims",
                           "Volume indicated as spatter from log length, width, depth, log width and log depth",
                           Field::spatter, "log_length,width,depth,log_width,log_depth", 2,
                           kSpatterLogdims, 2, 0.85, 0.82));
  zoo.back().notes.push_back(
      "the intercept (-1262141.6793) duplicates the melt-pool volume intercept verbatim; stored as printed");
  return zoo;
}

bool uses_dimensions(const ZooEntry& entry) {
  return std::any_of(entry.input_set.entries().begin(), entry.input_set.entries().end(),
                     [](const FeatureEntry& e) {
                       return e.field == Field::length || e.field == Field::width || e.field == Field::depth;
                     });
}

}  // namespace

const std::vector<ZooEntry>& list_models() {
  static const std::vector<ZooEntry> zoo = build_zoo();
  return zoo;
}

std::vector<std::string> model_ids() {
  std::vector<std::string> ids;
  for (const auto& e : list_models()) ids.push_back(e.id);
  return ids;
}

const ZooEntry& find_model(std::string_view id) {
  for (const auto& e : list_models()) {
    if (e.id == id) return e;
  }
  std::string valid;
  for (const auto& e : list_models()) valid += (valid.empty() ? "" : ", ") + e.id;
  fail(ErrorCode::not_found, "unknown model '" + std::string(id) + "'; valid ids: " + valid);
}

namespace {

// Largest length, width and depth the process-condition equations reach over
// the calibration envelope, sampled on a 65 x 65 grid.
const std::map<Field, double>& dimension_maxima() {
  static const auto maxima = [] {
    std::map<Field, double> out{{Field::length, 0.0}, {Field::width, 0.0}, {Field::depth, 0.0}};
    const auto& env = kCalibrationEnvelope;
    for (int i = 0; i <= 64; ++i) {
      for (int j = 0; j <= 64; ++j) {
        const double p = env.power_min + (env.power_max - env.power_min) * i / 64.0;
        const double v = env.velocity_min + (env.velocity_max - env.velocity_min) * j / 64.0;
        const std::map<Field, double> pv{{Field::power, p}, {Field::velocity, v}};
        for (auto& [field, best] : out) {
          const char* id = field == Field::length ? "length_pv" : field == Field::width ? "width_pv" : "depth_pv";
          best = std::max(best, evaluate_from_fields(find_model(id).equation, pv));
        }
      }
    }
    return out;
  }();
  return maxima;
}

}  // namespace

bool dimensions_in_envelope(const std::map<Field, double>& values) {
  for (const auto& [field, max] : dimension_maxima()) {
    const auto it = values.find(field);
    if (it != values.end() && !(it->second > 0.0 && it->second <= max)) return false;
  }
  return true;
}

ZooPrediction predict_entry(const ZooEntry& entry, const std::map<Field, double>& values) {
  ZooPrediction out;
  out.value = evaluate_from_fields(entry.equation, values);
  const auto p = values.find(Field::power);
  const auto v = values.find(Field::velocity);
  if (p != values.end() && v != values.end()) {
    out.out_of_envelope = !kCalibrationEnvelope.contains(p->second, v->second);
  } else {
    out.out_of_envelope = !dimensions_in_envelope(values);
  }
  out.non_physical = out.value < 0.0;
  return out;
}

ZooPrediction predict_spatter(std::string_view id, const std::map<Field, double>& values) {
  const auto& entry = find_model(id);
  if (entry.target != Field::spatter) {
    fail(ErrorCode::contract_violation, "model '" + entry.id + "' does not predict spatter");
  }
  return predict_entry(entry, values);
}

MeltPoolPrediction predict_melt_pool(double power, double velocity) {
  if (!(power > 0.0) || !(velocity > 0.0)) {
    fail(ErrorCode::contract_violation, "predict_melt_pool: power and velocity must be > 0");
  }
  const std::map<Field, double> pv{{Field::power, power}, {Field::velocity, velocity}};
  MeltPoolPrediction out;
  out.length = evaluate_from_fields(find_model("length_pv").equation, pv);
  out.width = evaluate_from_fields(find_model("width_pv").equation, pv);
  out.depth = evaluate_from_fields(find_model("depth_pv").equation, pv);
  out.cross_section = evaluate_from_fields(find_model("area_pv").equation, pv);
  out.volume = evaluate_from_fields(find_model("volume_pv").equation, pv);
  out.out_of_envelope = !kCalibrationEnvelope.contains(power, velocity);
  out.has_negative = out.length < 0.0 || out.width < 0.0 || out.depth < 0.0 ||
                     out.cross_section < 0.0 || out.volume < 0.0;
  return out;
}

ZooPrediction predict_at_process_condition(const ZooEntry& entry, double power, double velocity) {
  if (!(power > 0.0) || !(velocity > 0.0)) {
    fail(ErrorCode::contract_violation, "power and velocity must be > 0");
  }
  std::map<Field, double> values{{Field::power, power}, {Field::velocity, velocity}};
  if (uses_dimensions(entry)) {
    const auto mp = predict_melt_pool(power, velocity);
    values[Field::length] = mp.length;
    values[Field::width] = mp.width;
    values[Field::depth] = mp.depth;
  }
  return predict_entry(entry, values);
}

}  // namespace meltmap
