#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "meltmap/dataset.hpp"
#include "meltmap/ensembles.hpp"
#include "meltmap/model_zoo.hpp"
#include "meltmap/polyfit.hpp"

namespace meltmap::service {

using nlohmann::json;

// Zoo entries plus equations published at runtime. Published equations are
// immutable once visible; publication swaps in a fully built object.
class ModelRegistry {
 public:
  std::shared_ptr<const SymbolicEquation> find(std::string_view id) const;
  bool contains(std::string_view id) const;
  std::string publish(SymbolicEquation equation);
  void publish_as(const std::string& id, SymbolicEquation equation);
  std::vector<std::string> published_ids() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const SymbolicEquation>, std::less<>> published_;
  std::uint64_t next_id_ = 1;
};

struct ModelSource {
  std::string id;                           // zoo or published id
  std::optional<SymbolicEquation> equation;  // inline equation, used when set
};

struct PredictionResult {
  std::string model;
  std::string target;
  double value = 0.0;
  bool out_of_envelope = false;
  bool non_physical = false;
  bool chained = false;  // melt-pool dimensions came from the process-condition equations
};

// Inputs are raw fields; equations over melt-pool dimensions may be driven by
// power and velocity alone, in which case dimensions are predicted first.
PredictionResult predict(const ModelRegistry& registry, const ModelSource& source,
                         const std::map<Field, double>& inputs);

struct AxisSpec {
  double min = 0.0;
  double max = 0.0;
  std::size_t steps = 0;
};

inline constexpr std::size_t kMaxSweepSteps = 512;

struct SweepRequest {
  AxisSpec power{kCalibrationEnvelope.power_min, kCalibrationEnvelope.power_max, 64};
  AxisSpec velocity{kCalibrationEnvelope.velocity_min, kCalibrationEnvelope.velocity_max, 64};
  std::vector<std::string> models;
  std::optional<SymbolicEquation> equation;  // reported under the output name "equation"
};

std::vector<std::string> default_sweep_models();

// Cells are velocity-major: cell (iv, ip) sits at index iv * |power_axis| + ip.
struct SweepGrid {
  std::vector<double> power_axis;
  std::vector<double> velocity_axis;
  std::vector<std::string> outputs;
  std::vector<std::string> targets;
  std::vector<std::vector<double>> values;  // [output][cell]; NaN where undefined
  std::vector<bool> out_of_envelope;        // [cell]
};

SweepGrid run_sweep(const ModelRegistry& registry, const SweepRequest& request);

struct FitRequest {
  std::string inputs = "power,velocity";
  Field target = Field::depth;
  std::optional<unsigned> degree;  // empty selects among 2..6
  double test_fraction = kDefaultTestFraction;
  std::uint64_t seed = kDefaultSeed;
};

struct FitOutcome {
  SymbolicEquation equation;
  EvalReport report;
  std::vector<DegreeReport> degree_reports;
};

FitOutcome run_fit(const Dataset& dataset, const FitRequest& request);

struct TrainRequest {
  std::string inputs = "power,velocity";
  Field target = Field::depth;
  EnsembleConfig config;
  double test_fraction = kDefaultTestFraction;
  std::uint64_t split_seed = kDefaultSeed;
};

struct TrainOutcome {
  FittedModel model;
  EvalReport report;
};

TrainOutcome run_train(const Dataset& dataset, const TrainRequest& request);

json to_json(const PredictionResult& result);
json to_json(const SweepGrid& grid);
json to_json(const EvalReport& report);
json to_json(const ImportanceReport& report);
json to_json(const CorrelationMatrix& matrix);
json to_json(const FitOutcome& outcome);
json zoo_entry_json(const ZooEntry& entry);
json models_json(const ModelRegistry& registry);

SweepRequest sweep_request_from_json(const json& j);
std::map<Field, double> inputs_from_json(const json& j);

// Compact dump with keys in sorted order; identical values give identical bytes.
std::string canonical(const json& j);

}  // namespace meltmap::service
