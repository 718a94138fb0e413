#include "meltmap/service.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

#include "meltmap/equation_json.hpp"
#include "meltmap/error.hpp"

namespace meltmap::service {
namespace {

bool needs_dimensions(const FeatureSpec& spec) {
  return std::any_of(spec.entries().begin(), spec.entries().end(), [](const FeatureEntry& e) {
    return e.field == Field::length || e.field == Field::width || e.field == Field::depth;
  });
}

std::vector<double> linspace(const AxisSpec& axis, const char* name) {
  if (axis.steps > kMaxSweepSteps) {
    fail(ErrorCode::too_large, std::string(name) + " axis: at most " + std::to_string(kMaxSweepSteps) +
                                   " steps allowed, got " + std::to_string(axis.steps));
  }
  if (axis.steps < 2) fail(ErrorCode::contract_violation, std::string(name) + " axis: need at least 2 steps");
  if (!std::isfinite(axis.min) || !std::isfinite(axis.max) || !(axis.min < axis.max)) {
    fail(ErrorCode::contract_violation, std::string(name) + " axis: require min < max");
  }
  if (!(axis.min > 0.0)) fail(ErrorCode::contract_violation, std::string(name) + " axis: values must be > 0");
  std::vector<double> out(axis.steps);
  const double span = axis.max - axis.min;
  for (std::size_t i = 0; i < axis.steps; ++i) {
    out[i] = axis.min + span * static_cast<double>(i) / static_cast<double>(axis.steps - 1);
  }
  out.back() = axis.max;
  return out;
}

// Equation plus its parsed input spec, so sweeps parse feature names once.
struct PreparedModel {
  std::string name;
  std::shared_ptr<const SymbolicEquation> equation;
  FeatureSpec spec;
  bool dims;
};

PreparedModel prepare(std::string name, std::shared_ptr<const SymbolicEquation> eq) {
  auto spec = feature_spec_of(*eq);
  const bool dims = needs_dimensions(spec);
  return {std::move(name), std::move(eq), std::move(spec), dims};
}

double evaluate_prepared(const PreparedModel& m, const std::map<Field, double>& fields) {
  std::vector<double> x;
  x.reserve(m.spec.size());
  for (const auto& entry : m.spec.entries()) {
    const auto it = fields.find(entry.field);
    if (it == fields.end()) {
      fail(ErrorCode::contract_violation, "missing input '" + std::string(field_name(entry.field)) +
                                              "' for model " + m.name);
    }
    x.push_back(entry.apply(it->second));
  }
  return m.equation->evaluate(x);
}

void add_dimensions(std::map<Field, double>& fields, const MeltPoolPrediction& mp) {
  fields[Field::length] = mp.length;
  fields[Field::width] = mp.width;
  fields[Field::depth] = mp.depth;
}

}  // namespace

std::shared_ptr<const SymbolicEquation> ModelRegistry::find(std::string_view id) const {
  for (const auto& e : list_models()) {
    if (e.id == id) return {std::shared_ptr<const void>{}, &e.equation};
  }
  {
    std::shared_lock lock(mutex_);
    if (const auto it = published_.find(id); it != published_.end()) return it->second;
  }
  std::string valid;
  for (const auto& v : model_ids()) valid += (valid.empty() ? "" : ", ") + v;
  for (const auto& v : published_ids()) valid += ", " + v;
  fail(ErrorCode::not_found, "unknown model '" + std::string(id) + "'; valid ids: " + valid);
}

bool ModelRegistry::contains(std::string_view id) const {
  const auto ids = model_ids();
  if (std::find(ids.begin(), ids.end(), id) != ids.end()) return true;
  std::shared_lock lock(mutex_);
  return published_.find(id) != published_.end();
}

std::string ModelRegistry::publish(SymbolicEquation equation) {
  auto ptr = std::make_shared<const SymbolicEquation>(std::move(equation));
  std::unique_lock lock(mutex_);
  const auto id = "fit-" + std::to_string(next_id_++);
  published_.emplace(id, std::move(ptr));
  return id;
}

void ModelRegistry::publish_as(const std::string& id, SymbolicEquation equation) {
  for (const auto& e : list_models()) {
    if (e.id == id) fail(ErrorCode::contract_violation, "id '" + id + "' is reserved by the model zoo");
  }
  auto ptr = std::make_shared<const SymbolicEquation>(std::move(equation));
  std::unique_lock lock(mutex_);
  published_[id] = std::move(ptr);
}

std::vector<std::string> ModelRegistry::published_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, eq] : published_) ids.push_back(id);
  return ids;
}

PredictionResult predict(const ModelRegistry& registry, const ModelSource& source,
                         const std::map<Field, double>& inputs) {
  std::shared_ptr<const SymbolicEquation> eq;
  std::string name = source.id;
  if (source.equation) {
    eq = std::make_shared<const SymbolicEquation>(*source.equation);
    if (name.empty()) name = "equation";
  } else {
    eq = registry.find(source.id);
  }
  const auto model = prepare(name, eq);

  PredictionResult out;
  out.model = name;
  out.target = eq->target();
  auto fields = inputs;
  const auto p = inputs.find(Field::power);
  const auto v = inputs.find(Field::velocity);
  const bool have_pv = p != inputs.end() && v != inputs.end();
  if (model.dims && have_pv &&
      (!inputs.contains(Field::length) || !inputs.contains(Field::width) || !inputs.contains(Field::depth))) {
    add_dimensions(fields, predict_melt_pool(p->second, v->second));
    out.chained = true;
  }
  out.value = evaluate_prepared(model, fields);
  out.out_of_envelope = have_pv && !kCalibrationEnvelope.contains(p->second, v->second);
  out.non_physical = out.value < 0.0;
  return out;
}

std::vector<std::string> default_sweep_models() {
  return {"length_pv", "width_pv", "depth_pv", "area_pv", "volume_pv", "spatter_pv"};
}

SweepGrid run_sweep(const ModelRegistry& registry, const SweepRequest& request) {
  SweepGrid grid;
  grid.power_axis = linspace(request.power, "power");
  grid.velocity_axis = linspace(request.velocity, "velocity");

  std::vector<PreparedModel> models;
  auto ids = request.models;
  if (ids.empty() && !request.equation) ids = default_sweep_models();
  for (const auto& id : ids) models.push_back(prepare(id, registry.find(id)));
  if (request.equation) {
    models.push_back(prepare("equation", std::make_shared<const SymbolicEquation>(*request.equation)));
  }
  const bool any_dims = std::any_of(models.begin(), models.end(), [](const auto& m) { return m.dims; });

  const auto cells = grid.power_axis.size() * grid.velocity_axis.size();
  for (const auto& m : models) {
    grid.outputs.push_back(m.name);
    grid.targets.push_back(m.equation->target());
  }
  grid.values.assign(models.size(), std::vector<double>(cells));
  grid.out_of_envelope.resize(cells);

  std::size_t cell = 0;
  for (double velocity : grid.velocity_axis) {
    for (double power : grid.power_axis) {
      std::map<Field, double> fields{{Field::power, power}, {Field::velocity, velocity}};
      if (any_dims) add_dimensions(fields, predict_melt_pool(power, velocity));
      grid.out_of_envelope[cell] = !kCalibrationEnvelope.contains(power, velocity);
      for (std::size_t k = 0; k < models.size(); ++k) {
        try {
          grid.values[k][cell] = evaluate_prepared(models[k], fields);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::domain_error) throw;
          grid.values[k][cell] = std::numeric_limits<double>::quiet_NaN();
        }
      }
      ++cell;
    }
  }
  return grid;
}

FitOutcome run_fit(const Dataset& dataset, const FitRequest& request) {
  const auto spec = FeatureSpec::parse(request.inputs);
  std::vector<unsigned> degrees;
  if (request.degree) {
    degrees.push_back(*request.degree);
  } else {
    degrees = {2, 3, 4, 5, 6};
  }
  auto selection = select_degree(dataset, spec, request.target, degrees, request.test_fraction, request.seed);
  EvalReport report;
  for (const auto& r : selection.reports) {
    if (r.degree == selection.chosen_degree) report = r.report;
  }
  return {std::move(selection.equation), report, std::move(selection.reports)};
}

TrainOutcome run_train(const Dataset& dataset, const TrainRequest& request) {
  const auto spec = FeatureSpec::parse(request.inputs);
  const auto design = build_design(dataset, spec);
  const auto y = dataset.column(request.target);
  const auto [train_idx, test_idx] = split_indices(dataset.size(), request.test_fraction, request.split_seed);
  const auto x_train = design.matrix.select_rows(train_idx);
  const auto x_test = design.matrix.select_rows(test_idx);
  std::vector<double> y_train, y_test;
  for (auto i : train_idx) y_train.push_back(y[i]);
  for (auto i : test_idx) y_test.push_back(y[i]);

  auto model = fit_ensemble(x_train, y_train, request.config);
  model.feature_names = design.names;
  model.target = std::string(field_name(request.target));
  const auto report = evaluate_model(model, x_train, y_train, x_test, y_test);
  return {std::move(model), report};
}

json to_json(const PredictionResult& r) {
  return {{"model", r.model},
          {"target", r.target},
          {"value", r.value},
          {"unit", std::string(unit(parse_field(r.target).value_or(Field::spatter)))},
          {"out_of_envelope", r.out_of_envelope},
          {"non_physical", r.non_physical},
          {"chained", r.chained}};
}

json to_json(const SweepGrid& grid) {
  json cells = json::array();
  std::size_t cell = 0;
  for (double velocity : grid.velocity_axis) {
    for (double power : grid.power_axis) {
      json values = json::object();
      for (std::size_t k = 0; k < grid.outputs.size(); ++k) values[grid.outputs[k]] = grid.values[k][cell];
      cells.push_back({{"power", power},
                       {"velocity", velocity},
                       {"values", std::move(values)},
                       {"out_of_envelope", static_cast<bool>(grid.out_of_envelope[cell])}});
      ++cell;
    }
  }
  json targets = json::object();
  for (std::size_t k = 0; k < grid.outputs.size(); ++k) targets[grid.outputs[k]] = grid.targets[k];
  return {{"power_axis", grid.power_axis},
          {"velocity_axis", grid.velocity_axis},
          {"order", "velocity_major"},
          {"outputs", grid.outputs},
          {"targets", std::move(targets)},
          {"cells", std::move(cells)}};
}

json to_json(const EvalReport& r) {
  return {{"r2_train", r.r2_train}, {"r2_test", r.r2_test}, {"mae_train", r.mae_train}, {"mae_test", r.mae_test}};
}

json to_json(const ImportanceReport& report) {
  json entries = json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"term", e.label},
                       {"exponents", e.exponents},
                       {"abs_coefficient", e.abs_coefficient},
                       {"percentage", e.percentage}});
  }
  return {{"importance", std::move(entries)}};
}

json to_json(const CorrelationMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.values.rows(); ++i) {
    const auto row = m.values.row(i);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"names", m.names}, {"matrix", std::move(rows)}};
}

json to_json(const FitOutcome& outcome) {
  json degrees = json::array();
  for (const auto& d : outcome.degree_reports) {
    auto r = to_json(d.report);
    r["degree"] = d.degree;
    r["rank_deficient"] = d.rank_deficient;
    degrees.push_back(std::move(r));
  }
  return {{"equation", equation_to_json(outcome.equation)},
          {"text", equation_to_string(outcome.equation)},
          {"report", to_json(outcome.report)},
          {"degrees", std::move(degrees)}};
}

json zoo_entry_json(const ZooEntry& e) {
  return {{"id", e.id},
          {"description", e.description},
          {"target", std::string(field_name(e.target))},
          {"unit", std::string(unit(e.target))},
          {"inputs", e.input_set.column_names()},
          {"degree", e.equation.degree()},
          {"reported_degree", e.reported_degree},
          {"reported_r2_train", e.reported_r2_train},
          {"reported_r2_test", e.reported_r2_test},
          {"text", equation_to_string(e.equation, {4, CoefficientStyle::tabulated, false})},
          {"notes", e.notes}};
}

json models_json(const ModelRegistry& registry) {
  json models = json::array();
  for (const auto& e : list_models()) models.push_back(zoo_entry_json(e));
  return {{"models", std::move(models)},
          {"published", registry.published_ids()},
          {"envelope",
           {{"power_min", kCalibrationEnvelope.power_min},
            {"power_max", kCalibrationEnvelope.power_max},
            {"velocity_min", kCalibrationEnvelope.velocity_min},
            {"velocity_max", kCalibrationEnvelope.velocity_max}}}};
}

std::map<Field, double> inputs_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::validation_error, "inputs must be an object of field -> number");
  std::map<Field, double> out;
  for (const auto& [key, value] : j.items()) {
    const auto field = parse_field(key);
    if (!field) fail(ErrorCode::validation_error, "unknown input field '" + key + "'");
    if (!value.is_number()) fail(ErrorCode::validation_error, "input '" + key + "' is not a number");
    const double v = value.get<double>();
    if (!std::isfinite(v)) fail(ErrorCode::validation_error, "input '" + key + "' is not finite");
    out[*field] = v;
  }
  return out;
}

SweepRequest sweep_request_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::validation_error, "sweep request must be an object");
  SweepRequest req;
  try {
    const auto resolution = j.value("resolution", std::size_t{64});
    auto axis = [&](const char* key, AxisSpec fallback) {
      AxisSpec a = fallback;
      a.steps = resolution;
      if (j.contains(key)) {
        const auto& aj = j.at(key);
        a.min = aj.value("min", a.min);
        a.max = aj.value("max", a.max);
        a.steps = aj.value("steps", a.steps);
      }
      return a;
    };
    req.power = axis("power", req.power);
    req.velocity = axis("velocity", req.velocity);
    req.models = j.value("models", std::vector<std::string>{});
    if (j.contains("equation") && !j.at("equation").is_null()) req.equation = equation_from_json(j.at("equation"));
  } catch (const json::exception& e) {
    fail(ErrorCode::validation_error, std::string("sweep request: ") + e.what());
  }
  return req;
}

std::string canonical(const json& j) { return j.dump(); }

}  // namespace meltmap::service
