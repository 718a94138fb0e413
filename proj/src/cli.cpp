#include "meltmap/cli.hpp"

#include <csignal>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>

#include <CLI11.hpp>

#include "meltmap/equation_json.hpp"
#include "meltmap/error.hpp"
#include "meltmap/http_server.hpp"
#include "meltmap/service.hpp"
#include "meltmap/synthetic.hpp"

namespace meltmap {
namespace {

using service::json;

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void print_report(std::ostream& out, const EvalReport& r) {
  out << "R2 train: " << fixed6(r.r2_train) << "\n"
      << "R2 test:  " << fixed6(r.r2_test) << "\n"
      << "MAE train: " << fixed6(r.mae_train) << "\n"
      << "MAE test:  " << fixed6(r.mae_test) << "\n";
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) fail(ErrorCode::io_error, "cannot write " + path.string());
  f << text;
  if (!f) fail(ErrorCode::io_error, "write failed: " + path.string());
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorCode::io_error, "cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    fail(ErrorCode::parse_error, path.string() + ": " + e.what());
  }
}

service::HttpServer* g_server = nullptr;

extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

struct FitArgs {
  std::string csv, inputs = "power,velocity", target = "depth", degree = "auto", out;
  double split = kDefaultTestFraction;
  std::uint64_t seed = kDefaultSeed;
};

struct PredictArgs {
  std::string zoo, equation;
  std::optional<double> power, velocity, length, width, depth;
  bool json_out = false;
};

struct TrainArgs {
  std::string csv, inputs = "power,velocity", target = "depth", family, out;
  std::optional<unsigned> n_estimators, max_depth, n_neighbors;
  std::optional<double> lr;
  std::uint64_t seed = kDefaultSeed;
  unsigned min_leaf = 1;
  double split = kDefaultTestFraction;
};

struct SweepArgs {
  double p_min = kCalibrationEnvelope.power_min, p_max = kCalibrationEnvelope.power_max;
  double v_min = kCalibrationEnvelope.velocity_min, v_max = kCalibrationEnvelope.velocity_max;
  std::size_t resolution = 64;
  std::optional<std::size_t> p_steps, v_steps;
  std::vector<std::string> models;
  std::string equation, out;
};

struct ServeArgs {
  std::optional<std::string> host;
  std::optional<int> port;
  std::string ui;
  std::vector<std::string> loads;
};

struct SynthArgs {
  std::string zoo, equation, out;
  std::size_t n = 281;
  double p_min = kCalibrationEnvelope.power_min, p_max = kCalibrationEnvelope.power_max;
  double v_min = kCalibrationEnvelope.velocity_min, v_max = kCalibrationEnvelope.velocity_max;
  double sigma = 0.0;
  std::uint64_t seed = kDefaultSeed;
};

SymbolicEquation equation_source(const std::string& zoo, const std::string& path) {
  if (!zoo.empty() && !path.empty()) fail(ErrorCode::contract_violation, "give either --zoo or --equation, not both");
  if (!zoo.empty()) return find_model(zoo).equation;
  if (!path.empty()) return load_equation(path);
  fail(ErrorCode::contract_violation, "one of --zoo or --equation is required");
}

int cmd_fit(const FitArgs& a, std::ostream& out) {
  service::FitRequest req;
  req.inputs = a.inputs;
  req.target = parse_field_or_throw(a.target);
  if (a.degree != "auto") {
    unsigned d = 0;
    const auto [p, ec] = std::from_chars(a.degree.data(), a.degree.data() + a.degree.size(), d);
    if (ec != std::errc() || p != a.degree.data() + a.degree.size()) {
      fail(ErrorCode::contract_violation, "--degree must be a positive integer or 'auto'");
    }
    req.degree = d;
  }
  req.test_fraction = a.split;
  req.seed = a.seed;
  const auto outcome = service::run_fit(load_csv(a.csv), req);
  out << equation_to_string(outcome.equation) << "\n";
  out << "degree: " << outcome.equation.degree() << "\n";
  print_report(out, outcome.report);
  if (!a.out.empty()) save_equation(outcome.equation, a.out);
  return 0;
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  service::ModelSource source;
  if (!a.zoo.empty() && !a.equation.empty()) {
    fail(ErrorCode::contract_violation, "give either --zoo or --equation, not both");
  }
  if (!a.zoo.empty()) {
    source.id = a.zoo;
  } else if (!a.equation.empty()) {
    source.equation = load_equation(a.equation);
  } else {
    fail(ErrorCode::contract_violation, "one of --zoo or --equation is required");
  }
  std::map<Field, double> inputs;
  const std::pair<Field, const std::optional<double>*> given[] = {{Field::power, &a.power},
                                                                  {Field::velocity, &a.velocity},
                                                                  {Field::length, &a.length},
                                                                  {Field::width, &a.width},
                                                                  {Field::depth, &a.depth}};
  for (const auto& [field, value] : given) {
    if (*value) inputs[field] = **value;
  }
  service::ModelRegistry registry;
  const auto result = service::predict(registry, source, inputs);
  if (a.json_out) {
    out << service::canonical(service::to_json(result)) << "\n";
    return 0;
  }
  out << full(result.value) << "\n";
  if (result.out_of_envelope) out << "warning: inputs outside the calibration envelope\n";
  if (result.non_physical) out << "warning: negative prediction is non-physical\n";
  return 0;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  service::TrainRequest req;
  req.inputs = a.inputs;
  req.target = parse_field_or_throw(a.target);
  const auto family = parse_family(a.family);
  if (!family) fail(ErrorCode::contract_violation, "unknown family '" + a.family + "' (rf, et, bag, gb, knn)");
  req.config.family = *family;
  req.config.n_estimators = a.n_estimators;
  req.config.max_depth = a.max_depth;
  req.config.n_neighbors = a.n_neighbors;
  req.config.learning_rate = a.lr;
  if (*family == Family::gradient_boost && !a.lr) req.config.learning_rate = kDefaultLearningRate;
  req.config.seed = a.seed;
  req.config.min_leaf = a.min_leaf;
  req.test_fraction = a.split;
  req.split_seed = a.seed;
  const auto outcome = service::run_train(load_csv(a.csv), req);
  out << "family: " << family_name(*family) << "\n";
  print_report(out, outcome.report);
  if (!a.out.empty()) write_text(a.out, model_to_json(outcome.model).dump(2) + "\n");
  return 0;
}

int cmd_correlate(const std::string& csv, bool json_out, std::ostream& out) {
  const auto ds = load_csv(csv);
  std::vector<NamedColumn> columns;
  for (auto f : kAllFields) columns.push_back({std::string(display_name(f)), ds.column(f)});
  const auto m = pearson_correlation_matrix(columns);
  if (json_out) {
    out << service::canonical(service::to_json(m)) << "\n";
    return 0;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-14s", "");
  out << buf;
  for (const auto& n : m.names) {
    std::snprintf(buf, sizeof buf, "%14s", n.c_str());
    out << buf;
  }
  out << "\n";
  for (std::size_t i = 0; i < m.names.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%-14s", m.names[i].c_str());
    out << buf;
    for (std::size_t j = 0; j < m.names.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%14.4f", m.values(i, j));
      out << buf;
    }
    out << "\n";
  }
  return 0;
}

int cmd_importance(const std::string& zoo, const std::string& path, bool json_out, std::ostream& out) {
  const auto report = feature_importance(equation_source(zoo, path));
  if (json_out) {
    out << service::canonical(service::to_json(report)) << "\n";
    return 0;
  }
  char buf[256];
  for (const auto& e : report.entries) {
    std::snprintf(buf, sizeof buf, "%-24s %8.3f%%  |c| = %.6g", e.label.c_str(), e.percentage, e.abs_coefficient);
    out << buf << "\n";
  }
  return 0;
}

json sweep_json_request(const SweepArgs& a) {
  json req = {{"resolution", a.resolution},
              {"power", {{"min", a.p_min}, {"max", a.p_max}}},
              {"velocity", {{"min", a.v_min}, {"max", a.v_max}}}};
  if (a.p_steps) req["power"]["steps"] = *a.p_steps;
  if (a.v_steps) req["velocity"]["steps"] = *a.v_steps;
  if (!a.models.empty()) req["models"] = a.models;
  if (!a.equation.empty()) req["equation"] = read_json_file(a.equation);
  return req;
}

int cmd_sweep(const SweepArgs& a, std::ostream& out) {
  service::ModelRegistry registry;
  const auto grid = service::run_sweep(registry, service::sweep_request_from_json(sweep_json_request(a)));
  const auto body = service::canonical(service::to_json(grid));
  if (a.out.empty()) {
    out << body << "\n";
  } else {
    write_text(a.out, body);
  }
  return 0;
}

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  service::ModelRegistry registry;
  for (const auto& spec : a.loads) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) fail(ErrorCode::contract_violation, "--load expects id=path, got '" + spec + "'");
    registry.publish_as(spec.substr(0, eq), load_equation(spec.substr(eq + 1)));
  }
  auto options = service::resolve_server_options(a.host, a.port);
  if (!a.ui.empty()) options.ui_dir = a.ui;
  service::HttpServer server(options, registry);
  const int port = server.bind();
  out << "listening on http://" << options.host << ":" << port << std::endl;
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.serve();
  g_server = nullptr;
  return 0;
}

int cmd_export_zoo(const std::string& dir, std::ostream& out) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io_error, "cannot create " + dir + ": " + ec.message());
  for (const auto& entry : list_models()) {
    const auto path = std::filesystem::path(dir) / (entry.id + ".json");
    save_equation(entry.equation, path);
    out << path.string() << "\n";
  }
  return 0;
}

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const auto eq = equation_source(a.zoo, a.equation);
  const auto ds = synth_generate(eq, a.n, {a.p_min, a.p_max}, {a.v_min, a.v_max}, a.sigma, a.seed);
  if (a.out.empty()) {
    write_csv(ds, out);
  } else {
    write_csv(ds, std::filesystem::path(a.out));
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"meltmap: melt-pool and spatter regression toolkit"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "fit a polynomial equation to a process-map CSV");
  fit_cmd->add_option("--csv", fit.csv, "input CSV")->required();
  fit_cmd->add_option("--inputs", fit.inputs, "feature list, e.g. power,velocity,log_velocity");
  fit_cmd->add_option("--target", fit.target, "target field");
  fit_cmd->add_option("--degree", fit.degree, "polynomial degree or 'auto'");
  fit_cmd->add_option("--split", fit.split, "test fraction");
  fit_cmd->add_option("--seed", fit.seed, "split seed");
  fit_cmd->add_option("--out", fit.out, "write the equation JSON here");

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "evaluate a zoo or saved equation");
  pred_cmd->add_option("--zoo", pred.zoo, "zoo model id");
  pred_cmd->add_option("--equation", pred.equation, "equation JSON file");
  pred_cmd->add_option("-P,--power", pred.power, "laser power [W]");
  pred_cmd->add_option("-V,--velocity", pred.velocity, "scan velocity [mm/s]");
  pred_cmd->add_option("-L,--length", pred.length, "melt-pool length [um]");
  pred_cmd->add_option("-W,--width", pred.width, "melt-pool width [um]");
  pred_cmd->add_option("-D,--depth", pred.depth, "melt-pool depth [um]");
  pred_cmd->add_flag("--json", pred.json_out, "print JSON");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train an ensemble or kNN regressor");
  train_cmd->add_option("--csv", train.csv, "input CSV")->required();
  train_cmd->add_option("--inputs", train.inputs, "feature list");
  train_cmd->add_option("--target", train.target, "target field");
  train_cmd->add_option("--family", train.family, "rf, et, bag, gb or knn")->required();
  train_cmd->add_option("--n-estimators", train.n_estimators, "number of members");
  train_cmd->add_option("--max-depth", train.max_depth, "tree depth limit");
  train_cmd->add_option("--n-neighbors", train.n_neighbors, "k for knn");
  train_cmd->add_option("--lr", train.lr, "gradient boosting learning rate (default 0.1)");
  train_cmd->add_option("--seed", train.seed, "seed for split and members");
  train_cmd->add_option("--min-leaf", train.min_leaf, "minimum samples per leaf");
  train_cmd->add_option("--split", train.split, "test fraction");
  train_cmd->add_option("--out", train.out, "write the model JSON here");

  std::string corr_csv;
  bool corr_json = false;
  auto* corr_cmd = app.add_subcommand("correlate", "Pearson correlation matrix of all columns");
  corr_cmd->add_option("--csv", corr_csv, "input CSV")->required();
  corr_cmd->add_flag("--json", corr_json, "print JSON");

  std::string imp_zoo, imp_eq;
  bool imp_json = false;
  auto* imp_cmd = app.add_subcommand("importance", "coefficient-magnitude importance of equation terms");
  imp_cmd->add_option("--zoo", imp_zoo, "zoo model id");
  imp_cmd->add_option("--equation", imp_eq, "equation JSON file");
  imp_cmd->add_flag("--json", imp_json, "print JSON");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "evaluate models over a power x velocity grid");
  sweep_cmd->add_option("--power-min", sweep.p_min);
  sweep_cmd->add_option("--power-max", sweep.p_max);
  sweep_cmd->add_option("--velocity-min", sweep.v_min);
  sweep_cmd->add_option("--velocity-max", sweep.v_max);
  sweep_cmd->add_option("--resolution", sweep.resolution, "steps per axis");
  sweep_cmd->add_option("--power-steps", sweep.p_steps);
  sweep_cmd->add_option("--velocity-steps", sweep.v_steps);
  sweep_cmd->add_option("--models", sweep.models, "model ids")->delimiter(',');
  sweep_cmd->add_option("--equation", sweep.equation, "extra equation JSON file");
  sweep_cmd->add_option("--out", sweep.out, "write JSON here instead of stdout");

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "run the HTTP API");
  serve_cmd->add_option("--host", serve.host, "bind address (env MELTMAP_HOST)");
  serve_cmd->add_option("--port", serve.port, "port, 0 picks a free one (env MELTMAP_PORT)");
  serve_cmd->add_option("--ui", serve.ui, "static UI directory mounted at /");
  serve_cmd->add_option("--load", serve.loads, "publish an equation file as id=path");

  std::string export_dir;
  auto* export_cmd = app.add_subcommand("export-zoo", "write every zoo equation as JSON");
  export_cmd->add_option("--dir", export_dir, "output directory")->required();

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "sample a synthetic dataset from an equation");
  synth_cmd->add_option("--zoo", synth.zoo, "zoo model id");
  synth_cmd->add_option("--equation", synth.equation, "equation JSON file");
  synth_cmd->add_option("-n,--count", synth.n, "number of points");
  synth_cmd->add_option("--power-min", synth.p_min);
  synth_cmd->add_option("--power-max", synth.p_max);
  synth_cmd->add_option("--velocity-min", synth.v_min);
  synth_cmd->add_option("--velocity-max", synth.v_max);
  synth_cmd->add_option("--sigma", synth.sigma, "Gaussian noise standard deviation");
  synth_cmd->add_option("--seed", synth.seed);
  synth_cmd->add_option("--out", synth.out, "output CSV (stdout if omitted)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit, out);
    if (*pred_cmd) return cmd_predict(pred, out);
    if (*train_cmd) return cmd_train(train, out);
    if (*corr_cmd) return cmd_correlate(corr_csv, corr_json, out);
    if (*imp_cmd) return cmd_importance(imp_zoo, imp_eq, imp_json, out);
    if (*sweep_cmd) return cmd_sweep(sweep, out);
    if (*serve_cmd) return cmd_serve(serve, out);
    if (*export_cmd) return cmd_export_zoo(export_dir, out);
    if (*synth_cmd) return cmd_synth(synth, out);
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace meltmap
