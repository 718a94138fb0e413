#include "meltmap/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "meltmap/error.hpp"

namespace meltmap {
namespace {

struct FieldInfo {
  Field field;
  std::string_view id;
  std::string_view csv;
  std::string_view display;
  std::string_view unit;
};

constexpr std::array<FieldInfo, 8> kFieldInfo = {{
    {Field::power, "power", "power_W", "Power", "W"},
    {Field::velocity, "velocity", "velocity_mm_s", "Velocity", "mm/s"},
    {Field::length, "length", "length_um", "Length", "um"},
    {Field::width, "width", "width_um", "Width", "um"},
    {Field::depth, "depth", "depth_um", "Depth", "um"},
    {Field::cross_section, "cross_section", "cross_section_um2", "Cross_Section", "um^2"},
    {Field::volume, "volume", "volume_um3", "Volume", "um^3"},
    {Field::spatter, "spatter", "spatter_um3", "Spatter", "um^3"},
}};

const FieldInfo& info(Field field) { return kFieldInfo[static_cast<std::size_t>(field)]; }

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string expected_header() {
  std::string h;
  for (const auto& f : kFieldInfo) {
    if (!h.empty()) h += ',';
    h += f.csv;
  }
  return h;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string_view field_name(Field field) { return info(field).id; }
std::string_view csv_column(Field field) { return info(field).csv; }
std::string_view display_name(Field field) { return info(field).display; }
std::string_view unit(Field field) { return info(field).unit; }

std::optional<Field> parse_field(std::string_view text) {
  text = trim(text);
  for (const auto& f : kFieldInfo) {
    if (iequals(text, f.id) || iequals(text, f.csv) || iequals(text, f.display)) return f.field;
  }
  if (iequals(text, "area")) return Field::cross_section;
  return std::nullopt;
}

Field parse_field_or_throw(std::string_view text) {
  if (auto f = parse_field(text)) return *f;
  std::string valid;
  for (const auto& f : kFieldInfo) {
    if (!valid.empty()) valid += ", ";
    valid += f.id;
  }
  fail(ErrorCode::contract_violation,
       "unknown field '" + std::string(text) + "' (expected one of: " + valid + ")");
}

double ProcessMapRecord::get(Field field) const {
  switch (field) {
    case Field::power: return power;
    case Field::velocity: return velocity;
    case Field::length: return length;
    case Field::width: return width;
    case Field::depth: return depth;
    case Field::cross_section: return cross_section;
    case Field::volume: return volume;
    case Field::spatter: return spatter;
  }
  return 0.0;
}

void ProcessMapRecord::set(Field field, double value) {
  switch (field) {
    case Field::power: power = value; break;
    case Field::velocity: velocity = value; break;
    case Field::length: length = value; break;
    case Field::width: width = value; break;
    case Field::depth: depth = value; break;
    case Field::cross_section: cross_section = value; break;
    case Field::volume: volume = value; break;
    case Field::spatter: spatter = value; break;
  }
}

RecordPolicy policy_for(std::string_view provenance) {
  return provenance.starts_with("synthetic") ? RecordPolicy::synthetic : RecordPolicy::measured;
}

void validate_record(const ProcessMapRecord& record, RecordPolicy policy) {
  for (Field f : kAllFields) {
    const double v = record.get(f);
    if (!std::isfinite(v)) {
      fail(ErrorCode::validation_error, std::string(csv_column(f)) + " is not finite");
    }
  }
  if (record.power <= 0.0) fail(ErrorCode::validation_error, "power_W must be > 0");
  if (record.velocity <= 0.0) fail(ErrorCode::validation_error, "velocity_mm_s must be > 0");
  if (policy == RecordPolicy::synthetic) return;
  for (Field f : {Field::length, Field::width, Field::depth, Field::cross_section, Field::volume,
                  Field::spatter}) {
    if (record.get(f) < 0.0) {
      fail(ErrorCode::validation_error, std::string(csv_column(f)) + " must be >= 0");
    }
  }
}

Dataset::Dataset(std::vector<ProcessMapRecord> records, std::string provenance)
    : records_(std::move(records)), provenance_(std::move(provenance)) {
  std::map<std::pair<double, double>, std::size_t> seen;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    try {
      validate_record(records_[i], policy_for(provenance_));
    } catch (const Error& e) {
      fail(ErrorCode::validation_error, "record " + std::to_string(i + 1) + ": " + e.what());
    }
    const auto [it, inserted] = seen.emplace(std::pair{records_[i].power, records_[i].velocity}, i);
    if (!inserted) {
      fail(ErrorCode::validation_error, "records " + std::to_string(it->second + 1) + " and " +
                                            std::to_string(i + 1) +
                                            " share the same (power, velocity) pair");
    }
  }
}

std::vector<double> Dataset::column(Field field) const {
  std::vector<double> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.get(field));
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices, std::string provenance) const {
  std::vector<ProcessMapRecord> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    require(i < records_.size(), "Dataset::subset: index out of range");
    out.push_back(records_[i]);
  }
  return Dataset(std::move(out), std::move(provenance));
}

double velocity_magnitude(double vx, double vy, double vz) {
  if (!std::isfinite(vx) || !std::isfinite(vy) || !std::isfinite(vz)) {
    fail(ErrorCode::domain_error, "velocity_magnitude: non-finite component");
  }
  return std::hypot(vx, vy, vz);
}

Dataset parse_csv(std::istream& in, const std::string& source_name) {
  std::string provenance = source_name;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  std::vector<ProcessMapRecord> records;
  std::vector<std::size_t> record_lines;
  std::map<std::pair<double, double>, std::size_t> seen;

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = trim(line);
    if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
    if (view.empty()) continue;
    if (view.front() == '#') {
      constexpr std::string_view tag = "provenance:";
      auto body = trim(view.substr(1));
      if (!have_header && body.starts_with(tag)) provenance = std::string(trim(body.substr(tag.size())));
      continue;
    }
    const auto cells = split_commas(view);
    if (!have_header) {
      bool ok = cells.size() == kFieldInfo.size();
      for (std::size_t i = 0; ok && i < cells.size(); ++i) ok = cells[i] == kFieldInfo[i].csv;
      if (!ok) {
        fail(ErrorCode::schema_error, source_name + ": header mismatch; expected '" +
                                          expected_header() + "' but found '" +
                                          std::string(view) + "'");
      }
      have_header = true;
      continue;
    }
    const std::size_t row = records.size() + 1;
    const auto where = source_name + ": row " + std::to_string(row) + " (line " +
                       std::to_string(line_no) + ")";
    if (cells.size() != kFieldInfo.size()) {
      fail(ErrorCode::parse_error, where + ": expected " + std::to_string(kFieldInfo.size()) +
                                       " cells, found " + std::to_string(cells.size()));
    }
    ProcessMapRecord record;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double value = 0.0;
      const auto* first = cells[c].data();
      const auto* last = first + cells[c].size();
      if (!cells[c].empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, value);
      if (cells[c].empty() || ec != std::errc() || ptr != last) {
        fail(ErrorCode::parse_error, where + ", column " + std::string(kFieldInfo[c].csv) +
                                         ": not a number: '" + std::string(cells[c]) + "'");
      }
      record.set(kFieldInfo[c].field, value);
    }
    try {
      validate_record(record, policy_for(provenance));
    } catch (const Error& e) {
      fail(ErrorCode::validation_error, where + ": " + e.what());
    }
    const auto [it, inserted] = seen.emplace(std::pair{record.power, record.velocity}, line_no);
    if (!inserted) {
      fail(ErrorCode::validation_error, source_name + ": duplicate (power, velocity) on lines " +
                                            std::to_string(it->second) + " and " +
                                            std::to_string(line_no));
    }
    records.push_back(record);
  }
  if (!have_header) {
    fail(ErrorCode::schema_error, source_name + ": missing header; expected '" + expected_header() + "'");
  }
  return Dataset(std::move(records), std::move(provenance));
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open '" + path.string() + "'");
  return parse_csv(in, path.string());
}

void write_csv(const Dataset& dataset, std::ostream& out) {
  if (!dataset.provenance().empty()) out << "# provenance: " << dataset.provenance() << '\n';
  out << expected_header() << '\n';
  for (const auto& r : dataset.records()) {
    for (std::size_t c = 0; c < kFieldInfo.size(); ++c) {
      if (c) out << ',';
      out << format_double(r.get(kFieldInfo[c].field));
    }
    out << '\n';
  }
}

void write_csv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io_error, "cannot write '" + path.string() + "'");
  write_csv(dataset, out);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(
    std::size_t n, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    fail(ErrorCode::contract_violation, "train_test_split: test fraction must lie in (0, 1)");
  }
  if (n < 5) fail(ErrorCode::contract_violation, "train_test_split: need at least 5 records");
  auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& dataset, double test_fraction,
                                             std::uint64_t seed) {
  const auto [train, test] = split_indices(dataset.size(), test_fraction, seed);
  return {dataset.subset(train, dataset.provenance() + " [train]"),
          dataset.subset(test, dataset.provenance() + " [test]")};
}

std::string FeatureEntry::column_name() const {
  std::string name(display_name(field));
  return transform == Transform::natural_log ? "log_" + name : name;
}

double FeatureEntry::apply(double raw) const {
  if (transform == Transform::identity) return raw;
  if (!(raw > 0.0)) {
    fail(ErrorCode::domain_error, "log of non-positive " + std::string(field_name(field)) + " (" +
                                      format_double(raw) + ")");
  }
  return std::log(raw);
}

FeatureEntry parse_feature_entry(std::string_view text) {
  text = trim(text);
  FeatureEntry entry;
  if (text.size() > 4 && iequals(text.substr(0, 4), "log_")) {
    entry.transform = Transform::natural_log;
    text.remove_prefix(4);
  }
  const auto field = parse_field(text);
  if (!field || !(*field == Field::power || *field == Field::velocity || *field == Field::length ||
                  *field == Field::width || *field == Field::depth)) {
    fail(ErrorCode::contract_violation,
         "unknown input feature '" + std::string(text) +
             "' (expected power, velocity, length, width or depth, optionally prefixed by log_)");
  }
  entry.field = *field;
  return entry;
}

FeatureSpec::FeatureSpec(std::vector<FeatureEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) fail(ErrorCode::contract_violation, "FeatureSpec: at least one entry required");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (!(e.field == Field::power || e.field == Field::velocity || e.field == Field::length ||
          e.field == Field::width || e.field == Field::depth)) {
      fail(ErrorCode::contract_violation,
           "FeatureSpec: '" + std::string(field_name(e.field)) + "' is not an input field");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (entries_[j] == e) {
        fail(ErrorCode::contract_violation, "FeatureSpec: duplicate entry " + e.column_name());
      }
    }
  }
}

FeatureSpec FeatureSpec::parse(std::string_view text) {
  std::vector<FeatureEntry> entries;
  for (auto token : split_commas(text)) {
    if (!token.empty()) entries.push_back(parse_feature_entry(token));
  }
  return FeatureSpec(std::move(entries));
}

FeatureSpec FeatureSpec::process_conditions() {
  return FeatureSpec({{Field::power, Transform::identity}, {Field::velocity, Transform::identity}});
}

std::vector<std::string> FeatureSpec::column_names() const {
  std::vector<std::string> names;
  for (const auto& e : entries_) names.push_back(e.column_name());
  return names;
}

std::string FeatureSpec::to_string() const {
  std::string out;
  for (const auto& e : entries_) {
    if (!out.empty()) out += ',';
    out += e.column_name();
  }
  return out;
}

Design build_design(const Dataset& dataset, const FeatureSpec& spec) {
  const auto n = dataset.size();
  const auto d = spec.size();
  std::vector<double> values(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const auto& entry = spec.entries()[j];
      try {
        values[i * d + j] = entry.apply(dataset.records()[i].get(entry.field));
      } catch (const Error& e) {
        fail(e.code(), "record " + std::to_string(i + 1) + ": " + e.what());
      }
    }
  }
  return {DenseMatrix(n, d, std::move(values)), spec.column_names()};
}

}  // namespace meltmap
