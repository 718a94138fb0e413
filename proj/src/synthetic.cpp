#include "meltmap/synthetic.hpp"

#include <cmath>
#include <random>

#include "meltmap/error.hpp"

namespace meltmap {

Dataset synth_generate(const SymbolicEquation& eq, std::size_t n, Range power, Range velocity,
                       double noise_sigma, std::uint64_t seed) {
  if (n < 2) fail(ErrorCode::contract_violation, "synth_generate: need at least 2 records");
  if (!(power.lo < power.hi) || !(velocity.lo < velocity.hi)) {
    fail(ErrorCode::contract_violation, "synth_generate: degenerate sampling range");
  }
  if (!(power.lo > 0.0) || !(velocity.lo > 0.0)) {
    fail(ErrorCode::contract_violation, "synth_generate: power and velocity ranges must be positive");
  }
  if (!(noise_sigma >= 0.0)) fail(ErrorCode::contract_violation, "synth_generate: negative noise sigma");

  const auto spec = feature_spec_of(eq);
  for (const auto& entry : spec.entries()) {
    if (entry.field != Field::power && entry.field != Field::velocity) {
      fail(ErrorCode::contract_violation,
           "synth_generate: equation uses " + entry.column_name() + "; only power and velocity are sampled");
    }
  }
  const auto target = parse_field_or_throw(eq.target());
  if (target == Field::power || target == Field::velocity) {
    fail(ErrorCode::contract_violation, "synth_generate: target must be an output field");
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> draw_p(power.lo, power.hi);
  std::uniform_real_distribution<double> draw_v(velocity.lo, velocity.hi);
  std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);

  std::vector<ProcessMapRecord> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ProcessMapRecord r;
    r.power = draw_p(rng);
    r.velocity = draw_v(rng);
    double value = evaluate_from_fields(eq, {{Field::power, r.power}, {Field::velocity, r.velocity}});
    if (noise_sigma > 0.0) value += noise(rng);
    r.set(target, value);
    records.push_back(r);
  }
  return Dataset(std::move(records), "synthetic seed=" + std::to_string(seed));
}

}  // namespace meltmap
