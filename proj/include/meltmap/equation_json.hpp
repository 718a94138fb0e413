#pragma once

#include <filesystem>

#include <json.hpp>

#include "meltmap/polyfit.hpp"

namespace meltmap {

// {"target", "base_features", "degree", "intercept", "terms": [{"exponents", "coefficient"}], "train_r2"}
// "terms" lists every non-intercept monomial in graded lexicographic order.
nlohmann::json equation_to_json(const SymbolicEquation& eq);

// Monomials absent from "terms" are read as zero coefficients.
SymbolicEquation equation_from_json(const nlohmann::json& j);

void save_equation(const SymbolicEquation& eq, const std::filesystem::path& path);
SymbolicEquation load_equation(const std::filesystem::path& path);

}  // namespace meltmap
