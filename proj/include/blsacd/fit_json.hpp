#pragma once

#include <json.hpp>

#include "blsacd/estimate.hpp"

namespace blsacd {

/// FitResult as JSON with its field names; non-finite numbers become null.
nlohmann::ordered_json fit_to_json(const FitResult& fit);
/// Inverse of fit_to_json; null numbers read back as NaN. Throws DataError on schema errors.
FitResult fit_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json number_or_null(double v);

}  // namespace blsacd
