#pragma once

#include <memory>
#include <string>

#include "gelboot/dataset.hpp"
#include "gelboot/moment_model.hpp"

namespace gelboot {

// Builds a built-in model from a JSON descriptor. Supported types:
//   {"type": "panel", "T": 4}
//     columns y_1..y_T are resolved against the dataset header
//   {"type": "matching", "y": "wage", "x": ["educ", ...], "intercept": true,
//    "match": [{"terms": [["wage", 1], ["educ", 1]], "target": 3.2}, ...]}
std::unique_ptr<MomentModel> model_from_json(const std::string& json_text,
                                             const Dataset& data);

std::unique_ptr<MomentModel> model_from_json_file(const std::string& path,
                                                  const Dataset& data);

}  // namespace gelboot
