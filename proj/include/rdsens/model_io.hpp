#pragma once

#include <string>

#include "rdsens/models.hpp"

namespace rdsens {

/// A model plus the functional it is estimated under.
struct LoadedModel {
  ParamModel model;
  Functional functional;
};

/// Parses the JSON model schema (affine coefficients only) documented in
/// the README. Throws ConfigError on malformed input and ModelError when
/// the data violates a structural invariant.
LoadedModel load_model_json(const std::string& json_text);

/// load_model_json applied to the contents of `path`.
LoadedModel load_model_file(const std::string& path);

}  // namespace rdsens
