#pragma once

#include <json.hpp>
#include <string>

#include "runcons/errors.hpp"
#include "runcons/linalg.hpp"

namespace runcons::detail {

inline const nlohmann::json& require_field(const nlohmann::json& j,
                                           const char* field) {
  auto it = j.find(field);
  if (it == j.end()) throw schema_error(std::string("missing field: ") + field);
  return *it;
}

inline Vector json_to_vector(const nlohmann::json& j, const char* field) {
  if (!j.is_array())
    throw schema_error(std::string("field must be an array: ") + field);
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw schema_error(std::string("non-numeric entry in: ") + field);
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

}  // namespace runcons::detail
