// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
// Internal json helpers shared by model serialization and the cli config
// parser. Not installed with the public headers.
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "pemss/model.hpp"

namespace pemss {

using nlohmann::json;

// Rejects keys outside `allowed`; `where` names the object in the message.
void check_keys(const json& j, std::initializer_list<const char*> allowed,
                const std::string& where);

json shape_to_json(const FfnShape& s);
FfnShape shape_from_json(const json& j, const std::string& where);

json structure_to_json(const ModelStructure& ms);
ModelStructure structure_from_json(const json& j, const std::string& where);

std::vector<double> to_std(const VectorXd& v);
VectorXd from_std(const std::vector<double>& v);

}  // namespace pemss
