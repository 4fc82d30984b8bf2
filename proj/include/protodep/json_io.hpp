#pragma once

// JSON conversions for configuration structs (nlohmann ADL hooks).

#include "json.hpp"
#include "protodep/model.hpp"
#include "protodep/training.hpp"

namespace protodep::model {
void to_json(nlohmann::json& j, const CalConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, CalConfig& c);
void to_json(nlohmann::json& j, const Thresholds& t);
void from_json(const nlohmann::json& j, Thresholds& t);
void to_json(nlohmann::json& j, const Prediction& p);
void from_json(const nlohmann::json& j, Prediction& p);
}  // namespace protodep::model

namespace protodep::training {
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const BinaryMetrics& m);
void to_json(nlohmann::json& j, const Metrics& m);
}  // namespace protodep::training
