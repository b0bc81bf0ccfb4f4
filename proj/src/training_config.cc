#include "stance/training_config.h"

#include <json.hpp>

#include "stance/errors.h"

namespace stance {

TrainingConfig emit_training_config(std::string_view model_name) {
  TrainingConfig c;
  c.base_model = std::string(model_name);
  if (model_name == "default") return c;
  if (model_name == "xlm-roberta") {
    c.learning_rate = 5e-6;
    c.epochs = 5;
    return c;
  }
  throw ValidationError("unknown training config '" + std::string(model_name) + "' (expected default or xlm-roberta)");
}

std::string training_config_to_json(const TrainingConfig& c) {
  nlohmann::ordered_json j;
  j["base_model"] = c.base_model;
  j["batch_size"] = c.batch_size;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["warmup_ratio"] = c.warmup_ratio;
  j["max_tokens"] = c.max_tokens;
  j["class_weights"] = "inverse_frequency";
  return j.dump(2) + "\n";
}

}  // namespace stance
