#pragma once

#include <string>
#include <string_view>

namespace stance {

// Hyperparameters handed to an external fine-tuning job. Never executed here.
struct TrainingConfig {
  std::string base_model;
  int batch_size = 16;
  double learning_rate = 5e-5;
  int epochs = 2;
  double warmup_ratio = 0.1;
  int max_tokens = 512;
};

// "default" or "xlm-roberta"; throws ValidationError otherwise.
TrainingConfig emit_training_config(std::string_view model_name);
std::string training_config_to_json(const TrainingConfig& config);

}  // namespace stance
