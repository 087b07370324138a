#pragma once

#include <string>
#include <vector>

#include "deskdoc/data.hpp"
#include "deskdoc/model.hpp"
#include "deskdoc/training.hpp"

namespace deskdoc {

struct AblationBudget {
  int steps = 50;            // pretraining steps per setting
  std::uint64_t seed = 0;    // fixed across settings
  int vocab_size = 512;
  double lr = 5e-5;
  double holdout_frac = 0.25;
};

struct AblationRow {
  std::string axis;
  std::string setting;
  std::string metric_name;
  double metric_value = 0;
  std::uint64_t seed = 0;
  int steps = 0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
};

// The default sweeps: grid {4x1,2x2,4x4,8x8,12x12}, image-tokens
// {32,64,128,256}, tasks {B,B+V,B+V+L,B+V+G,B+V+L+G}, noise {0,0.05,0.1,0.2}.
std::vector<std::string> default_ablation_settings(const std::string& axis);

// Pretrains one model per setting (a single base model for the noise axis)
// under the identical budget and reports held-out losses and label accuracies
// per setting. Rows are reported, never ranked or thresholded here.
AblationReport run_ablation(const std::string& axis, const std::vector<std::string>& settings,
                            const AblationBudget& budget, const std::vector<Document>& corpus,
                            const ModelConfig& base_cfg);

void write_ablation_csv(const AblationReport& report, const std::string& path);

}  // namespace deskdoc
