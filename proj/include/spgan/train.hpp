#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "spgan/checkpoint.hpp"
#include "spgan/data.hpp"
#include "spgan/models.hpp"
#include "spgan/optim.hpp"

namespace spgan {

enum class Stage { mask, em };
const char* to_string(Stage s);

struct TrainConfig {
  int resolution = 64;
  int batch = 1;  // one augmented sample per optimizer step
  int epochs = 500;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double lambda_l1 = 100.0;
  DiscVariant variant = DiscVariant::skip;
  double crop_area = 0.9;  // stage em defaults to 0.98 via the CLI
  uint64_t seed = 42;
  int checkpoint_interval = 0;  // 0: final checkpoint only
  std::string manifest;         // real data when set...
  int synthetic_n = 8;          // ...else a procedural corpus of this size
  int noise_side = 8;           // stage mask
  int unet_base = 16;           // stage em
  bool freeze_g = false;        // diagnostic: skip generator updates
};

// Canonical JSON snapshot (sorted keys); embedded in checkpoints.
// Unknown keys are rejected on parse.
std::string train_config_to_json(const TrainConfig& cfg, Stage stage);
std::pair<TrainConfig, Stage> train_config_from_json(const std::string& text,
                                                     const TrainConfig& defaults);

struct StepLog {
  int64_t step = 0;
  double loss_d = 0.0, loss_g_bce = 0.0, loss_g_l1 = 0.0, loss_g_total = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;      // state after the last step
  std::vector<StepLog> log;   // steps executed by this run
  std::string checkpoint_path;
  std::string loss_csv_path;
};

// Alternating GAN updates, one discriminator then one generator step per
// sample; losses stream to <out_dir>/loss.csv; checkpoints land under
// out_dir. A non-finite loss aborts with the step number, keeping the last
// checkpoint on disk. When resume_path is set, every setting except the
// step target is taken from the checkpoint.
TrainResult train_mask_gan(const TrainConfig& cfg, const std::string& out_dir,
                           const std::string& resume_path = {});
TrainResult train_cgan(const TrainConfig& cfg, const std::string& out_dir,
                       const std::string& resume_path = {});

// Graphs and parameters reconstructed from a checkpoint.
struct ModelBundle {
  Stage stage = Stage::mask;
  TrainConfig cfg;
  LayerGraph gen;
  LayerGraph disc;
  ModelParams gen_params;
  ModelParams disc_params;
  int64_t step = 0;
};
ModelBundle unpack_checkpoint(const Checkpoint& ckpt);

// 17-significant-digit formatting used by every CSV writer.
std::string format_g17(double v);
void write_loss_csv(const std::string& path, const std::vector<StepLog>& log);

}  // namespace spgan
