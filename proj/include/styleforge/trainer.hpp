#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>

#include "styleforge/checkpoint.hpp"
#include "styleforge/config.hpp"
#include "styleforge/data.hpp"
#include "styleforge/discriminator.hpp"
#include "styleforge/generator.hpp"
#include "styleforge/objectives.hpp"
#include "styleforge/optim.hpp"
#include "styleforge/perceptual.hpp"
#include "styleforge/style_alignment.hpp"

namespace styleforge {

/// Every network of a run. The perceptual extractor is frozen and belongs
/// to no optimizer group.
struct Models {
  StyleEncoder style_encoder;
  Generator generator;
  StyleDiscriminator style_discriminator;
  PatchDiscriminator image_discriminator;
  std::shared_ptr<const FeatureExtractor> perceptual;

  /// E_s, E_c, Dec_c and the mapping network.
  ParamList generator_group() const;
  /// D_c including the auxiliary classifier head.
  ParamList image_discriminator_group() const;
  ParamList style_discriminator_group() const;
};

struct TrainState {
  RunConfig config;
  DomainRegistry domains;
  Models models;
  Adam generator_opt;
  Adam image_discriminator_opt;
  Adam style_discriminator_opt;
  std::int64_t step = 0;  // completed steps
};

/// Gaussian-initialized networks (seed-derived) plus the frozen perceptual
/// backend, which is pre-trained on the dataset's style images.
TrainState init_state(const RunConfig& config, const Dataset& dataset);

/// Batch and code streams used for step `step`; pure functions of (seed, step).
Rng batch_rng(std::uint64_t seed, std::int64_t step);
Rng code_rng(std::uint64_t seed, std::int64_t step);

/// One alternating update: D_c, then D_s, then the generator group on the
/// weighted objective. Throws NumericalError before any update that would
/// consume a non-finite loss.
LossReport train_step(TrainState& state, const Batch& batch, Rng& rng);

/// Samples the batch for state.step and runs train_step.
LossReport advance(TrainState& state, const Dataset& dataset);

struct TrainOptions {
  /// Run directory for checkpoints, loss CSV and config echo; none when empty.
  std::filesystem::path out_dir;
  std::function<void(const LossReport&)> on_report;  // every logged step
  bool quiet = true;
};

/// Runs until state.step == state.config.iterations, checkpointing every
/// configured interval and once at the end.
void run_training(TrainState& state, const Dataset& dataset, const TrainOptions& options);

/// init_state + run_training.
TrainState train(const RunConfig& config, const Dataset& dataset, const TrainOptions& options);

Archive to_archive(const TrainState& state);
TrainState from_archive(const Archive& archive);
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
TrainState load_checkpoint(const std::filesystem::path& path);

/// Checkpoint file name for a step inside a run directory.
std::filesystem::path checkpoint_path(const std::filesystem::path& run_dir, std::int64_t step);
/// Highest-step checkpoint in a run directory, if any.
std::optional<std::filesystem::path> latest_checkpoint(const std::filesystem::path& run_dir);

}  // namespace styleforge
