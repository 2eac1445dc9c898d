#pragma once

// RNN -> NP corrector: the recurrent forecast of each window is attached to
// the NP model as a known-future regressor.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csipred/checkpoint.hpp"
#include "csipred/datapipe.hpp"
#include "csipred/nprophet.hpp"
#include "csipred/recurrent.hpp"

namespace csipred {

struct WindowSplits {
  SupervisedWindowSet train;
  SupervisedWindowSet validation;
  SupervisedWindowSet test;
};

struct HybridProvenance {
  std::uint64_t seed = 0;
  std::string rnn_digest;    // stage-1 checkpoint digest
  std::string np_config;     // canonical NP config text
  std::string dataset_digest;

  std::string hash() const;
};

struct HybridModel {
  RecurrentModel rnn;
  NpModel np;
  HybridProvenance provenance;

  // Bundles both sub-models plus a provenance section.
  Checkpoint to_checkpoint() const;
  static HybridModel from_checkpoint(const Checkpoint& checkpoint);
};

struct HybridBuild {
  HybridModel model;
  RecurrentTrainResult rnn_history;  // empty when a trained RNN was supplied
  NpTrainResult np_history;
  DenseMatrix train_regressors;
  DenseMatrix validation_regressors;
  DenseMatrix test_regressors;
};

// Stage 1 trains the RNN (skipped when `pretrained` is given), stage 2
// forecasts every window of every split, stage 3 trains NP with those
// forecasts as regressors. The NP config is forced to carry a regressor head.
HybridBuild build_hybrid(const WindowSplits& splits, const RecurrentConfig& rnn_config,
                         NpConfig np_config, std::uint64_t seed,
                         const RecurrentModel* pretrained = nullptr);

std::vector<double> hybrid_predict(const HybridModel& model, std::span<const double> lags,
                                   std::int64_t t);
DenseMatrix hybrid_predict_batch(const HybridModel& model, const SupervisedWindowSet& windows);

}  // namespace csipred
