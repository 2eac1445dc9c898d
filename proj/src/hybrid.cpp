#include "csipred/hybrid.hpp"

#include "csipred/errors.hpp"

namespace csipred {

namespace {

void check_split(const SupervisedWindowSet& w, const std::string& name, std::size_t lags,
                 std::size_t horizon) {
  if (w.lags != lags || w.horizon != horizon) {
    throw ContractError("hybrid: " + name + " windows are " + std::to_string(w.lags) + "->" +
                        std::to_string(w.horizon) + ", expected " + std::to_string(lags) + "->" +
                        std::to_string(horizon));
  }
}

std::string np_config_text(const NpModel& np) {
  CheckpointSection s = np.to_section();
  std::string text;
  for (const auto& [k, v] : s.attrs()) {
    if (k == "trained" || k == "time_origin" || k == "time_span") continue;
    text += k + '=' + v + '\n';
  }
  return text;
}

}  // namespace

std::string HybridProvenance::hash() const {
  return sha256_hex("seed=" + std::to_string(seed) + "\nrnn=" + rnn_digest + "\nnp=" + np_config +
                    "\ndata=" + dataset_digest + "\n");
}

Checkpoint HybridModel::to_checkpoint() const {
  Checkpoint cp;
  auto& p = cp.add("hybrid");
  p.set("seed", static_cast<long long>(provenance.seed));
  p.set("rnn_digest", provenance.rnn_digest);
  p.set("dataset_digest", provenance.dataset_digest.empty() ? "-" : provenance.dataset_digest);
  p.set("provenance", provenance.hash());
  cp.sections.push_back(rnn.to_section());
  cp.sections.push_back(np.to_section());
  return cp;
}

HybridModel HybridModel::from_checkpoint(const Checkpoint& checkpoint) {
  const auto& p = checkpoint.find("hybrid");
  HybridModel m{RecurrentModel::from_section(checkpoint.find("recurrent")),
                NpModel::from_section(checkpoint.find("np")),
                {}};
  m.provenance.seed = static_cast<std::uint64_t>(p.get_int("seed"));
  m.provenance.rnn_digest = p.get("rnn_digest");
  m.provenance.np_config = np_config_text(m.np);
  const std::string& data = p.get("dataset_digest");
  m.provenance.dataset_digest = data == "-" ? "" : data;
  if (m.provenance.rnn_digest != m.rnn.digest()) {
    throw DataError("hybrid checkpoint: recurrent sub-model does not match its recorded digest");
  }
  if (p.get("provenance") != m.provenance.hash()) {
    throw DataError("hybrid checkpoint: provenance hash mismatch");
  }
  return m;
}

HybridBuild build_hybrid(const WindowSplits& splits, const RecurrentConfig& rnn_config,
                         NpConfig np_config, std::uint64_t seed,
                         const RecurrentModel* pretrained) {
  const RecurrentConfig& rc = pretrained != nullptr ? pretrained->config() : rnn_config;
  if (np_config.horizon != rc.horizon || np_config.lags != rc.lags) {
    throw ContractError("hybrid: NP and RNN must share lags and horizon");
  }
  check_split(splits.train, "train", rc.lags, rc.horizon);
  check_split(splits.validation, "validation", rc.lags, rc.horizon);
  check_split(splits.test, "test", rc.lags, rc.horizon);
  np_config.regressor = true;

  RecurrentTrainResult rnn_history;
  RecurrentModel rnn = pretrained != nullptr ? *pretrained : RecurrentModel(rnn_config, seed);
  if (pretrained == nullptr) {
    try {
      rnn_history = train_recurrent(rnn, splits.train, seed);
    } catch (const DivergenceError& e) {
      throw DivergenceError("hybrid stage 1 (" + to_string(rc.arch) + ")", e.epoch(), e.batch());
    }
  } else if (!pretrained->trained()) {
    throw ContractError("hybrid: supplied recurrent model is untrained");
  }

  auto forecasts = [&rnn](const SupervisedWindowSet& w) {
    return w.empty() ? DenseMatrix(0, static_cast<Eigen::Index>(w.horizon))
                     : rnn.predict_batch(w.inputs);
  };
  DenseMatrix train_reg = forecasts(splits.train);
  DenseMatrix val_reg = forecasts(splits.validation);
  DenseMatrix test_reg = forecasts(splits.test);

  NpModel np(np_config, seed);
  NpTrainResult np_history = np_train(np, splits.train, &train_reg, seed);

  HybridProvenance prov;
  prov.seed = seed;
  prov.rnn_digest = rnn.digest();
  prov.np_config = np_config_text(np);
  prov.dataset_digest = splits.train.digest();
  return HybridBuild{HybridModel{std::move(rnn), std::move(np), std::move(prov)},
                     std::move(rnn_history),
                     std::move(np_history),
                     std::move(train_reg),
                     std::move(val_reg),
                     std::move(test_reg)};
}

std::vector<double> hybrid_predict(const HybridModel& model, std::span<const double> lags,
                                   std::int64_t t) {
  if (lags.size() != model.rnn.config().lags) {
    throw ContractError("hybrid_predict: expected " + std::to_string(model.rnn.config().lags) +
                        " lags, got " + std::to_string(lags.size()));
  }
  const std::vector<double> reg = predict_horizon(model.rnn, lags);
  return model.np.forecast(t, lags, reg);
}

DenseMatrix hybrid_predict_batch(const HybridModel& model, const SupervisedWindowSet& windows) {
  if (windows.lags != model.rnn.config().lags || windows.horizon != model.rnn.config().horizon) {
    throw ContractError("hybrid_predict: window shape does not match the model");
  }
  const DenseMatrix reg = model.rnn.predict_batch(windows.inputs);
  return model.np.predict_batch(windows, &reg);
}

}  // namespace csipred
