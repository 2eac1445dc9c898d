#pragma once

#include <string>

// Small enough for every model to train in well under a second.
inline const std::string kTinyConfig =
    "synth.samples = 800\n"
    "synth.antennas = 2\n"
    "window.lags = 8\n"
    "window.horizon = 4\n"
    "train.window_stride = 4\n"
    "rnn.hidden = 4\n"
    "rnn.layers = 1\n"
    "rnn.epochs = 2\n"
    "rnn.dropout = 0\n"
    "bilstm.hidden = 3\n"
    "bilstm.layers = 1\n"
    "bilstm.epochs = 1\n"
    "np.epochs = 2\n"
    "np.changepoints = 3\n"
    "np.ar_layers = 1\n"
    "np.ar_hidden = 4\n"
    "np.seasonalities = 2:0.025\n"
    "compare.seeds = 1, 2, 3\n";
