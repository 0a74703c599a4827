"""Training-set design and memory-initialization experiments for LSTM
models of the Lorenz'63 attractor.

Subpackages
-----------
dynsys    : Lorenz system, RK4 integration, fixed points, Lyapunov/KY.
sampling  : the five training-set builders, Kac sample budget, scaler.
lstm      : from-scratch 2x50 LSTM with externalized memory state.
training  : teacher-forced truncated-BPTT training with Adam.
evaluate  : closed-loop prediction, valid time, correlation dimension,
            ensemble experiment grid.
analysis  : exact t-SNE of parameter vectors, radial distributions,
            dimension histograms.
cli       : reproducibility front-end (`attractorlab` command).
"""

__version__ = "0.1.0"
