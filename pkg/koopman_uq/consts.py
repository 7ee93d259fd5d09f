# Copyright (c) 2024 The koopman-uq Authors
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#    http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

# Optimizer
ADAM_LR = 1e-3
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Model architecture
LATENT_DIM = 32
HIDDEN_WIDTHS = (64, 64)
ACTIVATION = 'tanh'
ACTIVATIONS = ('tanh', 'linear')
K_INIT_NOISE = 1e-3

# Objectives
REGIME_INDEPENDENT = 'independent'
REGIME_VARIANCE = 'variance'
REGIME_CRPS_PROXY = 'crps_proxy'
REGIMES = (REGIME_INDEPENDENT, REGIME_VARIANCE, REGIME_CRPS_PROXY)
NORM_SQ_L2 = 'sq_l2'
NORM_L1 = 'l1'
NORMS = (NORM_SQ_L2, NORM_L1)
ALPHA = 0.01
CRPS_PROXY_LAMBDA = 1.0
LAMBDA_SWEEP = (0.0, 0.1, 0.5, 0.9, 0.99, 1.0)
DIVERGENCE_MSG = ('lambda > 1 leaves pred - lambda * var unbounded below; '
                  'the training procedure will diverge with an inter-model '
                  'variance growing to infinity')

# Training
ENSEMBLE_SIZE = 8
TRAIN_STEPS = 5000
BATCH_SIZE = 32
SEED = 0
TEST_FRACTION = 0.2
LOG_EVERY = 10
THREADS_ENV = 'KOOPMAN_UQ_THREADS'

# Evaluation
SPREAD_SKILL_BINS = 20
CRPS_QUADRATURE_STEP = 1e-3
CRPS_QUADRATURE_MAX_POINTS = 1000000

# Synthetic data
SYSTEM_LINEAR = 'linear'
SYSTEM_DAMPED_OSCILLATOR = 'damped_oscillator'
SYSTEM_VAN_DER_POL = 'van_der_pol'
SYSTEMS = (SYSTEM_LINEAR, SYSTEM_DAMPED_OSCILLATOR, SYSTEM_VAN_DER_POL)
DATA_N_SERIES = 200
DATA_STEPS = 60
DATA_DT = 0.1
DATA_NOISE_STD = 0.01
VDP_SUBSTEPS = 10
NORM_MIN_STD = 1e-12

# File formats
KTS_MAGIC = b'KTS1'
CHECKPOINT_VERSION = 1

# Exit codes
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4
