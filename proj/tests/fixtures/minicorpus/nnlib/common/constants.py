EPS = 1e-6
DEFAULT_HEADS = 8
LAYER_SCALE_INIT = 1e-5
MLP_RATIO = 4.0
