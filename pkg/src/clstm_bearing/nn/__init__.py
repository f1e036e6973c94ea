from .gradcheck import grad_check, numeric_gradient, relative_error
from .layers import INFER, TRAIN
from .optim import SGD, sgd_step
