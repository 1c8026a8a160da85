"""
A tour of the reverse-mode tape
===============================

Everything the models do is built from a handful of differentiable
array operations. This walks the tape end to end on a tiny expression.
"""

import numpy as np

from nmtforge import autodiff as ad

# leaves that want gradients are Tensors with requires_grad
w = ad.Tensor(np.array([[0.5, -1.0], [2.0, 0.1]]), requires_grad=True)
x = ad.Tensor(np.array([[1.0], [3.0]]))

# ops record themselves as they run
h = ad.tanh(ad.matmul(w, x))
loss = ad.mean_(h * h)
print("loss:", float(loss.data))

# one backward pass fills every .grad on the path
ad.backward(loss)
print("dloss/dw:")
print(w.grad)

# the tape agrees with central differences to working precision
params = ad.ParameterSet()
w2 = params.add("w", w.data)

def loss_fn():
    return ad.mean_(ad.tanh(ad.matmul(w2, x)) ** 2.0)

err = ad.gradient_check(params, loss_fn)
print("worst relative error vs finite differences: %.2e" % err)

# softmax and the smoothed cross entropy are ops too, so a whole
# classifier fits on one tape
scores = ad.Tensor(np.array([[2.0, 0.0, -1.0, 0.5]]), requires_grad=True)
nll = ad.cross_entropy_smoothed(scores, np.array([0]), epsilon=0.1, pad_id=3)
print("smoothed nll for class 0: %.4f" % float(nll.data))
ad.backward(nll)
print("its gradient pushes mass toward the gold class:", scores.grad.round(3))
