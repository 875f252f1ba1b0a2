"""A tour of the tensor core: taped gradients checked against finite differences.

Everything downstream (recurrent agents, the monotonic mixer, distillation)
rests on this little reverse-mode engine, so we first convince ourselves the
gradients are real.
"""

import numpy as np

from manger.numcore import (
    ParamStore, RngStream, Tensor, adam_step, backward, init_uniform_fanin,
    mul, no_grad, relu, linear, sum_,
)

rng = RngStream(seed=0, stream_id=1)
store = ParamStore()
w1 = store.add("w1", init_uniform_fanin((8, 4), rng))
w2 = store.add("w2", init_uniform_fanin((1, 8), rng))

x = np.linspace(-1, 1, 4)


def loss_fn():
    hidden = relu(linear(Tensor(x), w1))
    return sum_(mul(linear(hidden, w2), 1.0))


loss = loss_fn()
backward(loss)
print(f"loss = {loss.item():.6f}")

# central finite differences on a few coordinates of w1
eps = 1e-6
flat = w1.data.reshape(-1)
grad = store.grad("w1").reshape(-1)
print("\ncoordinate   analytic      finite-diff")
for i in (0, 5, 11, 20):
    old = flat[i]
    flat[i] = old + eps
    with no_grad():
        up = loss_fn().item()
    flat[i] = old - eps
    with no_grad():
        down = loss_fn().item()
    flat[i] = old
    fd = (up - down) / (2 * eps)
    print(f"w1[{i:2d}]      {grad[i]: .8f}   {fd: .8f}")

# a few Adam steps shrink the loss
store.zero_grads()
print("\nAdam descent on sum of outputs:")
for step in range(5):
    loss = loss_fn()
    backward(loss)
    adam_step(store, lr=0.05)
    print(f"  step {step}: loss = {loss.item(): .6f}")
