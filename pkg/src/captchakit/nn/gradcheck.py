"""Central-difference verification of every backward pass.

Runs a tiny model in float64 (finite differences drown in float32 noise) on
random data and compares analytic parameter gradients against
(f(p+eps) - f(p-eps)) / 2 eps elementwise. Dropout masks and batch
statistics are held fixed across evaluations by replaying the same rng, so
the loss is a deterministic function of the parameters.
"""

from __future__ import annotations

import numpy as np

from ..rng import Rng
from .layers import softmax_xent
from .model import ModelSpec, build_model

MAX_PARAMS = 10_000


def grad_check(
    spec: ModelSpec,
    seed: int,
    batch: int = 3,
    eps: float = 1e-5,
    sabotage: bool = False,
) -> float:
    """Max over parameters of |g_a - g_n| / max(|g_a|, |g_n|, 1e-8).

    `sabotage` flips the sign of the first analytic gradient array, a
    negative control that must blow the comparison up.
    """
    base = Rng(seed)
    model = build_model(spec, base, dtype=np.float64)
    n_params = sum(a.size for _, a in model.param_items())
    if n_params > MAX_PARAMS:
        raise ValueError(f"model has {n_params} parameters, gradient check caps at {MAX_PARAMS}")

    data_rng = base.derive(1)
    x = data_rng.normal_block(batch * int(np.prod(spec.input_shape))).reshape(
        batch, *spec.input_shape
    )
    y = np.array(
        [
            [data_rng.randint(0, len(spec.charset) - 1) for _ in range(spec.n_heads)]
            for _ in range(batch)
        ],
        dtype=np.int32,
    )
    eye = np.eye(len(spec.charset), dtype=np.float64)

    def loss_value() -> float:
        # Same derived rng every call keeps dropout masks identical.
        logits = model.forward(x, training=True, rng=base.derive(2), update_running=False)
        return sum(softmax_xent(lg, eye[y[:, j]])[0] for j, lg in enumerate(logits))

    logits = model.forward(x, training=True, rng=base.derive(2), update_running=False)
    dlogits = []
    for j, lg in enumerate(logits):
        dlogits.append(softmax_xent(lg, eye[y[:, j]])[1])
    model.backward(dlogits)
    analytic = {name: g.copy() for name, g in model.grad_items()}
    if sabotage:
        first = model.grad_items()[0][0]
        analytic[first] = -analytic[first]

    worst = 0.0
    for name, param in model.param_items():
        ga = analytic[name].reshape(-1)
        flat = param.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            hi = loss_value()
            flat[i] = keep - eps
            lo = loss_value()
            flat[i] = keep
            gn = (hi - lo) / (2.0 * eps)
            rel = abs(ga[i] - gn) / max(abs(ga[i]), abs(gn), 1e-8)
            worst = max(worst, rel)
    return worst
