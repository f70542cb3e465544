#!/usr/bin/env python3
"""Fit small feed-forward controllers for the benchmark systems.

Each benchmark has a hand-designed stabilizing law. A two-hidden-layer
network is trained to imitate it on a box around the simulated closed-loop
trajectories, with a penalty on the product of layer spectral norms to keep
the Lipschitz constant small. The result is written in the plain-text weight
format next to the system file and checked by closed-loop simulation.

    python3 scripts/fit_controller.py benchmarks/ex1.json
    python3 scripts/fit_controller.py --all
"""

import argparse
import json
import pathlib
import sys

import numpy as np
import sympy
import torch

ROOT = pathlib.Path(__file__).resolve().parent.parent

# Affine laws u = c0 + c . x, hidden activations, width.
LAWS = {
    "ex1": dict(coef=[0.0, 0.0, -6.0], acts=["relu", "tanh"], width=20),
    "ex2": dict(coef=[0.0, -4.0, -3.0], acts=["sigmoid", "sigmoid"], width=20),
    "ex3": dict(coef=[0.0, -2.0, -2.0], acts=["tanh", "tanh"], width=20),
    "ex4": dict(coef=[-0.151, 2.946, -0.688, -1.718], acts=["relu", "sigmoid"], width=20),
    "ex5": dict(coef=[1.262, 1.844, -4.594, -1.982], acts=["tanh", "tanh"], width=20),
    "ex6": dict(coef=[1.115, -1.644, -2.224, -0.21, -0.394], acts=["relu", "tanh"], width=20),
}

ACTS = {"relu": torch.relu, "sigmoid": torch.sigmoid, "tanh": torch.tanh}


def load_system(path):
    spec = json.loads(path.read_text())
    names = spec["state_vars"] + spec.get("control_vars", ["u"])
    syms = sympy.symbols(names)
    exprs = [sympy.sympify(e.replace("^", "**"), locals=dict(zip(names, syms))) for e in spec["dynamics"]]
    f = sympy.lambdify(syms, exprs, "numpy")

    def rhs(x, u):
        cols = [x[:, i] for i in range(x.shape[1])] + [u]
        return np.stack([np.broadcast_to(v, x.shape[0]) for v in f(*cols)], axis=1)

    return spec, rhs


def simulate(rhs, policy, x0, dc, steps, m=40):
    x = np.array(x0, dtype=float)
    out = [x]
    h = dc / m
    for _ in range(steps):
        u = policy(x)
        for _ in range(m):
            k1 = rhs(x, u)
            k2 = rhs(x + h / 2 * k1, u)
            k3 = rhs(x + h / 2 * k2, u)
            k4 = rhs(x + h * k3, u)
            x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(x)
    return np.array(out)


def sample_box(bounds, n, rng):
    lo, hi = np.array(bounds).T
    return lo + (hi - lo) * rng.random((n, len(bounds)))


class Net(torch.nn.Module):
    def __init__(self, n, width, acts):
        super().__init__()
        self.layers = torch.nn.ModuleList(
            [torch.nn.Linear(n, width), torch.nn.Linear(width, width), torch.nn.Linear(width, 1)]
        )
        self.acts = acts

    def forward(self, x):
        for layer, act in zip(self.layers[:-1], self.acts):
            x = ACTS[act](layer(x))
        return self.layers[-1](x)

    def lipschitz_proxy(self):
        scale = 1.0
        for layer, act in zip(self.layers, self.acts + ["linear"]):
            s = torch.linalg.matrix_norm(layer.weight, ord=2)
            scale = scale * s * (0.25 if act == "sigmoid" else 1.0)
        return scale

    def to_text(self):
        lines = [str(self.layers[0].in_features), "1", str(len(self.acts))]
        lines += [str(l.out_features) for l in self.layers[:-1]]
        lines += self.acts + ["linear"]
        for layer in self.layers:
            w = layer.weight.detach().double().numpy()
            b = layer.bias.detach().double().numpy()
            for i in range(w.shape[0]):
                lines += [repr(float(v)) for v in w[i]] + [repr(float(b[i]))]
        return "\n".join(lines) + "\n"


def fit(name, spec_path, seed, epochs):
    spec, rhs = load_system(spec_path)
    law = LAWS[name]
    coef = np.array(law["coef"])
    target = lambda x: coef[0] + x @ coef[1:]
    rng = np.random.default_rng(seed)
    torch.manual_seed(seed)

    x0 = sample_box(spec["init"], 200, rng)
    traj = simulate(rhs, target, x0, spec["control_step"], spec["steps"]).reshape(-1, len(spec["state_vars"]))
    lo, hi = traj.min(0), traj.max(0)
    pad = 0.2 * (hi - lo) + 0.1
    region = list(zip(lo - pad, hi + pad))

    xs = np.concatenate([sample_box(region, 20000, rng), traj])
    ys = target(xs)
    X = torch.tensor(xs, dtype=torch.float32)
    Y = torch.tensor(ys, dtype=torch.float32).unsqueeze(1)

    net = Net(X.shape[1], law["width"], law["acts"])
    opt = torch.optim.Adam(net.parameters(), lr=3e-3)
    sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, epochs)
    gain = float(np.linalg.norm(coef[1:]))
    for _ in range(epochs):
        opt.zero_grad()
        mse = torch.mean((net(X) - Y) ** 2)
        loss = mse + 1e-4 * torch.relu(net.lipschitz_proxy() - 1.5 * gain) ** 2
        loss.backward()
        opt.step()
        sched.step()

    policy = lambda x: net(torch.tensor(x, dtype=torch.float32)).detach().double().numpy()[:, 0]
    final = simulate(rhs, policy, sample_box(spec["init"], 200, rng), spec["control_step"], spec["steps"])[-1]
    inside = np.ones(len(final), dtype=bool)
    for j, g in enumerate(spec["goal"]):
        if g is not None:
            inside &= (final[:, j] >= g[0]) & (final[:, j] <= g[1])

    out = spec_path.parent / spec.get("model", f"{name}.nn")
    header = f"# {name}: imitation of u = {law['coef'][0]} + {law['coef'][1:]} . x\n"
    out.write_text(header + net.to_text())
    print(
        f"{name}: rmse {float(mse.detach()) ** 0.5:.2e}, lipschitz proxy {float(net.lipschitz_proxy().detach()):.2f}, "
        f"goal reached {inside.sum()}/{len(inside)} -> {out.relative_to(ROOT)}"
    )
    return inside.all()


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("systems", nargs="*", type=pathlib.Path)
    ap.add_argument("--all", action="store_true")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--epochs", type=int, default=3000)
    args = ap.parse_args()
    paths = args.systems or []
    if args.all:
        paths = sorted((ROOT / "benchmarks").glob("ex*.json"))
    if not paths:
        ap.error("no system files given")
    ok = all([fit(p.stem, p, args.seed, args.epochs) for p in paths])
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
